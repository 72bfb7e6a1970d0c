#include "pipeforge/pipeforge.h"

#include <algorithm>
#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <string>
#include <vector>

#include "core/catalog.hpp"
#include "core/commands.hpp"
#include "core/dataset.hpp"
#include "core/errors.hpp"
#include "core/evaluation.hpp"
#include "core/game.hpp"
#include "core/mcts.hpp"
#include "core/net.hpp"

struct pf_catalog {
  pipeforge::Catalog catalog;
};

struct pf_state {
  const pipeforge::Catalog* catalog;
  pipeforge::GameRules rules;
  pipeforge::GameState state;
};

struct pf_dataset {
  pipeforge::Dataset dataset;
};

struct pf_net {
  pipeforge::NetParams params;
  pipeforge::GameRules rules;
};

namespace {

using namespace pipeforge;

thread_local std::string g_last_error;

pf_status status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument:
      return PF_ERR_INVALID_ARGUMENT;
    case ErrorKind::kIo:
      return PF_ERR_IO;
    case ErrorKind::kParse:
      return PF_ERR_PARSE;
    case ErrorKind::kCatalog:
      return PF_ERR_CATALOG;
    case ErrorKind::kUnknownPrimitive:
      return PF_ERR_UNKNOWN_PRIMITIVE;
    case ErrorKind::kIllegalAction:
      return PF_ERR_ILLEGAL_ACTION;
    case ErrorKind::kTerminalState:
      return PF_ERR_TERMINAL_STATE;
    case ErrorKind::kShape:
      return PF_ERR_SHAPE;
    case ErrorKind::kNumeric:
      return PF_ERR_NUMERIC;
    case ErrorKind::kDataset:
      return PF_ERR_DATASET;
    case ErrorKind::kEvaluator:
      return PF_ERR_EVALUATOR;
    case ErrorKind::kReplay:
      return PF_ERR_REPLAY;
  }
  return PF_ERR_INTERNAL;
}

pf_status fail(pf_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename Body>
pf_status guard(Body&& body) {
  try {
    g_last_error.clear();
    return body();
  } catch (const Error& e) {
    return fail(status_for(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(PF_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(PF_ERR_INTERNAL, e.what());
  }
}

pf_status null_arg(const char* name) { return fail(PF_ERR_INVALID_ARGUMENT, std::string(name) + " is null"); }

TaskKind task_kind_from(int kind) {
  if (kind < 0 || kind >= kTaskKindCount) throw Error(ErrorKind::kInvalidArgument, "task kind out of range");
  return static_cast<TaskKind>(kind);
}

void fill(pf_eval_result* out, const EvaluationResult& r) {
  out->e = r.e;
  out->raw_metric = r.raw_metric;
  out->status = static_cast<int>(r.status);
}

CommandOptions to_options(const pf_command_options* o) {
  CommandOptions c;
  auto str = [](const char* s) { return s != nullptr ? std::string(s) : std::string(); };
  c.config = str(o->config);
  c.checkpoint = str(o->checkpoint);
  c.dataset = str(o->dataset);
  c.task = str(o->task);
  c.catalog = str(o->catalog);
  c.out_dir = str(o->out_dir);
  c.trace = str(o->trace);
  if (o->has_seed) c.seed = o->seed;
  if (o->simulations > 0) c.simulations = o->simulations;
  if (o->games > 0) c.games = o->games;
  if (o->iterations >= 0) c.iterations = o->iterations;
  if (o->folds > 0) c.folds = o->folds;
  return c;
}

using CommandFn = int (*)(const CommandOptions&, const LineSink&, const LineSink&);

pf_status run_command(CommandFn fn, const pf_command_options* options, pf_line_fn out, pf_line_fn err, void* user,
                      int* exit_code) {
  if (options == nullptr) return null_arg("options");
  if (exit_code == nullptr) return null_arg("exit_code");
  return guard([&] {
    const LineSink out_sink = [&](const std::string& line) {
      if (out != nullptr) out(line.c_str(), user);
    };
    const LineSink err_sink = [&](const std::string& line) {
      if (err != nullptr) err(line.c_str(), user);
    };
    *exit_code = fn(to_options(options), out_sink, err_sink);
    return PF_OK;
  });
}

}  // namespace

extern "C" {

const char* pf_last_error(void) { return g_last_error.c_str(); }

const char* pf_status_name(pf_status status) {
  switch (status) {
    case PF_OK:
      return "ok";
    case PF_ERR_INVALID_ARGUMENT:
      return "invalid_argument";
    case PF_ERR_IO:
      return "io";
    case PF_ERR_PARSE:
      return "parse";
    case PF_ERR_CATALOG:
      return "catalog";
    case PF_ERR_UNKNOWN_PRIMITIVE:
      return "unknown_primitive";
    case PF_ERR_ILLEGAL_ACTION:
      return "illegal_action";
    case PF_ERR_TERMINAL_STATE:
      return "terminal_state";
    case PF_ERR_SHAPE:
      return "shape";
    case PF_ERR_NUMERIC:
      return "numeric";
    case PF_ERR_DATASET:
      return "dataset";
    case PF_ERR_EVALUATOR:
      return "evaluator";
    case PF_ERR_REPLAY:
      return "replay";
    case PF_ERR_BUFFER_TOO_SMALL:
      return "buffer_too_small";
    case PF_ERR_INTERNAL:
      return "internal";
  }
  return "unknown";
}

const char* pf_version(void) { return "0.1.0"; }

double pf_puct_score(double q, double p, double n_s, double n_sa, double c) {
  return puct_score(q, p, n_s, n_sa, c);
}

pf_status pf_catalog_load(const char* path, pf_catalog** out) {
  if (out == nullptr) return null_arg("out");
  return guard([&] {
    auto handle = std::make_unique<pf_catalog>(
        pf_catalog{path != nullptr ? Catalog::from_file(path) : Catalog::builtin()});
    *out = handle.release();
    return PF_OK;
  });
}

void pf_catalog_free(pf_catalog* catalog) { delete catalog; }

size_t pf_catalog_size(const pf_catalog* catalog) { return catalog != nullptr ? catalog->catalog.size() : 0; }

const char* pf_catalog_hash(const pf_catalog* catalog) {
  return catalog != nullptr ? catalog->catalog.hash().c_str() : "";
}

const char* pf_catalog_id(const pf_catalog* catalog, size_t ordinal) {
  if (catalog == nullptr || ordinal >= catalog->catalog.size()) return nullptr;
  return catalog->catalog.at(ordinal).id.c_str();
}

pf_status pf_catalog_validate(const pf_catalog* catalog, const char* const* ids, size_t count, int max_length,
                              int task_kind, int* valid) {
  if (catalog == nullptr) return null_arg("catalog");
  if (valid == nullptr) return null_arg("valid");
  if (ids == nullptr && count > 0) return null_arg("ids");
  return guard([&] {
    std::vector<std::string> names;
    for (size_t i = 0; i < count; ++i) {
      if (ids[i] == nullptr) return null_arg("ids[i]");
      names.emplace_back(ids[i]);
    }
    TaskKind task{};
    const TaskKind* task_ptr = nullptr;
    if (task_kind >= 0) {
      task = task_kind_from(task_kind);
      task_ptr = &task;
    }
    *valid = validate_pipeline(catalog->catalog, names, max_length, task_ptr).ok() ? 1 : 0;
    return PF_OK;
  });
}

pf_status pf_state_new(const pf_catalog* catalog, const double* meta, int task_kind, int max_length, int max_moves,
                       pf_state** out) {
  if (catalog == nullptr) return null_arg("catalog");
  if (out == nullptr) return null_arg("out");
  return guard([&] {
    if (max_length < 1 || max_moves < 1) throw Error(ErrorKind::kInvalidArgument, "max_length and max_moves must be >= 1");
    MetaFeatures m{};
    if (meta != nullptr) std::copy(meta, meta + kMetaFeatureCount, m.begin());
    auto handle = std::make_unique<pf_state>(
        pf_state{&catalog->catalog, GameRules{max_length, max_moves}, initial_state(m, task_kind_from(task_kind))});
    *out = handle.release();
    return PF_OK;
  });
}

void pf_state_free(pf_state* state) { delete state; }

size_t pf_state_action_count(const pf_state* state) {
  return state != nullptr ? action_space_size(state->catalog->size(), state->rules.max_length) : 0;
}

int pf_state_is_terminal(const pf_state* state) {
  return state != nullptr && is_terminal(state->state, state->rules) ? 1 : 0;
}

int pf_state_is_committed(const pf_state* state) { return state != nullptr && state->state.committed ? 1 : 0; }

int pf_state_move_count(const pf_state* state) { return state != nullptr ? state->state.move_count : 0; }

size_t pf_state_length(const pf_state* state) { return state != nullptr ? state->state.pipeline.size() : 0; }

int pf_state_primitive(const pf_state* state, size_t position) {
  if (state == nullptr || position >= state->state.pipeline.size()) return -1;
  return state->state.pipeline[position];
}

pf_status pf_state_legal(const pf_state* state, uint8_t* mask, size_t capacity) {
  if (state == nullptr) return null_arg("state");
  if (mask == nullptr) return null_arg("mask");
  return guard([&] {
    const auto legal = legal_actions(state->state, *state->catalog, state->rules);
    if (capacity < legal.size()) return fail(PF_ERR_BUFFER_TOO_SMALL, "mask needs " + std::to_string(legal.size()) + " bytes");
    std::copy(legal.begin(), legal.end(), mask);
    return PF_OK;
  });
}

pf_status pf_state_apply(pf_state* state, size_t action) {
  if (state == nullptr) return null_arg("state");
  return guard([&] {
    const ActionCodec codec(state->catalog->size(), state->rules.max_length);
    if (action >= codec.size()) throw Error(ErrorKind::kInvalidArgument, "action index out of range");
    state->state = apply_action(state->state, codec.decode(action), *state->catalog, state->rules);
    return PF_OK;
  });
}

pf_status pf_state_encode(const pf_state* state, double* out, size_t capacity, size_t* width) {
  if (state == nullptr) return null_arg("state");
  return guard([&] {
    const StateVector v = encode_state(state->state, *state->catalog, state->rules);
    if (width != nullptr) *width = v.size();
    if (out == nullptr || capacity < v.size()) {
      return fail(PF_ERR_BUFFER_TOO_SMALL, "state vector needs " + std::to_string(v.size()) + " entries");
    }
    std::copy(v.begin(), v.end(), out);
    return PF_OK;
  });
}

pf_status pf_dataset_load(const char* csv_path, const char* task, pf_dataset** out) {
  if (csv_path == nullptr) return null_arg("csv_path");
  if (task == nullptr) return null_arg("task");
  if (out == nullptr) return null_arg("out");
  return guard([&] {
    auto handle = std::make_unique<pf_dataset>(pf_dataset{load_dataset(csv_path, load_task_spec(task))});
    *out = handle.release();
    return PF_OK;
  });
}

void pf_dataset_free(pf_dataset* dataset) { delete dataset; }

size_t pf_dataset_rows(const pf_dataset* dataset) { return dataset != nullptr ? dataset->dataset.rows() : 0; }

size_t pf_dataset_class_count(const pf_dataset* dataset) {
  return dataset != nullptr ? dataset->dataset.class_count() : 0;
}

pf_status pf_dataset_meta_features(const pf_dataset* dataset, double* out16) {
  if (dataset == nullptr) return null_arg("dataset");
  if (out16 == nullptr) return null_arg("out16");
  return guard([&] {
    const MetaFeatures m = meta_features(dataset->dataset);
    std::copy(m.begin(), m.end(), out16);
    return PF_OK;
  });
}

pf_status pf_evaluate(const pf_catalog* catalog, const pf_dataset* dataset, const char* const* ids, size_t count,
                      int folds, uint64_t seed, pf_eval_result* out) {
  if (catalog == nullptr) return null_arg("catalog");
  if (dataset == nullptr) return null_arg("dataset");
  if (out == nullptr) return null_arg("out");
  if (ids == nullptr && count > 0) return null_arg("ids");
  return guard([&] {
    std::vector<std::string> names;
    for (size_t i = 0; i < count; ++i) names.emplace_back(ids[i] != nullptr ? ids[i] : "");
    fill(out, evaluate_pipeline(catalog->catalog, names, dataset->dataset, folds, seed));
    return PF_OK;
  });
}

pf_status pf_baseline_sgd(const pf_dataset* dataset, int folds, uint64_t seed, pf_eval_result* out) {
  if (dataset == nullptr) return null_arg("dataset");
  if (out == nullptr) return null_arg("out");
  return guard([&] {
    fill(out, baseline_sgd(dataset->dataset, folds, seed));
    return PF_OK;
  });
}

pf_status pf_net_random(const pf_catalog* catalog, int max_length, size_t embed, size_t hidden, uint64_t seed,
                        pf_net** out) {
  if (catalog == nullptr) return null_arg("catalog");
  if (out == nullptr) return null_arg("out");
  return guard([&] {
    if (max_length < 1 || embed < 1 || hidden < 1) throw Error(ErrorKind::kInvalidArgument, "network sizes must be positive");
    const GameRules rules{max_length, kDefaultMaxMoves};
    auto handle = std::make_unique<pf_net>(
        pf_net{NetParams::random(dims_for(catalog->catalog, rules, embed, hidden), NetHyper{}, seed), rules});
    *out = handle.release();
    return PF_OK;
  });
}

pf_status pf_net_load(const char* path, const pf_catalog* catalog, pf_net** out) {
  if (path == nullptr) return null_arg("path");
  if (out == nullptr) return null_arg("out");
  return guard([&] {
    Checkpoint cp = load_checkpoint(path, catalog != nullptr ? &catalog->catalog : nullptr);
    const GameRules rules{static_cast<int>(cp.params.dims().max_length), kDefaultMaxMoves};
    auto handle = std::make_unique<pf_net>(pf_net{std::move(cp.params), rules});
    *out = handle.release();
    return PF_OK;
  });
}

pf_status pf_net_save(const pf_net* net, const pf_catalog* catalog, const char* path) {
  if (net == nullptr) return null_arg("net");
  if (catalog == nullptr) return null_arg("catalog");
  if (path == nullptr) return null_arg("path");
  return guard([&] {
    save_checkpoint(net->params, catalog->catalog, path);
    return PF_OK;
  });
}

void pf_net_free(pf_net* net) { delete net; }

size_t pf_net_parameter_count(const pf_net* net) { return net != nullptr ? net->params.theta().size() : 0; }

pf_status pf_net_predict(const pf_net* net, const pf_state* state, double* probs, size_t capacity, double* value) {
  if (net == nullptr) return null_arg("net");
  if (state == nullptr) return null_arg("state");
  return guard([&] {
    const auto legal = legal_actions(state->state, *state->catalog, state->rules);
    const StateVector v = encode_state(state->state, *state->catalog, state->rules);
    const PolicyValueOutput pv = forward(net->params, v, legal);
    if (value != nullptr) *value = pv.value;
    if (probs != nullptr) {
      if (capacity < pv.probs.size()) return fail(PF_ERR_BUFFER_TOO_SMALL, "probs buffer too small");
      std::copy(pv.probs.begin(), pv.probs.end(), probs);
    }
    return PF_OK;
  });
}

void pf_command_options_init(pf_command_options* options) {
  if (options == nullptr) return;
  std::memset(options, 0, sizeof *options);
  options->iterations = -1;
}

pf_status pf_cmd_selfplay(const pf_command_options* options, pf_line_fn out, pf_line_fn err, void* user,
                          int* exit_code) {
  return run_command(&cmd_selfplay, options, out, err, user, exit_code);
}

pf_status pf_cmd_search(const pf_command_options* options, pf_line_fn out, pf_line_fn err, void* user,
                        int* exit_code) {
  return run_command(&cmd_search, options, out, err, user, exit_code);
}

pf_status pf_cmd_explain(const pf_command_options* options, pf_line_fn out, pf_line_fn err, void* user,
                         int* exit_code) {
  return run_command(&cmd_explain, options, out, err, user, exit_code);
}

pf_status pf_cmd_benchmark(const pf_command_options* options, pf_line_fn out, pf_line_fn err, void* user,
                           int* exit_code) {
  return run_command(&cmd_benchmark, options, out, err, user, exit_code);
}

}  // extern "C"
