#include "core/selfplay.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "core/errors.hpp"
#include "core/external.hpp"

namespace pipeforge {

using nlohmann::json;

namespace {

std::size_t sample_index(std::span<const double> probs, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t last = probs.size();
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last = i;
    if (u < acc) return i;
  }
  return last;  // rounding left u above the final cumulative sum
}

std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace

GameTrace play_game(const PriorModel& model, const Catalog& catalog, const GameRules& rules, const GameEnv& env,
                    const PlayOptions& options, std::uint64_t seed) {
  if (env.evaluator == nullptr) throw Error(ErrorKind::kInvalidArgument, "game environment has no evaluator");
  PipelineReward reward(catalog, *env.evaluator, env.dataset, env.task, env.folds, env.eval_seed);
  GameTrace trace;
  trace.dataset = env.name;
  trace.task = env.task;
  trace.meta = env.meta;
  trace.rules = rules;
  trace.catalog = catalog.document();
  trace.catalog_hash = catalog.hash();

  Rng rng(seed);
  GameState state = initial_state(env.meta, env.task.kind);
  while (!is_terminal(state, rules)) {
    SearchConfig cfg = options.search;
    cfg.seed = derive_seed(seed, 0x5EA2C4ULL + static_cast<std::uint64_t>(state.move_count));
    Search search(catalog, rules, model, reward, cfg);
    search.reset(state);
    search.run();
    const std::vector<double> pi = search.policy(1.0);

    std::size_t action;
    if (options.greedy || cfg.temperature(state.move_count) == 0.0) {
      action = argmax(search.policy(0.0));
    } else {
      action = sample_index(pi, rng);
    }

    MoveRecord record;
    record.move = state.move_count;
    record.state_vec = encode_state(state, catalog, rules);
    for (std::size_t a : search.root().actions) {
      record.legal.push_back(a);
      record.pi.push_back(pi[a]);
    }
    record.action = action;
    trace.moves.push_back(std::move(record));

    state = apply_action(state, ActionCodec(catalog.size(), rules.max_length).decode(action), catalog, rules);
  }

  trace.final_pipeline = pipeline_ids(catalog, state.pipeline);
  if (!state.committed) {
    trace.status = GameStatus::kBudgetExhausted;
    trace.evaluation = 0.0;
    return trace;
  }
  const EvaluationResult result = reward.evaluate(state.pipeline);
  trace.status = result.ok() ? GameStatus::kOk : GameStatus::kFailedPipeline;
  trace.evaluation = result.ok() ? result.e : 0.0;
  return trace;
}

std::vector<TrainingExample> training_examples(const GameTrace& trace, std::size_t action_count) {
  std::vector<TrainingExample> out;
  out.reserve(trace.moves.size());
  for (const auto& m : trace.moves) {
    TrainingExample ex;
    ex.state_vec = m.state_vec;
    ex.legal.assign(action_count, 0);
    ex.pi_target.assign(action_count, 0.0);
    for (std::size_t i = 0; i < m.legal.size(); ++i) {
      ex.legal.at(m.legal[i]) = 1;
      ex.pi_target.at(m.legal[i]) = m.pi[i];
    }
    ex.e = trace.evaluation;
    out.push_back(std::move(ex));
  }
  return out;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw Error(ErrorKind::kInvalidArgument, "replay buffer capacity must be positive");
}

void ReplayBuffer::push(TrainingExample example) {
  if (items_.size() == capacity_) items_.pop_front();
  items_.push_back(std::move(example));
  ++next_index_;
}

std::vector<TrainingExample> ReplayBuffer::sample(std::size_t count, Rng& rng) const {
  std::vector<TrainingExample> out;
  if (items_.empty()) return out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(items_[static_cast<std::size_t>(rng.below(items_.size()))]);
  return out;
}

MetaFeatures synthetic_meta(std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x3E7A));
  MetaFeatures meta{};
  for (double& m : meta) m = rng.uniform();
  return meta;
}

namespace {

const std::set<std::string> kConfigKeys = {
    "catalog",     "datasets",       "seed",  "iterations",    "games_per_iteration", "train_steps",
    "batch_size",  "buffer_capacity", "simulations", "c_puct",  "tau_cutoff",          "root_noise",
    "folds",       "max_length",     "max_moves",    "learning_rate", "alpha",         "beta",
    "embed",       "hidden"};

std::string resolve(const std::string& base_dir, const std::string& path) {
  if (path.empty() || std::filesystem::path(path).is_absolute()) return path;
  return (std::filesystem::path(base_dir) / path).lexically_normal().string();
}

template <typename T>
void read_key(const json& doc, const char* key, T& out) {
  if (doc.contains(key)) out = doc.at(key).get<T>();
}

}  // namespace

std::vector<DatasetEntry> parse_dataset_entries(const json& list, const std::string& base_dir) {
  if (!list.is_array()) throw Error(ErrorKind::kParse, "'datasets' must be an array");
  std::vector<DatasetEntry> out;
  try {
    for (const auto& entry : list) {
      DatasetEntry d;
      if (entry.contains("synthetic")) {
        d.synthetic_seed = entry.at("synthetic").value("seed", std::uint64_t{0});
        d.task = entry.contains("task") ? task_from_json(entry.at("task"))
                                        : TaskSpec{TaskKind::kBinaryClassification, "", Metric::kAccuracy};
        d.name = entry.value("name", "synthetic-" + std::to_string(*d.synthetic_seed));
      } else {
        d.path = resolve(base_dir, entry.at("path").get<std::string>());
        if (entry.contains("task") && entry.at("task").is_object()) {
          d.task = task_from_json(entry.at("task"));
        } else {
          std::string task_path;
          if (entry.contains("task")) {
            task_path = resolve(base_dir, entry.at("task").get<std::string>());
          } else {
            task_path = std::filesystem::path(d.path).replace_extension(".task.json").string();
          }
          d.task = load_task_spec(task_path);
        }
        d.name = entry.value("name", std::filesystem::path(d.path).stem().string());
      }
      out.push_back(std::move(d));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("dataset entry: ") + e.what());
  }
  return out;
}

ExperimentConfig ExperimentConfig::from_json(const json& doc, const std::string& base_dir) {
  if (!doc.is_object()) throw Error(ErrorKind::kParse, "experiment config must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (!kConfigKeys.count(key)) throw Error(ErrorKind::kParse, "unknown config key '" + key + "'");
  }
  ExperimentConfig c;
  try {
    if (doc.contains("catalog")) c.catalog_path = resolve(base_dir, doc.at("catalog").get<std::string>());
    read_key(doc, "seed", c.seed);
    read_key(doc, "iterations", c.iterations);
    read_key(doc, "games_per_iteration", c.games_per_iteration);
    read_key(doc, "train_steps", c.train_steps);
    read_key(doc, "batch_size", c.batch_size);
    read_key(doc, "buffer_capacity", c.buffer_capacity);
    read_key(doc, "simulations", c.simulations);
    read_key(doc, "c_puct", c.c_puct);
    read_key(doc, "tau_cutoff", c.tau_cutoff);
    read_key(doc, "root_noise", c.root_noise);
    read_key(doc, "folds", c.folds);
    read_key(doc, "max_length", c.max_length);
    read_key(doc, "max_moves", c.max_moves);
    read_key(doc, "learning_rate", c.learning_rate);
    read_key(doc, "alpha", c.alpha);
    read_key(doc, "beta", c.beta);
    read_key(doc, "embed", c.embed);
    read_key(doc, "hidden", c.hidden);
    c.datasets = parse_dataset_entries(doc.at("datasets"), base_dir);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot read config '" + path + "'");
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorKind::kParse, "config '" + path + "' is not valid JSON");
  const std::string dir = std::filesystem::path(path).parent_path().string();
  return from_json(doc, dir.empty() ? "." : dir);
}

json ExperimentConfig::to_json() const {
  json datasets = json::array();
  for (const auto& d : this->datasets) {
    json e = {{"name", d.name}, {"task", task_to_json(d.task)}};
    if (d.synthetic_seed) {
      e["synthetic"] = {{"seed", *d.synthetic_seed}};
    } else {
      e["path"] = d.path;
    }
    datasets.push_back(std::move(e));
  }
  json doc = {{"datasets", datasets},         {"seed", seed},
              {"iterations", iterations},     {"games_per_iteration", games_per_iteration},
              {"train_steps", train_steps},   {"batch_size", batch_size},
              {"buffer_capacity", buffer_capacity}, {"simulations", simulations},
              {"c_puct", c_puct},             {"tau_cutoff", tau_cutoff},
              {"root_noise", root_noise},     {"folds", folds},
              {"max_length", max_length},     {"max_moves", max_moves},
              {"learning_rate", learning_rate}, {"alpha", alpha},
              {"beta", beta},                 {"embed", embed},
              {"hidden", hidden}};
  if (!catalog_path.empty()) doc["catalog"] = catalog_path;
  return doc;
}

void ExperimentConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorKind::kInvalidArgument, std::string("experiment config: ") + what);
  };
  require(!datasets.empty(), "at least one dataset is required");
  require(iterations >= 0, "iterations must be >= 0");
  require(games_per_iteration >= 1, "games_per_iteration must be >= 1");
  require(train_steps >= 0, "train_steps must be >= 0");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(buffer_capacity >= 1, "buffer_capacity must be >= 1");
  require(folds >= 2, "folds must be >= 2");
  require(max_length >= 1, "max_length must be >= 1");
  require(max_moves >= 1, "max_moves must be >= 1");
  require(learning_rate > 0.0, "learning_rate must be positive");
  require(alpha >= 0.0 && beta >= 0.0, "alpha and beta must be non-negative");
  require(embed >= 1 && hidden >= 1, "embed and hidden must be positive");
  search_config().validate();
}

SearchConfig ExperimentConfig::search_config() const {
  SearchConfig s;
  s.c = c_puct;
  s.simulations = simulations;
  s.tau_cutoff = tau_cutoff;
  s.root_noise = root_noise;
  s.seed = seed;
  return s;
}

json IterationReport::to_json() const {
  return {{"iteration", iteration},
          {"games", games},
          {"mean_e", mean_e},
          {"max_e", max_e},
          {"loss_before", loss_before},
          {"loss_after", loss_after},
          {"ok_games", ok_games},
          {"failed_games", failed_games},
          {"budget_exhausted_games", exhausted_games},
          {"buffer_size", buffer_size},
          {"best_e", best_e},
          {"best_pipeline", best_pipeline},
          {"best_dataset", best_dataset},
          {"best_trace", best_trace},
          {"best_actions", best_actions}};
}

std::string game_label(int iteration, int game) {
  char buf[48];
  // Games are 0-based internally; file names count from 1 like iterations.
  std::snprintf(buf, sizeof buf, "iter%03d-game%03d", iteration, game + 1);
  return buf;
}

Environments::Environments(const ExperimentConfig& config, const Catalog& catalog)
    : Environments(config.datasets, catalog, config.folds, config.seed, config.external_evaluator) {}

Environments::Environments(const std::vector<DatasetEntry>& entries, const Catalog& catalog, int folds,
                           std::uint64_t eval_seed, const std::string& external_evaluator) {
  for (const auto& entry : entries) {
    GameEnv env;
    env.name = entry.name;
    env.task = entry.task;
    env.folds = folds;
    env.eval_seed = eval_seed;
    if (entry.synthetic_seed) {
      env.meta = synthetic_meta(*entry.synthetic_seed);
      inner_.push_back(std::make_unique<SyntheticEvaluator>(catalog, *entry.synthetic_seed));
    } else {
      datasets_.push_back(std::make_unique<Dataset>(load_dataset(entry.path, entry.task)));
      env.dataset = datasets_.back().get();
      env.meta = meta_features(*env.dataset);
      if (!external_evaluator.empty()) {
        inner_.push_back(std::make_unique<ExternalEvaluator>(external_evaluator));
      } else {
        inner_.push_back(std::make_unique<BuiltinEvaluator>());
      }
    }
    cached_.push_back(std::make_unique<CachedEvaluator>(*inner_.back()));
    env.evaluator = cached_.back().get();
    envs_.push_back(std::move(env));
  }
}

std::size_t Environments::evaluations() const {
  std::size_t total = 0;
  for (const auto& c : cached_) total += c->misses();
  return total;
}

NetParams initial_params(const ExperimentConfig& config, const Catalog& catalog) {
  const NetDims dims = dims_for(catalog, config.rules(), config.embed, config.hidden);
  return NetParams::random(dims, NetHyper{config.alpha, config.beta, config.learning_rate},
                           derive_seed(config.seed, 0x1A17));
}

ExperimentResult run_iterations(const ExperimentConfig& config, const Catalog& catalog,
                                const IterationObserver& observer) {
  config.validate();
  const GameRules rules = config.rules();
  ExperimentResult result{initial_params(config, catalog), {}};
  if (config.iterations == 0) return result;

  Environments environments(config, catalog);
  const auto& envs = environments.envs();
  const std::size_t action_count = action_space_size(catalog.size(), rules.max_length);
  ReplayBuffer buffer(config.buffer_capacity);
  Rng train_rng(derive_seed(config.seed, 0x7A11));
  PlayOptions options;
  options.search = config.search_config();

  IterationReport best;
  std::size_t game_counter = 0;
  for (int it = 1; it <= config.iterations; ++it) {
    try {
      const NetParams snapshot = result.params;
      const NetPrior prior(snapshot, catalog, rules);
      IterationReport report;
      report.iteration = it;
      double sum_e = 0.0;
      for (int g = 0; g < config.games_per_iteration; ++g) {
        const GameEnv& env = envs[game_counter++ % envs.size()];
        const std::uint64_t game_seed = derive_seed(derive_seed(config.seed, static_cast<std::uint64_t>(it)),
                                                    static_cast<std::uint64_t>(g));
        const GameTrace trace = play_game(prior, catalog, rules, env, options, game_seed);
        if (observer.on_game) observer.on_game(it, g, trace);
        for (auto& ex : training_examples(trace, action_count)) buffer.push(std::move(ex));

        ++report.games;
        sum_e += trace.evaluation;
        report.max_e = std::max(report.max_e, trace.evaluation);
        switch (trace.status) {
          case GameStatus::kOk:
            ++report.ok_games;
            break;
          case GameStatus::kFailedPipeline:
            ++report.failed_games;
            break;
          case GameStatus::kBudgetExhausted:
            ++report.exhausted_games;
            break;
        }
        if (best.best_trace.empty() || trace.evaluation > best.best_e) {
          best.best_e = trace.evaluation;
          best.best_pipeline = trace.final_pipeline;
          best.best_dataset = trace.dataset;
          best.best_trace = game_label(it, g);
          best.best_actions.clear();
          for (const auto& m : trace.moves) best.best_actions.push_back(m.action);
        }
      }
      report.mean_e = sum_e / report.games;

      Rng probe_rng(derive_seed(config.seed, 0xF1ED00ULL + static_cast<std::uint64_t>(it)));
      const auto probe = buffer.sample(static_cast<std::size_t>(config.batch_size), probe_rng);
      report.loss_before = loss(result.params, probe).total();
      for (int step = 0; step < config.train_steps; ++step) {
        const auto batch = buffer.sample(static_cast<std::size_t>(config.batch_size), train_rng);
        try {
          train_step(result.params, batch, config.learning_rate);
        } catch (const NumericError&) {
          // rejected step; parameters untouched
        }
      }
      report.loss_after = loss(result.params, probe).total();
      report.buffer_size = buffer.size();
      report.best_e = best.best_e;
      report.best_pipeline = best.best_pipeline;
      report.best_dataset = best.best_dataset;
      report.best_trace = best.best_trace;
      report.best_actions = best.best_actions;
      if (observer.on_report) observer.on_report(report);
      result.reports.push_back(std::move(report));
    } catch (const Error& e) {
      throw Error(e.kind(), "iteration " + std::to_string(it) + ": " + e.what());
    } catch (const std::exception& e) {
      throw Error(ErrorKind::kEvaluator, "iteration " + std::to_string(it) + ": " + e.what());
    }
  }
  return result;
}

}  // namespace pipeforge
