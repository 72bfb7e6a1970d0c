#include "core/commands.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "core/benchmark.hpp"
#include "core/errors.hpp"
#include "core/external.hpp"
#include "core/selfplay.hpp"
#include "core/trace.hpp"

namespace pipeforge {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string external_command() {
  const char* cmd = std::getenv(kEvaluatorEnvVar);
  return cmd != nullptr ? std::string(cmd) : std::string();
}

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::kIo:
    case ErrorKind::kParse:
    case ErrorKind::kInvalidArgument:
    case ErrorKind::kCatalog:
    case ErrorKind::kUnknownPrimitive:
    case ErrorKind::kShape:
    case ErrorKind::kDataset:
      return kExitUsage;
    default:
      return kExitTaskFailure;
  }
}

template <typename Body>
int guarded(const LineSink& err, Body&& body) {
  try {
    return body();
  } catch (const Error& e) {
    err(std::string("error: ") + e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err(std::string("error: ") + e.what());
    return kExitTaskFailure;
  }
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create directory '" + dir + "': " + ec.message());
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::kIo, "cannot write '" + path + "'");
  return f;
}

std::string join(const std::vector<std::string>& ids, const char* sep) {
  std::string s;
  for (std::size_t i = 0; i < ids.size(); ++i) s += (i ? sep : "") + ids[i];
  return s;
}

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

// Catalog for a checkpoint: an explicit file wins and must match the stored
// hash, else the embedded document, else the bundled catalog.
std::pair<Catalog, Checkpoint> load_model(const std::string& checkpoint_path, const std::string& catalog_path) {
  if (checkpoint_path.empty()) throw Error(ErrorKind::kInvalidArgument, "--checkpoint is required");
  if (!catalog_path.empty()) {
    Catalog catalog = Catalog::from_file(catalog_path);
    Checkpoint cp = load_checkpoint(checkpoint_path, &catalog);
    return {std::move(catalog), std::move(cp)};
  }
  Checkpoint cp = load_checkpoint(checkpoint_path);
  Catalog catalog = cp.catalog_document.is_null() ? Catalog::builtin() : Catalog::from_json(cp.catalog_document);
  if (catalog.hash() != cp.catalog_hash) {
    throw Error(ErrorKind::kShape, "checkpoint catalog hash " + cp.catalog_hash + " does not match catalog " +
                                       catalog.hash());
  }
  return {std::move(catalog), std::move(cp)};
}

}  // namespace

int cmd_selfplay(const CommandOptions& o, const LineSink& out, const LineSink& err) {
  return guarded(err, [&] {
    if (o.config.empty()) throw Error(ErrorKind::kInvalidArgument, "--config is required");
    ExperimentConfig config = ExperimentConfig::from_file(o.config);
    if (!o.catalog.empty()) config.catalog_path = o.catalog;
    if (o.seed) config.seed = *o.seed;
    if (o.iterations) config.iterations = *o.iterations;
    if (o.games) config.games_per_iteration = *o.games;
    if (o.simulations) config.simulations = *o.simulations;
    if (o.folds) config.folds = *o.folds;
    config.external_evaluator = external_command();
    config.validate();
    const Catalog catalog =
        config.catalog_path.empty() ? Catalog::builtin() : Catalog::from_file(config.catalog_path);

    const std::string dir = o.out_dir.empty() ? std::string("selfplay-out") : o.out_dir;
    const std::string trace_dir = (fs::path(dir) / "traces").string();
    ensure_dir(trace_dir);
    std::ofstream reports = open_out((fs::path(dir) / "reports.jsonl").string());

    IterationObserver observer;
    observer.on_game = [&](int it, int g, const GameTrace& trace) {
      write_trace(trace, (fs::path(trace_dir) / (game_label(it, g) + ".jsonl")).string());
    };
    observer.on_report = [&](const IterationReport& report) {
      const std::string line = report.to_json().dump();
      reports << line << "\n";
      reports.flush();
      out(line);
    };
    const ExperimentResult result = run_iterations(config, catalog, observer);
    const std::string checkpoint = (fs::path(dir) / "checkpoint.json").string();
    save_checkpoint(result.params, catalog, checkpoint);
    err("checkpoint: " + checkpoint);
    return kExitOk;
  });
}

int cmd_search(const CommandOptions& o, const LineSink& out, const LineSink& err) {
  return guarded(err, [&] {
    auto [catalog, cp] = load_model(o.checkpoint, o.catalog);
    if (o.dataset.empty()) throw Error(ErrorKind::kInvalidArgument, "--dataset is required");
    const std::string task_ref =
        o.task.empty() ? fs::path(o.dataset).replace_extension(".task.json").string() : o.task;
    DatasetEntry entry;
    entry.path = o.dataset;
    entry.task = load_task_spec(task_ref);
    entry.name = fs::path(o.dataset).stem().string();

    const std::uint64_t seed = o.seed.value_or(0);
    const int folds = o.folds.value_or(kDefaultFolds);
    if (folds < 2) throw Error(ErrorKind::kInvalidArgument, "--folds must be >= 2");
    Environments envs({entry}, catalog, folds, seed, external_command());
    const GameRules rules{static_cast<int>(cp.params.dims().max_length), kDefaultMaxMoves};
    const NetPrior prior(cp.params, catalog, rules);
    PlayOptions options;
    options.greedy = true;
    options.search.simulations = o.simulations.value_or(100);
    options.search.seed = seed;
    const GameTrace trace = play_game(prior, catalog, rules, envs.envs()[0], options, seed);

    const std::string dir = o.out_dir.empty() ? std::string(".") : o.out_dir;
    ensure_dir(dir);
    const std::string trace_path =
        (fs::path(dir) / ("search-" + entry.name + "-seed" + std::to_string(seed) + ".jsonl")).string();
    write_trace(trace, trace_path);
    out("pipeline: " + join(trace.final_pipeline, " "));
    out("e: " + fixed4(trace.evaluation));
    out("status: " + std::string(to_string(trace.status)));
    out("evaluations: " + std::to_string(envs.evaluations()));
    out("trace: " + trace_path);
    return trace.status == GameStatus::kOk ? kExitOk : kExitTaskFailure;
  });
}

int cmd_explain(const CommandOptions& o, const LineSink& out, const LineSink& err) {
  return guarded(err, [&] {
    const std::string path = !o.trace.empty() ? o.trace : o.config;
    if (path.empty()) throw Error(ErrorKind::kInvalidArgument, "a trace path is required");
    const GameTrace trace = read_trace(path);
    std::ostringstream text;
    const ReplayCheck check = explain(trace, text);
    std::istringstream lines(text.str());
    for (std::string line; std::getline(lines, line);) out(line);
    return check.ok ? kExitOk : kExitTaskFailure;
  });
}

int cmd_benchmark(const CommandOptions& o, const LineSink& out, const LineSink& err) {
  return guarded(err, [&] {
    if (o.config.empty()) throw Error(ErrorKind::kInvalidArgument, "--config is required");
    BenchmarkConfig config = BenchmarkConfig::from_file(o.config);
    if (!o.checkpoint.empty()) config.checkpoint = o.checkpoint;
    if (o.seed) config.seed = *o.seed;
    if (o.simulations) config.simulations = *o.simulations;
    if (o.folds) config.folds = *o.folds;
    if (!o.dataset.empty()) {
      DatasetEntry entry;
      entry.path = o.dataset;
      entry.task = load_task_spec(o.task.empty() ? fs::path(o.dataset).replace_extension(".task.json").string() : o.task);
      entry.name = fs::path(o.dataset).stem().string();
      config.datasets = {entry};
    }
    auto [catalog, cp] = load_model(config.checkpoint, o.catalog);
    const auto rows = run_benchmark(config, catalog, cp.params, external_command());

    const std::string dir = o.out_dir.empty() ? std::string(".") : o.out_dir;
    ensure_dir(dir);
    const std::string jsonl = (fs::path(dir) / "benchmark.jsonl").string();
    std::ofstream f = open_out(jsonl);
    for (const auto& row : rows) f << row.to_json().dump() << "\n";
    std::istringstream table(format_table(rows));
    for (std::string line; std::getline(table, line);) out(line);
    err("results: " + jsonl);
    return kExitOk;
  });
}

}  // namespace pipeforge
