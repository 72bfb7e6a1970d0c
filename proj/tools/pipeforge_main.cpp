// Command-line front end; talks to the engine only through the C API.
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "pipeforge/pipeforge.h"

namespace {

void print_out(const char* line, void*) {
  std::fputs(line, stdout);
  std::fputc('\n', stdout);
}

void print_err(const char* line, void*) {
  std::fputs(line, stderr);
  std::fputc('\n', stderr);
}

struct Flags {
  std::string config, checkpoint, dataset, task, catalog, out_dir, trace;
  std::uint64_t seed = 0;
  int simulations = 0, games = 0, iterations = -1, folds = 0;
};

pf_command_options to_options(const Flags& f, CLI::App* sub) {
  pf_command_options o;
  pf_command_options_init(&o);
  auto str = [](const std::string& s) { return s.empty() ? nullptr : s.c_str(); };
  o.config = str(f.config);
  o.checkpoint = str(f.checkpoint);
  o.dataset = str(f.dataset);
  o.task = str(f.task);
  o.catalog = str(f.catalog);
  o.out_dir = str(f.out_dir);
  o.trace = str(f.trace);
  const CLI::Option* seed = sub->get_option_no_throw("--seed");
  o.has_seed = seed != nullptr && seed->count() > 0 ? 1 : 0;
  o.seed = f.seed;
  o.simulations = f.simulations;
  o.games = f.games;
  o.iterations = f.iterations;
  o.folds = f.folds;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pipeforge: search-based synthesis of tabular ML pipelines"};
  app.require_subcommand(1);
  app.set_version_flag("--version", pf_version());
  Flags f;

  auto common = [&f](CLI::App* sub) {
    sub->add_option("--seed", f.seed, "master seed");
    sub->add_option("--out-dir", f.out_dir, "output directory");
    sub->add_option("--catalog", f.catalog, "primitive catalog JSON (default: bundled)");
    sub->add_option("--folds", f.folds, "cross-validation folds")->check(CLI::Range(2, 1000));
    sub->add_option("--simulations", f.simulations, "MCTS simulations per move")->check(CLI::PositiveNumber);
  };

  CLI::App* selfplay = app.add_subcommand("selfplay", "run self-play training");
  selfplay->add_option("--config", f.config, "experiment config JSON")->required();
  selfplay->add_option("--games", f.games, "games per iteration")->check(CLI::PositiveNumber);
  selfplay->add_option("--iterations", f.iterations, "training iterations")->check(CLI::NonNegativeNumber);
  common(selfplay);

  CLI::App* search = app.add_subcommand("search", "synthesize a pipeline for a dataset");
  search->add_option("--checkpoint", f.checkpoint, "trained network")->required();
  search->add_option("--dataset", f.dataset, "CSV file")->required();
  search->add_option("--task", f.task, "task JSON file or inline JSON (default: <dataset>.task.json)");
  common(search);

  CLI::App* explain = app.add_subcommand("explain", "narrate and verify a game trace");
  explain->add_option("trace", f.trace, "trace JSON-lines file")->required();

  CLI::App* benchmark = app.add_subcommand("benchmark", "compare search, SGD baseline and random search");
  benchmark->add_option("--config", f.config, "benchmark config JSON")->required();
  benchmark->add_option("--checkpoint", f.checkpoint, "override the config's checkpoint");
  benchmark->add_option("--dataset", f.dataset, "run on this dataset only");
  benchmark->add_option("--task", f.task, "task for --dataset");
  common(benchmark);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  const pf_command_options options = to_options(f, sub);
  int exit_code = 2;
  pf_status status = PF_OK;
  if (sub == selfplay) {
    status = pf_cmd_selfplay(&options, print_out, print_err, nullptr, &exit_code);
  } else if (sub == search) {
    status = pf_cmd_search(&options, print_out, print_err, nullptr, &exit_code);
  } else if (sub == explain) {
    status = pf_cmd_explain(&options, print_out, print_err, nullptr, &exit_code);
  } else {
    status = pf_cmd_benchmark(&options, print_out, print_err, nullptr, &exit_code);
  }
  std::fflush(stdout);
  if (status != PF_OK) {
    std::fprintf(stderr, "error: %s\n", pf_last_error());
    return 2;
  }
  return exit_code;
}
