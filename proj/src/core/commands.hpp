#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

namespace pipeforge {

inline constexpr int kExitOk = 0;
inline constexpr int kExitTaskFailure = 1;
inline constexpr int kExitUsage = 2;

// Flag values shared by the commands; unset optionals keep config values.
struct CommandOptions {
  std::string config;
  std::string checkpoint;
  std::string dataset;
  std::string task;  // path or inline JSON; defaults to <dataset stem>.task.json
  std::string catalog;
  std::string out_dir;
  std::string trace;
  std::optional<std::uint64_t> seed;
  std::optional<int> simulations;
  std::optional<int> games;
  std::optional<int> iterations;
  std::optional<int> folds;
};

using LineSink = std::function<void(const std::string& line)>;

// Each returns a process exit code. `out` receives the command's output
// lines, `err` diagnostics. PIPEFORGE_EVALUATOR is read from the
// environment to attach an external evaluator.
int cmd_selfplay(const CommandOptions& options, const LineSink& out, const LineSink& err);
int cmd_search(const CommandOptions& options, const LineSink& out, const LineSink& err);
int cmd_explain(const CommandOptions& options, const LineSink& out, const LineSink& err);
int cmd_benchmark(const CommandOptions& options, const LineSink& out, const LineSink& err);

}  // namespace pipeforge
