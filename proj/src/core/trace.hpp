#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "core/catalog.hpp"
#include "core/game.hpp"
#include "core/task.hpp"

namespace pipeforge {

enum class GameStatus { kOk, kFailedPipeline, kBudgetExhausted };

std::string_view to_string(GameStatus status);
GameStatus parse_game_status(std::string_view text);

struct MoveRecord {
  int move = 0;
  StateVector state_vec;
  std::vector<std::size_t> legal;  // legal action indices, ascending
  std::vector<double> pi;          // aligned with `legal`
  std::size_t action = 0;
};

// One recorded game. The catalog document, rules and meta-features travel
// with the trace so it can be replayed without any other file.
struct GameTrace {
  std::string dataset;
  TaskSpec task;
  MetaFeatures meta{};
  GameRules rules;
  nlohmann::json catalog;
  std::string catalog_hash;

  std::vector<MoveRecord> moves;
  std::vector<std::string> final_pipeline;
  double evaluation = 0.0;
  GameStatus status = GameStatus::kOk;

  GameState initial() const { return initial_state(meta, task.kind); }
  std::vector<EditAction> actions(const Catalog& catalog) const;
};

// JSON-lines: one object per move, then the final record.
std::string trace_to_jsonl(const GameTrace& trace);
GameTrace trace_from_jsonl(const std::string& text);
void write_trace(const GameTrace& trace, const std::string& path);
GameTrace read_trace(const std::string& path);

struct ReplayCheck {
  bool ok = true;
  int failed_move = -1;  // the move number that diverged; moves.size() for the final record
  std::string reason;
};

// Re-plays the recorded actions from the initial state and compares every
// recorded state vector, legal set and the final pipeline.
ReplayCheck check_replay(const GameTrace& trace);

// Prints the move narrative and ends with the replay verdict line.
ReplayCheck explain(const GameTrace& trace, std::ostream& out);

}  // namespace pipeforge
