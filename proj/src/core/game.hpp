#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "core/catalog.hpp"
#include "core/task.hpp"

namespace pipeforge {

inline constexpr std::size_t kMetaFeatureCount = 16;
inline constexpr int kDefaultMaxMoves = 12;

// Dataset summary statistics, in this fixed order:
//   0 log1p(rows)            1 feature columns         2 numeric columns
//   3 categorical columns    4 missing ratio           5 class count
//   6 class entropy (bits)   7 majority class ratio    8 mean of column means
//   9 mean of column stds   10 mean |skewness|        11 mean |excess kurtosis|
//  12 mean |corr(target)|   13 numeric column ratio   14 log1p(rows / columns)
//  15 constant column ratio
using MetaFeatures = std::array<double, kMetaFeatureCount>;

// Limits shared by every state of one game.
struct GameRules {
  int max_length = kDefaultMaxLength;
  int max_moves = kDefaultMaxMoves;
};

struct GameState {
  MetaFeatures meta{};
  TaskKind task = TaskKind::kBinaryClassification;
  Pipeline pipeline;
  int move_count = 0;
  bool committed = false;

  bool operator==(const GameState&) const = default;
};

GameState initial_state(const MetaFeatures& meta, TaskKind task);

struct EditAction {
  enum class Kind : std::uint8_t { kInsert, kDelete, kReplace, kCommit };
  Kind kind = Kind::kCommit;
  int position = 0;
  int primitive = 0;  // ordinal; unused for delete/commit

  static EditAction insert(int position, int primitive) { return {Kind::kInsert, position, primitive}; }
  static EditAction remove(int position) { return {Kind::kDelete, position, 0}; }
  static EditAction replace(int position, int primitive) { return {Kind::kReplace, position, primitive}; }
  static EditAction commit() { return {Kind::kCommit, 0, 0}; }

  bool operator==(const EditAction&) const = default;
};

// Bijection between EditActions and the fixed index range [0, size()).
// Layout: inserts (slot-major), deletes, replaces (slot-major), commit.
class ActionCodec {
 public:
  ActionCodec(std::size_t catalog_size, int max_length);

  std::size_t size() const { return size_; }
  std::size_t encode(const EditAction& action) const;
  EditAction decode(std::size_t index) const;
  std::size_t commit_index() const { return size_ - 1; }

 private:
  std::size_t n_;
  std::size_t slots_;
  std::size_t size_;
};

std::size_t action_space_size(std::size_t catalog_size, int max_length);

// Numeric state: 16 meta entries, task one-hot (3), then max_length slots of
// primitive ordinals with catalog.size() marking an empty slot.
using StateVector = std::vector<double>;
inline constexpr std::size_t kContextWidth = kMetaFeatureCount + kTaskKindCount;

StateVector encode_state(const GameState& state, const Catalog& catalog, const GameRules& rules);

bool is_terminal(const GameState& state, const GameRules& rules);

// Mask over the whole action space; 1 marks a legal action. Throws
// Error(kTerminalState) on terminal input.
std::vector<std::uint8_t> legal_actions(const GameState& state, const Catalog& catalog,
                                        const GameRules& rules);

// Returns the successor; the input is untouched. Illegal actions throw
// IllegalActionError naming the violated rule.
GameState apply_action(const GameState& state, const EditAction& action, const Catalog& catalog,
                       const GameRules& rules);

// Folds apply_action over the trace. Throws ReplayError carrying the index
// of the first action that cannot be applied.
GameState replay_trace(const GameState& initial, std::span<const EditAction> actions,
                       const Catalog& catalog, const GameRules& rules);

std::string describe(const EditAction& action, const Catalog& catalog);

}  // namespace pipeforge
