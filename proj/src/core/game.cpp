#include "core/game.hpp"

#include <optional>

#include "core/errors.hpp"

namespace pipeforge {

GameState initial_state(const MetaFeatures& meta, TaskKind task) {
  GameState s;
  s.meta = meta;
  s.task = task;
  return s;
}

ActionCodec::ActionCodec(std::size_t catalog_size, int max_length)
    : n_(catalog_size), slots_(static_cast<std::size_t>(max_length)) {
  if (catalog_size == 0 || max_length <= 0) {
    throw Error(ErrorKind::kInvalidArgument, "action space needs a non-empty catalog and max_length > 0");
  }
  size_ = slots_ * n_ + slots_ + slots_ * n_ + 1;
}

std::size_t action_space_size(std::size_t catalog_size, int max_length) {
  return ActionCodec(catalog_size, max_length).size();
}

std::size_t ActionCodec::encode(const EditAction& action) const {
  const auto pos = static_cast<std::size_t>(action.position);
  const auto prim = static_cast<std::size_t>(action.primitive);
  const bool needs_prim = action.kind == EditAction::Kind::kInsert ||
                          action.kind == EditAction::Kind::kReplace;
  if (action.kind != EditAction::Kind::kCommit &&
      (action.position < 0 || pos >= slots_ || (needs_prim && (action.primitive < 0 || prim >= n_)))) {
    throw Error(ErrorKind::kInvalidArgument, "edit action outside the action space");
  }
  switch (action.kind) {
    case EditAction::Kind::kInsert:
      return pos * n_ + prim;
    case EditAction::Kind::kDelete:
      return slots_ * n_ + pos;
    case EditAction::Kind::kReplace:
      return slots_ * n_ + slots_ + pos * n_ + prim;
    case EditAction::Kind::kCommit:
      return size_ - 1;
  }
  return size_ - 1;
}

EditAction ActionCodec::decode(std::size_t index) const {
  if (index >= size_) throw Error(ErrorKind::kInvalidArgument, "action index " + std::to_string(index) + " out of range");
  const std::size_t inserts = slots_ * n_;
  if (index < inserts) {
    return EditAction::insert(static_cast<int>(index / n_), static_cast<int>(index % n_));
  }
  index -= inserts;
  if (index < slots_) return EditAction::remove(static_cast<int>(index));
  index -= slots_;
  if (index < slots_ * n_) {
    return EditAction::replace(static_cast<int>(index / n_), static_cast<int>(index % n_));
  }
  return EditAction::commit();
}

StateVector encode_state(const GameState& state, const Catalog& catalog, const GameRules& rules) {
  const auto n = static_cast<double>(catalog.size());
  StateVector v;
  v.reserve(kContextWidth + static_cast<std::size_t>(rules.max_length));
  v.insert(v.end(), state.meta.begin(), state.meta.end());
  for (int k = 0; k < kTaskKindCount; ++k) v.push_back(static_cast<int>(state.task) == k ? 1.0 : 0.0);
  if (static_cast<int>(state.pipeline.size()) > rules.max_length) {
    throw Error(ErrorKind::kInvalidArgument, "pipeline longer than max_length");
  }
  for (int ordinal : state.pipeline) {
    if (ordinal < 0 || static_cast<std::size_t>(ordinal) >= catalog.size()) {
      throw UnknownPrimitiveError("#" + std::to_string(ordinal));
    }
    v.push_back(static_cast<double>(ordinal));
  }
  v.resize(kContextWidth + static_cast<std::size_t>(rules.max_length), n);
  return v;
}

bool is_terminal(const GameState& state, const GameRules& rules) {
  return state.committed || state.move_count >= rules.max_moves;
}

namespace {

struct Violation {
  std::string rule;
  std::string message;
};

// Computes the successor pipeline or the first violated rule.
std::optional<Violation> check(const GameState& state, const EditAction& action, const Catalog& catalog,
                               const GameRules& rules, Pipeline& next) {
  if (is_terminal(state, rules)) return Violation{"terminal", "state is terminal"};
  const int len = static_cast<int>(state.pipeline.size());
  const bool has_prim = action.kind == EditAction::Kind::kInsert || action.kind == EditAction::Kind::kReplace;
  if (has_prim && (action.primitive < 0 || static_cast<std::size_t>(action.primitive) >= catalog.size())) {
    return Violation{"primitive", "primitive ordinal " + std::to_string(action.primitive) + " not in catalog"};
  }
  next = state.pipeline;
  switch (action.kind) {
    case EditAction::Kind::kInsert:
      if (action.position < 0 || action.position > len) {
        return Violation{"position", "insert position " + std::to_string(action.position) + " outside 0.." + std::to_string(len)};
      }
      if (len >= rules.max_length) return Violation{"length", "pipeline already has max_length primitives"};
      next.insert(next.begin() + action.position, action.primitive);
      break;
    case EditAction::Kind::kDelete:
      if (action.position < 0 || action.position >= len) {
        return Violation{"position", "delete position " + std::to_string(action.position) + " outside pipeline"};
      }
      next.erase(next.begin() + action.position);
      break;
    case EditAction::Kind::kReplace:
      if (action.position < 0 || action.position >= len) {
        return Violation{"position", "replace position " + std::to_string(action.position) + " outside pipeline"};
      }
      if (next[static_cast<std::size_t>(action.position)] == action.primitive) {
        return Violation{"no-op", "replacement leaves the pipeline unchanged"};
      }
      next[static_cast<std::size_t>(action.position)] = action.primitive;
      break;
    case EditAction::Kind::kCommit:
      if (len == 0 || catalog.at(static_cast<std::size_t>(next.back())).category != Category::kEstimate) {
        return Violation{"commit", "commit requires a pipeline ending in an estimator"};
      }
      break;
  }
  const PipelineVerdict verdict = validate_pipeline(catalog, next, rules.max_length, &state.task);
  if (!verdict.ok()) return Violation{"grammar", verdict.violations.front()};
  return std::nullopt;
}

}  // namespace

std::vector<std::uint8_t> legal_actions(const GameState& state, const Catalog& catalog, const GameRules& rules) {
  if (is_terminal(state, rules)) throw Error(ErrorKind::kTerminalState, "legal_actions called on a terminal state");
  const ActionCodec codec(catalog.size(), rules.max_length);
  std::vector<std::uint8_t> mask(codec.size(), 0);
  Pipeline scratch;
  for (std::size_t a = 0; a < codec.size(); ++a) {
    mask[a] = check(state, codec.decode(a), catalog, rules, scratch) ? 0 : 1;
  }
  return mask;
}

GameState apply_action(const GameState& state, const EditAction& action, const Catalog& catalog,
                       const GameRules& rules) {
  Pipeline next;
  if (auto v = check(state, action, catalog, rules, next)) {
    throw IllegalActionError(v->rule, "illegal " + describe(action, catalog) + ": " + v->message);
  }
  GameState out = state;
  out.pipeline = std::move(next);
  out.move_count += 1;
  if (action.kind == EditAction::Kind::kCommit) out.committed = true;
  return out;
}

GameState replay_trace(const GameState& initial, std::span<const EditAction> actions, const Catalog& catalog,
                       const GameRules& rules) {
  GameState s = initial;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    try {
      s = apply_action(s, actions[i], catalog, rules);
    } catch (const IllegalActionError& e) {
      throw ReplayError(i, "action " + std::to_string(i) + ": " + e.what());
    }
  }
  return s;
}

std::string describe(const EditAction& action, const Catalog& catalog) {
  auto name = [&](int o) {
    return o >= 0 && static_cast<std::size_t>(o) < catalog.size() ? catalog.at(static_cast<std::size_t>(o)).id
                                                                    : "#" + std::to_string(o);
  };
  switch (action.kind) {
    case EditAction::Kind::kInsert:
      return "insert " + name(action.primitive) + " at " + std::to_string(action.position);
    case EditAction::Kind::kDelete:
      return "delete at " + std::to_string(action.position);
    case EditAction::Kind::kReplace:
      return "replace at " + std::to_string(action.position) + " with " + name(action.primitive);
    case EditAction::Kind::kCommit:
      return "commit";
  }
  return "?";
}

}  // namespace pipeforge
