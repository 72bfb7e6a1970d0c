#include <doctest.h>

#include <algorithm>
#include <array>
#include <map>
#include <set>

#include "core/catalog.hpp"
#include "core/errors.hpp"
#include "core/game.hpp"
#include "core/rng.hpp"
#include "core/task.hpp"
#include "grammar_oracle.hpp"
#include "test_support.hpp"

using namespace pipeforge;
using pftest::kOracle;
using pftest::oracle_legal;
using pftest::oracle_valid;

TEST_CASE("bundled catalog ordinals and hash") {
  const Catalog& c = Catalog::builtin();
  REQUIRE(c.size() == kOracle.size());
  for (std::size_t i = 0; i < kOracle.size(); ++i) {
    CHECK(c.at(i).id == kOracle[i].id);
    CHECK(static_cast<int>(c.at(i).category) == kOracle[i].category);
    CHECK(c.ordinal(kOracle[i].id) == i);
  }
  CHECK(c.hash().size() == 16);
  CHECK(Catalog::from_json(c.document()).hash() == c.hash());
  CHECK_THROWS_AS(c.ordinal("no-such-thing"), UnknownPrimitiveError);
}

TEST_CASE("catalog load errors name the offending primitive") {
  auto load_error = [](const char* text) -> std::string {
    try {
      Catalog::from_text(text);
    } catch (const CatalogError& e) {
      return e.offending_id();
    }
    return "<no error>";
  };
  CHECK(load_error(R"([{"id":"a","category":"estimate","tasks":["regression"]},
                       {"id":"a","category":"clean","tasks":["regression"]}])") == "a");
  CHECK(load_error(R"([{"id":"x","category":"polish","tasks":["regression"]}])") == "x");
  CHECK(load_error(R"([{"id":"c","category":"clean","tasks":["regression"]}])") == "c");
  CHECK(load_error(R"([{"id":"e","category":"estimate","tasks":[]}])") == "e");
  CHECK(load_error(R"([{"id":"e","category":"estimate","tasks":["regression"]},
                       {"id":"s","category":"transform","tasks":["binary_classification"]}])") == "s");
  CHECK_THROWS_AS(Catalog::from_text("{not json"), Error);
  CHECK_THROWS_AS(Catalog::from_file("/nonexistent/catalog.json"), Error);
}

TEST_CASE("validate_pipeline verdicts") {
  const Catalog& c = Catalog::builtin();
  auto ok = [&](std::vector<std::string> ids, int L = 8) { return validate_pipeline(c, ids, L).ok(); };
  CHECK(ok({}));
  CHECK(ok({"mean-imputer", "standard-scaler", "sgd-linear"}));
  CHECK(ok({"mean-imputer", "median-imputer"}));
  CHECK_FALSE(ok({"standard-scaler", "mean-imputer"}));
  CHECK_FALSE(ok({"sgd-linear", "gaussian-nb"}));
  CHECK_FALSE(ok({"sgd-linear", "mean-imputer"}));
  CHECK_FALSE(ok({"mean-imputer", "mean-imputer", "sgd-linear"}, 2));
  const TaskKind reg = TaskKind::kRegression;
  const std::vector<std::string> nb = {"gaussian-nb"};
  CHECK_FALSE(validate_pipeline(c, nb, 8, &reg).ok());
  CHECK(validate_pipeline(c, nb).ok());
  const std::vector<int> bad = {42};
  CHECK_THROWS_AS(validate_pipeline(c, std::span<const int>(bad)), UnknownPrimitiveError);
}

TEST_CASE("validate_pipeline matches the enumerator for every sequence up to length 3") {
  const Catalog& c = Catalog::builtin();
  std::size_t sequences = 0, valid = 0;
  for (TaskKind task : kAllTaskKinds) {
    for (int len = 0; len <= 4; ++len) {
      std::vector<int> p(static_cast<std::size_t>(len), 0);
      while (true) {
        const bool expect = oracle_valid(p, 3, task);
        CHECK(validate_pipeline(c, std::span<const int>(p), 3, &task).ok() == expect);
        ++sequences;
        valid += expect;
        int k = len - 1;
        while (k >= 0 && p[static_cast<std::size_t>(k)] == 9) p[static_cast<std::size_t>(k--)] = 0;
        if (k < 0) break;
        ++p[static_cast<std::size_t>(k)];
      }
    }
  }
  // 3 task kinds x (1 + 10 + 100 + 1000 + 10000) sequences.
  CHECK(sequences == 33333);
  MESSAGE("valid sequences: " << valid);
}

TEST_CASE("action space size and codec bijection") {
  CHECK(action_space_size(10, 8) == 169);
  CHECK(action_space_size(1, 1) == 4);
  for (auto [n, L] : {std::pair<std::size_t, int>{10, 8}, {1, 1}, {3, 2}}) {
    const ActionCodec codec(n, L);
    std::set<std::size_t> seen;
    for (std::size_t a = 0; a < codec.size(); ++a) {
      CHECK(codec.encode(codec.decode(a)) == a);
      seen.insert(a);
    }
    CHECK(seen.size() == codec.size());
    CHECK(codec.decode(codec.commit_index()).kind == EditAction::Kind::kCommit);
  }
}

TEST_CASE("encode_state layout") {
  const Catalog& c = Catalog::builtin();
  const GameRules rules;
  GameState s = initial_state({}, TaskKind::kBinaryClassification);
  StateVector expected(16, 0.0);
  expected.insert(expected.end(), {1.0, 0.0, 0.0});
  expected.insert(expected.end(), 8, 10.0);
  CHECK(encode_state(s, c, rules) == expected);

  s.pipeline = {0, 8};
  const StateVector v = encode_state(s, c, rules);
  const std::vector<double> slots(v.begin() + 19, v.end());
  CHECK(slots == std::vector<double>{0, 8, 10, 10, 10, 10, 10, 10});
}

TEST_CASE("encode_state is injective over random valid pipelines") {
  const Catalog& c = Catalog::builtin();
  const GameRules rules;
  Rng rng(7);
  std::map<StateVector, std::pair<TaskKind, Pipeline>> seen;
  int drawn = 0;
  while (drawn < 10000) {
    const auto task = kAllTaskKinds[rng.below(3)];
    Pipeline p;
    const auto len = static_cast<int>(rng.below(9));
    for (int i = 0; i < len; ++i) p.push_back(static_cast<int>(rng.below(10)));
    std::stable_sort(p.begin(), p.end(), [](int a, int b) { return kOracle[a].category < kOracle[b].category; });
    if (!oracle_valid(p, 8, task)) continue;
    ++drawn;
    GameState s = initial_state({}, task);
    s.pipeline = p;
    auto [it, inserted] = seen.emplace(encode_state(s, c, rules), std::make_pair(task, p));
    if (!inserted) CHECK(it->second == std::make_pair(task, p));
  }
}

TEST_CASE("legal_actions examples") {
  const Catalog& c = Catalog::builtin();
  const GameRules rules;
  const ActionCodec codec(c.size(), rules.max_length);
  GameState s = initial_state({}, TaskKind::kRegression);
  auto mask = legal_actions(s, c, rules);
  for (std::size_t a = 0; a < codec.size(); ++a) {
    const EditAction act = codec.decode(a);
    const bool expect = act.kind == EditAction::Kind::kInsert && act.position == 0 && act.primitive != 9;
    CHECK(static_cast<bool>(mask[a]) == expect);
  }

  s = initial_state({}, TaskKind::kBinaryClassification);
  s.pipeline = {3, 8};
  mask = legal_actions(s, c, rules);
  CHECK(mask[codec.commit_index()] == 1);
  CHECK(mask[codec.encode(EditAction::insert(0, 0))] == 1);
  CHECK(mask[codec.encode(EditAction::insert(2, 0))] == 0);

  s.pipeline = {0, 0, 0, 0, 0, 0, 0, 8};
  mask = legal_actions(s, c, rules);
  for (int pos = 0; pos < rules.max_length; ++pos) {
    for (int prim = 0; prim < 10; ++prim) CHECK(mask[codec.encode(EditAction::insert(pos, prim))] == 0);
  }

  s.committed = true;
  CHECK_THROWS_AS(legal_actions(s, c, rules), Error);
}

TEST_CASE("apply_action transitions and rule names") {
  const Catalog& c = Catalog::builtin();
  const GameRules rules;
  const GameState empty = initial_state({}, TaskKind::kBinaryClassification);
  const GameState one = apply_action(empty, EditAction::insert(0, 0), c, rules);
  CHECK(one.pipeline == Pipeline{0});
  CHECK(one.move_count == 1);
  CHECK(empty.pipeline.empty());

  GameState two = empty;
  two.pipeline = {0, 8};
  const GameState done = apply_action(two, EditAction::commit(), c, rules);
  CHECK(done.committed);
  CHECK(done.pipeline == two.pipeline);

  const GameState cut = apply_action(two, EditAction::remove(1), c, rules);
  CHECK(legal_actions(cut, c, rules)[ActionCodec(c.size(), 8).commit_index()] == 0);

  auto rule_of = [&](const GameState& s, const EditAction& a) -> std::string {
    try {
      apply_action(s, a, c, rules);
    } catch (const IllegalActionError& e) {
      return e.rule();
    }
    return "";
  };
  CHECK(rule_of(two, EditAction::insert(2, 0)) == "grammar");
  CHECK(rule_of(two, EditAction::insert(5, 0)) == "position");
  CHECK(rule_of(two, EditAction::remove(3)) == "position");
  CHECK(rule_of(two, EditAction::replace(0, 0)) == "no-op");
  CHECK(rule_of(one, EditAction::commit()) == "commit");
  CHECK(rule_of(empty, EditAction::insert(0, 77)) == "primitive");
  CHECK(rule_of(done, EditAction::commit()) == "terminal");
  GameState reg = initial_state({}, TaskKind::kRegression);
  CHECK(rule_of(reg, EditAction::insert(0, 9)) == "grammar");
}

TEST_CASE("is_terminal") {
  const GameRules rules;
  GameState s = initial_state({}, TaskKind::kBinaryClassification);
  CHECK_FALSE(is_terminal(s, rules));
  s.move_count = rules.max_moves;
  CHECK(is_terminal(s, rules));
  s.move_count = 0;
  s.committed = true;
  CHECK(is_terminal(s, rules));
}

TEST_CASE("replay_trace") {
  const Catalog& c = Catalog::builtin();
  const GameRules rules;
  const GameState init = initial_state({}, TaskKind::kBinaryClassification);
  const std::vector<EditAction> trace = {EditAction::insert(0, 8), EditAction::commit()};
  const GameState end = replay_trace(init, trace, c, rules);
  CHECK(end.committed);
  CHECK(end.pipeline == Pipeline{8});
  CHECK(replay_trace(init, {}, c, rules) == init);

  const std::vector<EditAction> bad = {EditAction::insert(0, 3), EditAction::insert(1, 0), EditAction::commit()};
  try {
    replay_trace(init, bad, c, rules);
    FAIL("expected a replay error");
  } catch (const ReplayError& e) {
    CHECK(e.move_index() == 1);
  }
}

TEST_CASE("grammar oracle: legal_actions agrees with brute force at L_max=3") {
  const Catalog& c = Catalog::builtin();
  const GameRules rules{3, kDefaultMaxMoves};
  const ActionCodec codec(c.size(), rules.max_length);
  std::size_t states = 0, checks = 0;
  for (TaskKind task : kAllTaskKinds) {
    std::vector<GameState> frontier{initial_state({}, task)};
    for (int depth = 0; depth <= 3; ++depth) {
      std::vector<GameState> next;
      for (const GameState& s : frontier) {
        ++states;
        if (is_terminal(s, rules)) continue;
        const auto mask = legal_actions(s, c, rules);
        bool any = false;
        for (std::size_t a = 0; a < codec.size(); ++a) {
          const bool expect = oracle_legal(s.pipeline, a, rules.max_length, task);
          CHECK(static_cast<bool>(mask[a]) == expect);
          ++checks;
          any |= expect;
          if (mask[a] && depth < 3) {
            const GameState t = apply_action(s, codec.decode(a), c, rules);
            CHECK(validate_pipeline(c, std::span<const int>(t.pipeline), rules.max_length, &task).ok());
            next.push_back(t);
          }
        }
        CHECK(any);
      }
      frontier = std::move(next);
    }
  }
  MESSAGE("states checked: " << states << ", action checks: " << checks);
}

TEST_CASE("every valid committed pipeline is reachable by inserts then commit") {
  const Catalog& c = Catalog::builtin();
  const GameRules rules{3, kDefaultMaxMoves};
  for (TaskKind task : kAllTaskKinds) {
    for (int len = 1; len <= 3; ++len) {
      std::vector<int> p(static_cast<std::size_t>(len), 0);
      while (true) {
        if (oracle_valid(p, 3, task) && kOracle[static_cast<std::size_t>(p.back())].category == 3) {
          std::vector<EditAction> actions;
          for (int i = 0; i < len; ++i) actions.push_back(EditAction::insert(i, p[static_cast<std::size_t>(i)]));
          actions.push_back(EditAction::commit());
          const GameState end = replay_trace(initial_state({}, task), actions, c, rules);
          CHECK(end.pipeline == p);
        }
        int k = len - 1;
        while (k >= 0 && p[static_cast<std::size_t>(k)] == 9) p[static_cast<std::size_t>(k--)] = 0;
        if (k < 0) break;
        ++p[static_cast<std::size_t>(k)];
      }
    }
  }
}

TEST_CASE("task specs") {
  const TaskSpec t = task_from_json(nlohmann::json::parse(R"({"kind":"regression","target":"y","metric":"r_squared"})"));
  CHECK(t.kind == TaskKind::kRegression);
  CHECK(task_from_json(task_to_json(t)).target_column == "y");
  CHECK_THROWS_AS(task_from_json(nlohmann::json::parse(R"({"kind":"regression","target":"y","metric":"accuracy"})")),
                  Error);
  CHECK(metric_compatible(TaskKind::kBinaryClassification, Metric::kF1Macro));
  CHECK_FALSE(metric_compatible(TaskKind::kRegression, Metric::kF1Macro));
}

TEST_CASE("describe renders edit actions") {
  const Catalog& c = Catalog::builtin();
  CHECK(describe(EditAction::insert(1, 3), c) == "insert standard-scaler at 1");
  CHECK(describe(EditAction::remove(0), c) == "delete at 0");
  CHECK(describe(EditAction::replace(0, 8), c) == "replace at 0 with sgd-linear");
  CHECK(describe(EditAction::commit(), c) == "commit");
}
