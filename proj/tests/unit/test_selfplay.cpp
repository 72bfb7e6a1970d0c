#include <doctest.h>

#include <sstream>

#include "core/catalog.hpp"
#include "core/errors.hpp"
#include "core/evaluation.hpp"
#include "core/net.hpp"
#include "core/selfplay.hpp"
#include "core/trace.hpp"
#include "test_support.hpp"

using namespace pipeforge;
using nlohmann::json;

namespace {

// Every grammatical pipeline scores `e`.
class FixedEvaluator final : public PipelineEvaluator {
 public:
  explicit FixedEvaluator(double e) : e_(e) {}
  EvaluationResult evaluate(const EvaluationRequest& request) override {
    if (!pipeline_problem(request.pipeline, request.task.kind).empty())
      return failed_result(EvalStatus::kInvalidPipeline, "bad");
    EvaluationResult r;
    r.e = e_;
    r.raw_metric = e_;
    return r;
  }

 private:
  double e_;
};

const TaskSpec kBinary{TaskKind::kBinaryClassification, "y", Metric::kAccuracy};

GameEnv env_for(PipelineEvaluator& evaluator) {
  GameEnv env;
  env.name = "synthetic";
  env.task = kBinary;
  env.meta = synthetic_meta(5);
  env.evaluator = &evaluator;
  return env;
}

PlayOptions options(int sims, std::uint64_t seed = 0) {
  PlayOptions o;
  o.search.simulations = sims;
  o.search.seed = seed;
  return o;
}

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.datasets = parse_dataset_entries(json::parse(R"([{"synthetic": {"seed": 1}}, {"synthetic": {"seed": 2}}])"), ".");
  c.seed = 3;
  c.iterations = 3;
  c.games_per_iteration = 4;
  c.train_steps = 20;
  c.batch_size = 8;
  c.simulations = 16;
  c.embed = 4;
  c.hidden = 8;
  c.root_noise = true;
  return c;
}

GameTrace sample_trace(std::uint64_t seed = 11) {
  const Catalog& c = Catalog::builtin();
  SyntheticEvaluator ev(c, 4);
  const GameEnv env = env_for(ev);
  return play_game(UniformPrior(), c, GameRules{}, env, options(40), seed);
}

}  // namespace

TEST_CASE("replay buffer is a bounded FIFO") {
  ReplayBuffer buf(5);
  for (int i = 0; i < 10; ++i) {
    TrainingExample ex;
    ex.e = i;
    buf.push(ex);
  }
  CHECK(buf.size() == 5);
  CHECK(buf.inserted() == 10);
  CHECK(buf.oldest_index() == 5);
  CHECK(buf.at(0).e == 5.0);
  CHECK(buf.at(4).e == 9.0);
  Rng rng(1);
  const auto draw = buf.sample(20, rng);
  CHECK(draw.size() == 20);
  for (const auto& ex : draw) CHECK(ex.e >= 5.0);
  CHECK_THROWS_AS(ReplayBuffer(0), Error);
}

TEST_CASE("single estimator with a length-1 cap plays the forced line") {
  const Catalog c = pftest::single_estimator_catalog();
  FixedEvaluator ev(0.9);
  const GameEnv env = env_for(ev);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    PlayOptions o = options(50);
    o.greedy = true;
    const GameTrace t = play_game(UniformPrior(), c, GameRules{1, kDefaultMaxMoves}, env, o, seed);
    const ActionCodec codec(1, 1);
    REQUIRE(t.moves.size() == 2);
    CHECK(t.moves[0].action == codec.encode(EditAction::insert(0, 0)));
    CHECK(t.moves[1].action == codec.commit_index());
    CHECK(t.final_pipeline == std::vector<std::string>{"only-est"});
    CHECK(t.status == GameStatus::kOk);
    CHECK(t.evaluation == 0.9);
  }
}

TEST_CASE("recorded policies are distributions over the legal set") {
  const GameTrace t = sample_trace();
  REQUIRE(!t.moves.empty());
  for (const MoveRecord& m : t.moves) {
    CHECK(m.pi.size() == m.legal.size());
    double sum = 0.0;
    for (double p : m.pi) {
      CHECK(p >= 0.0);
      sum += p;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::find(m.legal.begin(), m.legal.end(), m.action) != m.legal.end());
  }
  const auto examples = training_examples(t, action_space_size(10, 8));
  REQUIRE(examples.size() == t.moves.size());
  for (const auto& ex : examples) {
    CHECK(ex.e == t.evaluation);
    for (std::size_t a = 0; a < ex.legal.size(); ++a)
      if (!ex.legal[a]) CHECK(ex.pi_target[a] == 0.0);
  }
}

TEST_CASE("a game that never commits is budget exhausted with e = 0") {
  const Catalog& c = Catalog::builtin();
  FixedEvaluator ev(0.9);
  const GameEnv env = env_for(ev);
  const GameTrace t = play_game(UniformPrior(), c, GameRules{8, 1}, env, options(10), 1);
  CHECK(t.moves.size() == 1);
  CHECK(t.status == GameStatus::kBudgetExhausted);
  CHECK(t.evaluation == 0.0);
  CHECK(check_replay(t).ok);
}

TEST_CASE("seeded games repeat byte for byte") {
  CHECK(trace_to_jsonl(sample_trace(21)) == trace_to_jsonl(sample_trace(21)));
  CHECK(trace_to_jsonl(sample_trace(21)) != trace_to_jsonl(sample_trace(22)));
}

TEST_CASE("trace serialization round trip") {
  const GameTrace t = sample_trace();
  const std::string text = trace_to_jsonl(t);
  CHECK(std::count(text.begin(), text.end(), '\n') == static_cast<long>(t.moves.size() + 1));
  const GameTrace back = trace_from_jsonl(text);
  CHECK(trace_to_jsonl(back) == text);
  CHECK(back.catalog_hash == Catalog::builtin().hash());

  const auto dir = pftest::scratch_dir("selfplay-trace");
  write_trace(t, (dir / "t.jsonl").string());
  CHECK(trace_to_jsonl(read_trace((dir / "t.jsonl").string())) == text);

  CHECK_THROWS_AS(trace_from_jsonl(""), Error);
  CHECK_THROWS_AS(trace_from_jsonl(text + text), Error);
  const std::string cut = text.substr(0, text.find('\n') + 1);
  CHECK_THROWS_AS(trace_from_jsonl(cut), Error);
  CHECK_THROWS_AS(read_trace((dir / "absent.jsonl").string()), Error);
}

TEST_CASE("explain narrates and replays") {
  GameTrace t = sample_trace();
  std::ostringstream out;
  CHECK(explain(t, out).ok);
  const std::string text = out.str();
  CHECK(text.find("initial pipeline: []") != std::string::npos);
  CHECK(text.find("move 0: ") != std::string::npos);
  CHECK(text.find("final pipeline: ") != std::string::npos);
  CHECK(text.size() >= 17);
  CHECK(text.substr(text.size() - 17) == "replay check: OK\n");
}

TEST_CASE("tampered traces fail the replay check at the divergent move") {
  const GameTrace base = sample_trace();
  REQUIRE(base.moves.size() >= 3);

  // Out-of-range index: caught at the edited move.
  GameTrace t = base;
  t.moves[1].action = 100000;
  std::ostringstream out;
  const ReplayCheck c = explain(t, out);
  CHECK_FALSE(c.ok);
  CHECK(c.failed_move == 1);
  CHECK(out.str().find("replay check: FAILED at move 1\n") != std::string::npos);

  // A different legal action: the next recorded state no longer matches.
  t = base;
  for (std::size_t a : t.moves[0].legal) {
    if (a != t.moves[0].action) {
      t.moves[0].action = a;
      break;
    }
  }
  const ReplayCheck c2 = check_replay(t);
  CHECK_FALSE(c2.ok);
  CHECK(c2.failed_move == 1);

  t = base;
  t.final_pipeline.push_back("sgd-linear");
  CHECK(check_replay(t).failed_move == static_cast<int>(t.moves.size()));

  t = base;
  t.moves[2].state_vec[0] += 1.0;
  CHECK(check_replay(t).failed_move == 2);
}

TEST_CASE("a trace with no moves prints the initial state only") {
  GameTrace t = sample_trace();
  t.moves.clear();
  t.final_pipeline.clear();
  std::ostringstream out;
  CHECK(explain(t, out).ok);
  CHECK(out.str().find("move ") == std::string::npos);
  CHECK(out.str().find("final pipeline") == std::string::npos);
  CHECK(out.str().find("initial pipeline: []") != std::string::npos);
}

TEST_CASE("experiment config parsing") {
  const json doc = json::parse(R"({"datasets": [{"path": "iris.csv"}], "seed": 4, "iterations": 2,
                                   "root_noise": true})");
  const ExperimentConfig c = ExperimentConfig::from_json(doc, pftest::source_path("data/fixtures"));
  CHECK(c.seed == 4);
  CHECK(c.iterations == 2);
  CHECK(c.root_noise);
  REQUIRE(c.datasets.size() == 1);
  CHECK(c.datasets[0].path == pftest::fixture("iris.csv"));
  CHECK(c.datasets[0].task.kind == TaskKind::kMulticlassClassification);
  CHECK(ExperimentConfig::from_json(c.to_json(), ".").to_json() == c.to_json());

  CHECK_THROWS_AS(ExperimentConfig::from_json(json::parse(R"({"datasets": [], "itterations": 3})")), Error);
  CHECK_THROWS_AS(ExperimentConfig::from_json(json::parse(R"({"datasets": [{"synthetic": {}}], "games_per_iteration": -1})")),
                  Error);
}

TEST_CASE("zero iterations return the initial parameters") {
  ExperimentConfig c = small_config();
  c.iterations = 0;
  const auto r = run_iterations(c, Catalog::builtin());
  CHECK(r.reports.empty());
  CHECK(r.params == initial_params(c, Catalog::builtin()));
}

TEST_CASE("iterations are deterministic and track the best pipeline") {
  const ExperimentConfig c = small_config();
  std::vector<std::string> labels;
  IterationObserver obs;
  obs.on_game = [&](int it, int g, const GameTrace& t) {
    labels.push_back(game_label(it, g));
    CHECK(check_replay(t).ok);
  };
  const auto a = run_iterations(c, Catalog::builtin(), obs);
  const auto b = run_iterations(c, Catalog::builtin());
  CHECK(a.params == b.params);
  REQUIRE(a.reports.size() == 3);
  CHECK(labels.size() == 12);
  CHECK(labels.front() == "iter001-game001");
  double best = 0.0;
  for (std::size_t i = 0; i < a.reports.size(); ++i) {
    CHECK(a.reports[i].to_json() == b.reports[i].to_json());
    CHECK(a.reports[i].iteration == int(i) + 1);
    CHECK(a.reports[i].ok_games + a.reports[i].failed_games + a.reports[i].exhausted_games == 4);
    CHECK(a.reports[i].best_e >= best);
    best = a.reports[i].best_e;
    CHECK(a.reports[i].max_e <= a.reports[i].best_e);
  }
  CHECK_FALSE(a.params == initial_params(c, Catalog::builtin()));
}
