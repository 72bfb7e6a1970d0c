#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <set>

#include "core/catalog.hpp"
#include "core/dataset.hpp"
#include "core/errors.hpp"
#include "core/evaluation.hpp"
#include "core/primitives.hpp"
#include "core/rng.hpp"
#include "test_support.hpp"

using namespace pipeforge;
using pftest::load_fixture;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error raised");
  return ErrorKind::kInvalidArgument;
}

std::string message_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

const TaskSpec kBinary{TaskKind::kBinaryClassification, "y", Metric::kAccuracy};

std::vector<std::string> header2() { return {"x", "y"}; }

std::vector<std::vector<std::string>> rows_of(std::initializer_list<std::pair<const char*, const char*>> cells) {
  std::vector<std::vector<std::string>> out;
  for (auto [x, y] : cells) out.push_back({x, y});
  return out;
}

std::vector<PrimitiveSpec> specs(std::initializer_list<const char*> ids) {
  const Catalog& c = Catalog::builtin();
  std::vector<PrimitiveSpec> out;
  for (const char* id : ids) out.push_back(c.at(c.ordinal(id)));
  return out;
}

PrimitiveSpec majority() {
  PrimitiveSpec s;
  s.id = "majority-baseline";
  s.category = Category::kEstimate;
  s.task_compat = {TaskKind::kBinaryClassification, TaskKind::kMulticlassClassification, TaskKind::kRegression};
  return s;
}

void check_same(const EvaluationResult& a, const EvaluationResult& b) {
  CHECK(a.e == b.e);
  CHECK(a.raw_metric == b.raw_metric);
  CHECK(a.fold_scores == b.fold_scores);
  CHECK(a.status == b.status);
}

}  // namespace

TEST_CASE("csv parsing") {
  const auto rows = parse_csv("a,b\r\n\"x, y\",\"he said \"\"hi\"\"\"\n1,\n");
  REQUIRE(rows.size() == 3);
  CHECK(rows[1][0] == "x, y");
  CHECK(rows[1][1] == "he said \"hi\"");
  CHECK(rows[2] == std::vector<std::string>{"1", ""});
  CHECK(kind_of([] { parse_csv("a\n\"open"); }) == ErrorKind::kParse);
  for (const char* m : {"", "NA", "NaN", "?"}) CHECK(is_missing_marker(m));
  CHECK_FALSE(is_missing_marker("0"));
}

TEST_CASE("dataset load errors") {
  std::vector<std::vector<std::string>> ten;
  for (int i = 0; i < 10; ++i) ten.push_back({std::to_string(i), i % 2 ? "a" : "b"});

  CHECK_NOTHROW(make_dataset(header2(), ten, kBinary));
  CHECK(kind_of([&] { make_dataset({"x", "z"}, ten, kBinary); }) == ErrorKind::kDataset);

  auto ragged = ten;
  ragged[4].push_back("extra");
  const std::string msg = message_of([&] { make_dataset(header2(), ragged, kBinary); });
  CHECK(msg.find("row 6") != std::string::npos);
  CHECK(kind_of([&] { make_dataset(header2(), ragged, kBinary); }) == ErrorKind::kParse);

  const std::vector<std::vector<std::string>> nine(ten.begin(), ten.begin() + 9);
  CHECK(kind_of([&] { make_dataset(header2(), nine, kBinary); }) == ErrorKind::kDataset);

  auto constant = ten;
  for (auto& r : constant) r[1] = "a";
  CHECK(kind_of([&] { make_dataset(header2(), constant, kBinary); }) == ErrorKind::kDataset);

  CHECK(kind_of([] { load_dataset("/nonexistent.csv", kBinary); }) == ErrorKind::kIo);
  CHECK(kind_of([] { load_task_spec(R"({"kind":"regression","target":"y"})"); }) == ErrorKind::kParse);
}

TEST_CASE("column kinds and the iris fixture") {
  const Dataset iris = load_fixture("iris");
  CHECK(iris.rows() == 150);
  CHECK(iris.class_count() == 3);
  CHECK(iris.features.size() == 4);
  for (const Column& c : iris.features) CHECK(c.kind == ColumnKind::kNumeric);
  CHECK(iris.hash.size() > 0);

  const Dataset credit = load_fixture("credit");
  std::size_t categorical = 0;
  for (const Column& c : credit.features) categorical += c.kind == ColumnKind::kCategorical;
  CHECK(categorical == 2);
}

TEST_CASE("meta-features match the independent statistics script") {
  const std::map<std::string, std::array<double, 16>> expected = {
      {"iris", {5.017279836814924, 4.0, 4.0, 0.0, 0.0, 3.0, 1.584962500721156, 0.3333333333333333, 3.4645000000000006,
                0.9447022382995245, 0.2503955094658882, 0.8715368895195007, 0.7787002061189996, 1.0, 3.6506582412937387,
                0.0}},
      {"credit", {5.707110264748875, 6.0, 4.0, 2.0, 0.028333333333333332, 2.0, 0.9991983542636398, 0.5166666666666667,
                  19.28704628868671, 8.665352701557989, 0.8046743251539056, 2.3599413097934487, 0.16554857642801835,
                  0.6666666666666666, 3.9318256327243257, 0.0}},
      {"linear", {5.303304908059076, 3.0, 3.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.6210001282996667, 1.459074877652703,
                  0.06805676064199014, 0.7651176936612928, 0.37462907007284585, 1.0, 4.214593690373678, 0.0}},
      {"separable", {5.303304908059076, 4.0, 4.0, 0.0, 0.0, 2.0, 1.0, 0.5, 10.13152948925, 4.601034752072623,
                     0.10796860816636915, 0.8037527899096402, 0.5737574800329954, 1.0, 3.9318256327243257, 0.0}},
  };
  for (const auto& [name, values] : expected) {
    const MetaFeatures m = meta_features(load_fixture(name));
    for (std::size_t k = 0; k < 16; ++k) {
      INFO(name << " feature " << k);
      CHECK(std::abs(m[k] - values[k]) <= 1e-9);
    }
  }
  // Balanced binary target: one bit of entropy, majority ratio one half.
  const MetaFeatures sep = meta_features(load_fixture("separable"));
  CHECK(sep[4] == 0.0);
  CHECK(sep[6] == 1.0);
  CHECK(sep[7] == 0.5);
}

TEST_CASE("scaler fallbacks and the standard-scaler reference") {
  Matrix x(3, 2);
  for (std::size_t r = 0; r < 3; ++r) {
    x(r, 0) = double(r + 1);
    x(r, 1) = 4.0;
  }
  const std::vector<double> y = {0, 1, 0};
  auto std_scaler = make_transformer(specs({"standard-scaler"})[0]);
  std_scaler->fit(x, y);
  const Matrix s = std_scaler->apply(x);
  const double ref[] = {-1.224744871391589, 0.0, 1.224744871391589};
  for (std::size_t r = 0; r < 3; ++r) {
    CHECK(std::abs(s(r, 0) - ref[r]) <= 1e-9);
    CHECK(s(r, 1) == 0.0);
  }
  auto minmax = make_transformer(specs({"minmax-scaler"})[0]);
  minmax->fit(x, y);
  const Matrix m = minmax->apply(x);
  for (std::size_t r = 0; r < 3; ++r) CHECK(m(r, 1) == 0.0);
  CHECK(m(0, 0) == 0.0);
  CHECK(m(2, 0) == 1.0);

  auto fresh = make_transformer(specs({"standard-scaler"})[0]);
  CHECK_THROWS_AS(fresh->apply(x), Error);
}

TEST_CASE("imputers and selectors") {
  const double nan = std::nan("");
  Matrix x(4, 3);
  const double cols[3][4] = {{1, nan, 3, 10}, {nan, nan, nan, nan}, {5, 5, 5, 5}};
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t r = 0; r < 4; ++r) x(r, c) = cols[c][r];
  const std::vector<double> y = {0, 1, 0, 1};

  auto mean = make_transformer(specs({"mean-imputer"})[0]);
  mean->fit(x, y);
  const Matrix a = mean->apply(x);
  CHECK(a(1, 0) == doctest::Approx(14.0 / 3.0));
  CHECK(a(0, 1) == 0.0);
  CHECK(mean->warnings().size() == 1);

  auto median = make_transformer(specs({"median-imputer"})[0]);
  median->fit(x, y);
  CHECK(median->apply(x)(1, 0) == 3.0);

  auto constant = make_transformer(specs({"constant-imputer"})[0]);
  constant->fit(x, y);
  CHECK(constant->apply(x)(1, 0) == 0.0);

  auto var = make_transformer(specs({"variance-threshold"})[0]);
  Matrix filled = mean->apply(x);
  var->fit(filled, y);
  CHECK(var->apply(filled).cols == 1);
}

TEST_CASE("top-k-target-correlation keeps the most correlated columns") {
  PrimitiveSpec spec = specs({"top-k-target-correlation"})[0];
  spec.defaults["k"] = 1;
  Matrix x(6, 3);
  const std::vector<double> y = {0, 1, 2, 3, 4, 5};
  for (std::size_t r = 0; r < 6; ++r) {
    x(r, 0) = double(r % 2);
    x(r, 1) = -2.0 * y[r] + (r == 3 ? 0.1 : 0.0);
    x(r, 2) = double((r * 7) % 5);
  }
  auto t = make_transformer(spec);
  t->fit(x, y);
  const Matrix out = t->apply(x);
  REQUIRE(out.cols == 1);
  for (std::size_t r = 0; r < 6; ++r) CHECK(out(r, 0) == x(r, 1));
}

TEST_CASE("fold partition properties") {
  for (const char* name : {"iris", "credit", "linear"}) {
    const Dataset d = load_fixture(name);
    for (int k : {2, 5, 7}) {
      const auto folds = make_folds(d, k, 42);
      REQUIRE(folds.size() == std::size_t(k));
      std::vector<int> seen(d.rows(), 0);
      std::size_t lo = d.rows(), hi = 0;
      for (const auto& f : folds) {
        for (std::size_t r : f) ++seen[r];
        lo = std::min(lo, f.size());
        hi = std::max(hi, f.size());
      }
      CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
      CHECK(hi - lo <= 1);
      if (d.task.kind != TaskKind::kRegression) {
        for (std::size_t cls = 0; cls < d.class_count(); ++cls) {
          const auto total = std::count(d.target.begin(), d.target.end(), double(cls));
          for (const auto& f : folds) {
            const auto in = std::count_if(f.begin(), f.end(), [&](std::size_t r) { return d.target[r] == double(cls); });
            CHECK(std::abs(double(in) - double(total) / k) <= 1.0);
          }
        }
      }
      CHECK(make_folds(d, k, 42) == folds);
    }
    CHECK(make_folds(d, 5, 1) != make_folds(d, 5, 2));
    CHECK_THROWS_AS(make_folds(d, 1, 0), Error);
    CHECK_THROWS_AS(make_folds(d, int(d.rows()) + 1, 0), Error);
  }
}

TEST_CASE("metrics") {
  const std::vector<double> t = {0, 0, 1, 1, 2};
  const std::vector<double> p = {0, 1, 1, 1, 0};
  CHECK(accuracy(t, p) == doctest::Approx(0.6));
  // class 0: tp1 fp1 fn1 -> 0.5; class 1: tp2 fp1 fn0 -> 0.8; class 2: 0
  CHECK(f1_macro(t, p) == doctest::Approx((0.5 + 0.8 + 0.0) / 3.0));
  const std::vector<double> yt = {1, 2, 3, 4};
  const std::vector<double> yp = {1, 2, 3, 5};
  CHECK(r_squared(yt, yp) == doctest::Approx(1.0 - 1.0 / 5.0));
  CHECK(r_squared(yt, yt) == 1.0);
  const std::vector<double> flat = {2, 2, 2};
  CHECK_THROWS_AS(r_squared(flat, flat), NumericError);
}

TEST_CASE("evaluation examples on the fixtures") {
  const Dataset sep = load_fixture("separable");
  const auto maj = evaluate_pipeline(std::vector<PrimitiveSpec>{majority()}, sep, 5, 0);
  REQUIRE(maj.ok());
  CHECK(std::abs(maj.e - 0.5) <= 0.02);
  CHECK(maj.e == doctest::Approx(maj.raw_metric));

  const auto scaled = evaluate_pipeline(specs({"standard-scaler", "sgd-linear"}), sep, 5, 0);
  REQUIRE(scaled.ok());
  CHECK(scaled.e >= 0.95);
  CHECK(scaled.fold_scores.size() == 5);

  CHECK(baseline_sgd(sep, 5, 0).e >= 0.9);
  const Dataset lin = load_fixture("linear");
  CHECK(baseline_sgd(lin, 5, 0).e >= 0.8);

  for (const char* name : {"iris", "credit", "linear", "separable"}) {
    const Dataset d = load_fixture(name);
    check_same(baseline_sgd(d, 5, 9),
               evaluate_pipeline(specs({"mean-imputer", "standard-scaler", "sgd-linear"}), d, 5, 9));
  }

  const auto none = evaluate_pipeline(specs({"standard-scaler"}), sep, 5, 0);
  CHECK(none.status == EvalStatus::kInvalidPipeline);
  CHECK(none.e == 0.0);
  const auto order = evaluate_pipeline(specs({"standard-scaler", "mean-imputer", "sgd-linear"}), sep, 5, 0);
  CHECK(order.status == EvalStatus::kInvalidPipeline);
  const std::vector<std::string> unknown = {"quantum-boost"};
  CHECK(evaluate_pipeline(Catalog::builtin(), unknown, sep, 5, 0).status == EvalStatus::kInvalidPipeline);
  const auto reg_nb = evaluate_pipeline(specs({"gaussian-nb"}), lin, 5, 0);
  CHECK(reg_nb.status == EvalStatus::kInvalidPipeline);
}

TEST_CASE("gaussian-nb on a one-class training fold is a runtime failure") {
  std::vector<std::vector<std::string>> rows;
  for (int i = 0; i < 12; ++i) rows.push_back({std::to_string(i * 0.5), i == 3 ? "b" : "a"});
  const Dataset d = make_dataset(header2(), rows, kBinary);
  const auto r = evaluate_pipeline(specs({"gaussian-nb"}), d, 5, 0);
  CHECK(r.status == EvalStatus::kRuntimeFailure);
  CHECK(r.e == 0.0);
}

TEST_CASE("all results lie in [0, 1] and repeat exactly") {
  const Catalog& c = Catalog::builtin();
  const std::vector<std::vector<const char*>> pipes = {
      {"sgd-linear"},
      {"gaussian-nb"},
      {"median-imputer", "minmax-scaler", "top-k-target-correlation", "gaussian-nb"},
      {"constant-imputer", "identity-transform", "variance-threshold", "sgd-linear"},
  };
  for (const char* name : {"iris", "credit", "linear", "separable"}) {
    const Dataset d = load_fixture(name);
    for (const auto& ids : pipes) {
      std::vector<PrimitiveSpec> ps;
      for (const char* id : ids) ps.push_back(c.at(c.ordinal(id)));
      const auto a = evaluate_pipeline(ps, d, 5, 3);
      const auto b = evaluate_pipeline(ps, d, 5, 3);
      check_same(a, b);
      CHECK(a.e >= 0.0);
      CHECK(a.e <= 1.0);
      if (!a.ok()) CHECK(a.e == 0.0);
      for (double f : a.fold_scores) {
        CHECK(f >= 0.0);
        CHECK(f <= 1.0);
      }
    }
  }
}

TEST_CASE("leakage guard: poisoning validation rows leaves fitted parameters unchanged") {
  const Catalog& c = Catalog::builtin();
  for (const char* name : {"credit", "iris", "linear"}) {
    const Dataset clean = load_fixture(name);
    const auto folds = make_folds(clean, 5, 11);
    const auto& validation = folds[1];
    std::vector<std::size_t> train;
    for (std::size_t f = 0; f < folds.size(); ++f)
      if (f != 1) train.insert(train.end(), folds[f].begin(), folds[f].end());
    std::sort(train.begin(), train.end());

    Dataset poisoned = clean;
    Rng rng(5);
    for (std::size_t r : validation) {
      for (Column& col : poisoned.features) {
        if (col.kind == ColumnKind::kNumeric) {
          col.numeric[r] = rng.uniform(-20.0, 20.0);
          col.missing[r] = 0;
        } else {
          col.text[r] = "poison-" + std::to_string(rng.below(5));
          col.missing[r] = 0;
        }
      }
      poisoned.target[r] = clean.task.kind == TaskKind::kRegression ? rng.uniform(-20.0, 20.0)
                                                                    : double(rng.below(clean.class_count()));
    }

    for (std::size_t est = 0; est < c.size(); ++est) {
      if (c.at(est).category != Category::kEstimate || !c.at(est).supports(clean.task.kind)) continue;
      for (std::size_t stage = 0; stage < c.size(); ++stage) {
        if (c.at(stage).category == Category::kEstimate) continue;
        std::vector<PrimitiveSpec> ps = {c.at(stage), c.at(est)};
        if (c.at(stage).category != Category::kClean) ps.insert(ps.begin(), c.at(c.ordinal("mean-imputer")));
        const auto a = fit_pipeline(ps, clean, train, 4);
        const auto b = fit_pipeline(ps, poisoned, train, 4);
        INFO(name << ": " << c.at(stage).id << " -> " << c.at(est).id);
        CHECK(a.encoder.vocabularies() == b.encoder.vocabularies());
        for (std::size_t k = 0; k < a.stages.size(); ++k)
          CHECK(a.stages[k]->fitted_params() == b.stages[k]->fitted_params());
        // Control: the poison is visible once validation rows join the fit.
        std::vector<std::size_t> all(clean.rows());
        std::iota(all.begin(), all.end(), std::size_t{0});
        CHECK(fit_pipeline(ps, clean, all, 4).estimator->fitted_params() !=
              fit_pipeline(ps, poisoned, all, 4).estimator->fitted_params());
        CHECK(a.estimator->fitted_params() == b.estimator->fitted_params());
      }
    }
  }
}

TEST_CASE("cache is transparent") {
  const Dataset iris = load_fixture("iris");
  BuiltinEvaluator builtin;
  CachedEvaluator cached(builtin);
  EvaluationRequest req{specs({"mean-imputer", "gaussian-nb"}), &iris, iris.task, 5, 8};
  const auto direct = builtin.evaluate(req);
  check_same(cached.evaluate(req), direct);
  check_same(cached.evaluate(req), direct);
  CHECK(cached.misses() == 1);
  CHECK(cached.hits() == 1);
  req.seed = 9;
  cached.evaluate(req);
  CHECK(cached.misses() == 2);
  req.pipeline[1].defaults["var_floor"] = 1e-6;
  cached.evaluate(req);
  CHECK(cached.misses() == 3);
}

TEST_CASE("synthetic evaluator") {
  const Catalog& c = Catalog::builtin();
  SyntheticEvaluator a(c, 3), b(c, 3);
  CHECK(a.preferred() == b.preferred());
  REQUIRE(a.preferred().size() == 4);
  const std::vector<std::string> best = a.preferred();
  const std::vector<std::string> only_est = {best[3]};
  CHECK(a.score(best) > a.score(only_est));
  for (const auto& ids : {best, only_est}) {
    CHECK(a.score(ids) == b.score(ids));
    CHECK(a.score(ids) >= 0.0);
    CHECK(a.score(ids) <= 1.0);
  }
  EvaluationRequest req;
  req.task = kBinary;
  req.pipeline = specs({"standard-scaler"});
  CHECK(a.evaluate(req).status == EvalStatus::kInvalidPipeline);
  req.pipeline = specs({"sgd-linear"});
  const auto r = a.evaluate(req);
  CHECK(r.ok());
  CHECK(r.e == a.score(std::vector<std::string>{"sgd-linear"}));
}

TEST_CASE("pipeline reward zeroes failures") {
  const Catalog& c = Catalog::builtin();
  const Dataset sep = load_fixture("separable");
  BuiltinEvaluator builtin;
  PipelineReward reward(c, builtin, &sep, sep.task, 5, 0);
  GameState s = initial_state(meta_features(sep), sep.task.kind);
  s.pipeline = {c.ordinal("standard-scaler"), c.ordinal("sgd-linear")};
  s.committed = true;
  CHECK(reward.reward(s) >= 0.95);
  CHECK(reward.calls() == 1);
  CHECK(reward.evaluate(Pipeline{static_cast<int>(c.ordinal("standard-scaler"))}).e == 0.0);
}
