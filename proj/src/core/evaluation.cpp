#include "core/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <set>

#include "core/errors.hpp"
#include "core/rng.hpp"

namespace pipeforge {

std::string_view to_string(EvalStatus status) {
  switch (status) {
    case EvalStatus::kOk:
      return "ok";
    case EvalStatus::kInvalidPipeline:
      return "invalid_pipeline";
    case EvalStatus::kRuntimeFailure:
      return "runtime_failure";
  }
  return "runtime_failure";
}

EvalStatus parse_eval_status(std::string_view text) {
  for (EvalStatus s : {EvalStatus::kOk, EvalStatus::kInvalidPipeline, EvalStatus::kRuntimeFailure}) {
    if (to_string(s) == text) return s;
  }
  throw Error(ErrorKind::kParse, "unknown evaluation status '" + std::string(text) + "'");
}

EvaluationResult failed_result(EvalStatus status, std::string message) {
  EvaluationResult r;
  r.status = status;
  r.e = 0.0;
  r.message = std::move(message);
  return r;
}

std::vector<std::vector<std::size_t>> make_folds(const Dataset& dataset, int folds, std::uint64_t seed) {
  const std::size_t n = dataset.rows();
  if (folds < 2 || static_cast<std::size_t>(folds) > n) {
    throw Error(ErrorKind::kInvalidArgument,
                "fold count " + std::to_string(folds) + " invalid for " + std::to_string(n) + " rows");
  }
  const auto k = static_cast<std::size_t>(folds);
  std::vector<std::vector<std::size_t>> groups;
  if (dataset.task.is_classification()) {
    groups.resize(dataset.class_count());
    for (std::size_t r = 0; r < n; ++r) groups[static_cast<std::size_t>(dataset.target[r])].push_back(r);
  } else {
    groups.emplace_back(n);
    std::iota(groups[0].begin(), groups[0].end(), 0);
  }
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> out(k);
  std::size_t dealt = 0;
  for (auto& group : groups) {
    rng.shuffle(std::span<std::size_t>(group));
    for (std::size_t r : group) out[dealt++ % k].push_back(r);
  }
  for (auto& fold : out) std::sort(fold.begin(), fold.end());
  return out;
}

double accuracy(std::span<const double> truth, std::span<const double> predicted) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += truth[i] == predicted[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

double f1_macro(std::span<const double> truth, std::span<const double> predicted) {
  std::set<double> labels(truth.begin(), truth.end());
  labels.insert(predicted.begin(), predicted.end());
  double total = 0.0;
  for (double label : labels) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const bool t = truth[i] == label, p = predicted[i] == label;
      tp += t && p;
      fp += !t && p;
      fn += t && !p;
    }
    const std::size_t denom = 2 * tp + fp + fn;
    total += denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  }
  return total / static_cast<double>(labels.size());
}

double r_squared(std::span<const double> truth, std::span<const double> predicted) {
  const double mean = std::accumulate(truth.begin(), truth.end(), 0.0) / static_cast<double>(truth.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ss_res += (truth[i] - predicted[i]) * (truth[i] - predicted[i]);
    ss_tot += (truth[i] - mean) * (truth[i] - mean);
  }
  if (ss_tot <= 0.0) throw NumericError("degenerate-fold", "validation target is constant");
  return 1.0 - ss_res / ss_tot;
}

Matrix FittedPipeline::transform(const Dataset& dataset, std::span<const std::size_t> rows) const {
  Matrix x = encoder.apply(dataset, rows);
  for (const auto& stage : stages) x = stage->apply(x);
  return x;
}

std::vector<double> FittedPipeline::predict(const Dataset& dataset, std::span<const std::size_t> rows) const {
  return estimator->predict(transform(dataset, rows));
}

std::string pipeline_problem(std::span<const PrimitiveSpec> pipeline, TaskKind task) {
  if (pipeline.empty()) return "empty pipeline";
  if (pipeline.back().category != Category::kEstimate) return "pipeline does not end with an estimator";
  for (std::size_t i = 0; i < pipeline.size(); ++i) {
    if (i > 0 && pipeline[i].category < pipeline[i - 1].category) {
      return "category decreases at position " + std::to_string(i);
    }
    if (pipeline[i].category == Category::kEstimate && i + 1 != pipeline.size()) {
      return "estimator '" + pipeline[i].id + "' is not last";
    }
    if (!pipeline[i].supports(task)) {
      return "primitive '" + pipeline[i].id + "' does not support " + std::string(to_string(task));
    }
  }
  return {};
}

FittedPipeline fit_pipeline(std::span<const PrimitiveSpec> pipeline, const Dataset& dataset,
                            std::span<const std::size_t> train_rows, std::uint64_t seed) {
  if (const std::string problem = pipeline_problem(pipeline, dataset.task.kind); !problem.empty()) {
    throw Error(ErrorKind::kInvalidArgument, problem);
  }
  FittedPipeline fitted;
  std::vector<double> y(train_rows.size());
  for (std::size_t i = 0; i < train_rows.size(); ++i) y[i] = dataset.target[train_rows[i]];
  fitted.encoder.fit(dataset, train_rows);
  Matrix x = fitted.encoder.apply(dataset, train_rows);
  for (std::size_t i = 0; i + 1 < pipeline.size(); ++i) {
    auto stage = make_transformer(pipeline[i]);
    if (!stage) throw Error(ErrorKind::kInvalidArgument, "no built-in realization of '" + pipeline[i].id + "'");
    stage->fit(x, y);
    x = stage->apply(x);
    fitted.stages.push_back(std::move(stage));
  }
  EstimatorContext ctx{dataset.task.kind, dataset.class_count(), seed};
  fitted.estimator = make_estimator(pipeline.back(), ctx);
  if (!fitted.estimator) {
    throw Error(ErrorKind::kInvalidArgument, "no built-in realization of '" + pipeline.back().id + "'");
  }
  fitted.estimator->fit(x, y);
  return fitted;
}

EvaluationResult evaluate_pipeline(std::span<const PrimitiveSpec> pipeline, const Dataset& dataset, int folds,
                                   std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  auto finish = [&](EvaluationResult r) {
    r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
  };
  if (const std::string problem = pipeline_problem(pipeline, dataset.task.kind); !problem.empty()) {
    return finish(failed_result(EvalStatus::kInvalidPipeline, problem));
  }
  for (const auto& spec : pipeline) {
    if (!has_builtin(spec.id) ||
        (spec.category == Category::kEstimate && !make_estimator(spec, {dataset.task.kind, 2, 0}))) {
      return finish(failed_result(EvalStatus::kInvalidPipeline, "no built-in realization of '" + spec.id + "'"));
    }
  }
  EvaluationResult result;
  try {
    const auto fold_rows = make_folds(dataset, folds, seed);
    double raw_total = 0.0;
    for (std::size_t f = 0; f < fold_rows.size(); ++f) {
      const auto& valid = fold_rows[f];
      std::vector<std::size_t> train;
      train.reserve(dataset.rows() - valid.size());
      std::size_t v = 0;
      for (std::size_t r = 0; r < dataset.rows(); ++r) {
        if (v < valid.size() && valid[v] == r) {
          ++v;
          continue;
        }
        train.push_back(r);
      }
      const FittedPipeline fitted = fit_pipeline(pipeline, dataset, train, derive_seed(seed, f));
      const std::vector<double> predicted = fitted.predict(dataset, valid);
      std::vector<double> truth(valid.size());
      for (std::size_t i = 0; i < valid.size(); ++i) truth[i] = dataset.target[valid[i]];
      double raw = 0.0;
      switch (dataset.task.metric) {
        case Metric::kAccuracy:
          raw = accuracy(truth, predicted);
          break;
        case Metric::kF1Macro:
          raw = f1_macro(truth, predicted);
          break;
        case Metric::kRSquared:
          raw = r_squared(truth, predicted);
          break;
      }
      if (!std::isfinite(raw)) throw NumericError("metric", "non-finite fold score");
      raw_total += raw;
      result.fold_scores.push_back(std::clamp(raw, 0.0, 1.0));
    }
    result.raw_metric = raw_total / static_cast<double>(fold_rows.size());
    result.e = std::accumulate(result.fold_scores.begin(), result.fold_scores.end(), 0.0) /
               static_cast<double>(result.fold_scores.size());
    result.status = EvalStatus::kOk;
  } catch (const std::exception& e) {
    return finish(failed_result(EvalStatus::kRuntimeFailure, e.what()));
  }
  return finish(std::move(result));
}

EvaluationResult evaluate_pipeline(const Catalog& catalog, std::span<const std::string> ids, const Dataset& dataset,
                                   int folds, std::uint64_t seed) {
  std::vector<PrimitiveSpec> specs;
  for (const auto& id : ids) {
    if (!catalog.contains(id)) return failed_result(EvalStatus::kInvalidPipeline, "unknown primitive '" + id + "'");
    specs.push_back(catalog.at(catalog.ordinal(id)));
  }
  return evaluate_pipeline(specs, dataset, folds, seed);
}

std::vector<PrimitiveSpec> baseline_pipeline() {
  const Catalog& builtin = Catalog::builtin();
  return {builtin.at(builtin.ordinal("mean-imputer")), builtin.at(builtin.ordinal("standard-scaler")),
          builtin.at(builtin.ordinal("sgd-linear"))};
}

EvaluationResult baseline_sgd(const Dataset& dataset, int folds, std::uint64_t seed) {
  return evaluate_pipeline(baseline_pipeline(), dataset, folds, seed);
}

EvaluationResult BuiltinEvaluator::evaluate(const EvaluationRequest& request) {
  if (request.dataset == nullptr) return failed_result(EvalStatus::kRuntimeFailure, "no dataset attached");
  return evaluate_pipeline(request.pipeline, *request.dataset, request.folds, request.seed);
}

namespace {

std::string cache_key(const EvaluationRequest& r) {
  std::string key;
  for (const auto& p : r.pipeline) key += p.id + p.defaults.dump() + ";";
  key += "|" + (r.dataset != nullptr ? r.dataset->hash : std::string("-"));
  key += "|" + task_to_json(r.task).dump();
  key += "|" + std::to_string(r.folds) + "|" + std::to_string(r.seed);
  return key;
}

}  // namespace

EvaluationResult CachedEvaluator::evaluate(const EvaluationRequest& request) {
  const std::string key = cache_key(request);
  {
    std::lock_guard<std::mutex> lock(mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) {
      ++hits_;
      return it->second;
    }
  }
  EvaluationResult result = inner_.evaluate(request);
  std::lock_guard<std::mutex> lock(mutex_);
  return cache_.emplace(key, std::move(result)).first->second;
}

std::size_t CachedEvaluator::misses() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return cache_.size();
}

std::size_t CachedEvaluator::hits() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return hits_;
}

SyntheticEvaluator::SyntheticEvaluator(const Catalog& catalog, std::uint64_t seed) : seed_(seed) {
  Rng rng(seed);
  for (Category c : {Category::kClean, Category::kTransform, Category::kSelect, Category::kEstimate}) {
    std::vector<std::string> members;
    for (const auto& p : catalog.primitives()) {
      if (p.category == c) members.push_back(p.id);
    }
    preferred_.push_back(members.empty() ? std::string() : members[rng.below(members.size())]);
  }
  for (const auto& p : catalog.primitives()) category_[p.id] = p.category;
}

double SyntheticEvaluator::score(std::span<const std::string> ids) const {
  double s = 0.1;
  if (!ids.empty() && ids.back() == preferred_[3]) s += 0.3;
  std::map<Category, int> per_category;
  for (const auto& id : ids) {
    const auto it = category_.find(id);
    if (it != category_.end()) per_category[it->second] += 1;
  }
  for (std::size_t c = 0; c < 3; ++c) {
    if (!preferred_[c].empty() && std::find(ids.begin(), ids.end(), preferred_[c]) != ids.end()) s += 0.15;
  }
  for (const auto& [category, count] : per_category) s -= 0.03 * (count - 1);
  std::string joined;
  for (const auto& id : ids) joined += id + ",";
  const std::uint64_t h = derive_seed(seed_, std::stoull(fnv1a_hex(joined), nullptr, 16));
  s += 0.1 * static_cast<double>(h >> 11) * 0x1.0p-53;
  return std::clamp(s, 0.0, 1.0);
}

EvaluationResult SyntheticEvaluator::evaluate(const EvaluationRequest& request) {
  if (const std::string problem = pipeline_problem(request.pipeline, request.task.kind); !problem.empty()) {
    return failed_result(EvalStatus::kInvalidPipeline, problem);
  }
  std::vector<std::string> ids;
  for (const auto& p : request.pipeline) ids.push_back(p.id);
  EvaluationResult r;
  r.e = score(ids);
  r.raw_metric = r.e;
  r.fold_scores.assign(static_cast<std::size_t>(std::max(request.folds, 1)), r.e);
  return r;
}

std::vector<PrimitiveSpec> specs_for(const Catalog& catalog, std::span<const int> pipeline) {
  std::vector<PrimitiveSpec> out;
  out.reserve(pipeline.size());
  for (int o : pipeline) out.push_back(catalog.at(static_cast<std::size_t>(o)));
  return out;
}

EvaluationResult PipelineReward::evaluate(const Pipeline& pipeline) {
  ++calls_;
  EvaluationRequest request;
  request.pipeline = specs_for(catalog_, pipeline);
  request.dataset = dataset_;
  request.task = task_;
  request.folds = folds_;
  request.seed = seed_;
  try {
    EvaluationResult r = evaluator_.evaluate(request);
    if (!r.ok() || !(r.e >= 0.0 && r.e <= 1.0)) r.e = 0.0;
    return r;
  } catch (const std::exception& e) {
    return failed_result(EvalStatus::kRuntimeFailure, e.what());
  }
}

double PipelineReward::reward(const GameState& committed) { return evaluate(committed.pipeline).e; }

}  // namespace pipeforge
