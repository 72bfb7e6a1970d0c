#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "core/catalog.hpp"
#include "core/dataset.hpp"
#include "core/mcts.hpp"
#include "core/primitives.hpp"

namespace pipeforge {

inline constexpr int kDefaultFolds = 5;

enum class EvalStatus { kOk, kInvalidPipeline, kRuntimeFailure };

std::string_view to_string(EvalStatus status);
EvalStatus parse_eval_status(std::string_view text);

struct EvaluationResult {
  double e = 0.0;           // normalized score in [0, 1]; 0 unless status is ok
  double raw_metric = 0.0;  // mean task metric over folds
  std::vector<double> fold_scores;  // normalized, one per fold
  EvalStatus status = EvalStatus::kOk;
  double wall_time = 0.0;  // seconds; never part of deterministic outputs
  std::string message;

  bool ok() const { return status == EvalStatus::kOk; }
};

EvaluationResult failed_result(EvalStatus status, std::string message);

// Validation-row index sets, one per fold. Stratified by class for
// classification, plain otherwise; assignment depends only on the seed.
std::vector<std::vector<std::size_t>> make_folds(const Dataset& dataset, int folds, std::uint64_t seed);

double accuracy(std::span<const double> truth, std::span<const double> predicted);
double f1_macro(std::span<const double> truth, std::span<const double> predicted);
double r_squared(std::span<const double> truth, std::span<const double> predicted);

// Stages fitted on one fold's training rows.
struct FittedPipeline {
  FeatureEncoder encoder;
  std::vector<std::unique_ptr<Transformer>> stages;
  std::unique_ptr<Estimator> estimator;

  Matrix transform(const Dataset& dataset, std::span<const std::size_t> rows) const;
  std::vector<double> predict(const Dataset& dataset, std::span<const std::size_t> rows) const;
};

// Throws Error(kInvalidArgument) when the pipeline is structurally invalid
// or names a primitive without a built-in realization.
FittedPipeline fit_pipeline(std::span<const PrimitiveSpec> pipeline, const Dataset& dataset,
                            std::span<const std::size_t> train_rows, std::uint64_t seed);

// Grammar check on specs alone (no catalog needed); empty string when valid.
std::string pipeline_problem(std::span<const PrimitiveSpec> pipeline, TaskKind task);

EvaluationResult evaluate_pipeline(std::span<const PrimitiveSpec> pipeline, const Dataset& dataset, int folds,
                                   std::uint64_t seed);
EvaluationResult evaluate_pipeline(const Catalog& catalog, std::span<const std::string> ids, const Dataset& dataset,
                                   int folds, std::uint64_t seed);

// [mean-imputer, standard-scaler, sgd-linear] with the bundled defaults.
std::vector<PrimitiveSpec> baseline_pipeline();
EvaluationResult baseline_sgd(const Dataset& dataset, int folds, std::uint64_t seed);

struct EvaluationRequest {
  std::vector<PrimitiveSpec> pipeline;
  const Dataset* dataset = nullptr;  // null for synthetic tasks
  TaskSpec task;
  int folds = kDefaultFolds;
  std::uint64_t seed = 0;
};

class PipelineEvaluator {
 public:
  virtual ~PipelineEvaluator() = default;
  virtual EvaluationResult evaluate(const EvaluationRequest& request) = 0;
};

class BuiltinEvaluator final : public PipelineEvaluator {
 public:
  EvaluationResult evaluate(const EvaluationRequest& request) override;
};

// Memoizes by (pipeline ids + defaults, dataset hash, task, folds, seed).
// Safe for concurrent callers.
class CachedEvaluator final : public PipelineEvaluator {
 public:
  explicit CachedEvaluator(PipelineEvaluator& inner) : inner_(inner) {}
  EvaluationResult evaluate(const EvaluationRequest& request) override;
  std::size_t misses() const;
  std::size_t hits() const;

 private:
  PipelineEvaluator& inner_;
  mutable std::mutex mutex_;
  std::map<std::string, EvaluationResult> cache_;
  std::size_t hits_ = 0;
};

// Deterministic reward with learnable structure, for self-play experiments
// that should not depend on real model fitting. A seeded preferred
// primitive per category earns credit; length and a hashed jitter shape the
// rest.
class SyntheticEvaluator final : public PipelineEvaluator {
 public:
  SyntheticEvaluator(const Catalog& catalog, std::uint64_t seed);
  EvaluationResult evaluate(const EvaluationRequest& request) override;
  double score(std::span<const std::string> ids) const;
  const std::vector<std::string>& preferred() const { return preferred_; }

 private:
  std::uint64_t seed_;
  std::vector<std::string> preferred_;  // per category, clean..estimate
  std::map<std::string, Category> category_;
};

// Scores committed game states through a PipelineEvaluator.
class PipelineReward final : public RewardSource {
 public:
  PipelineReward(const Catalog& catalog, PipelineEvaluator& evaluator, const Dataset* dataset, TaskSpec task,
                 int folds, std::uint64_t seed)
      : catalog_(catalog), evaluator_(evaluator), dataset_(dataset), task_(std::move(task)), folds_(folds), seed_(seed) {}

  double reward(const GameState& committed) override;
  EvaluationResult evaluate(const Pipeline& pipeline);
  std::size_t calls() const { return calls_; }

 private:
  const Catalog& catalog_;
  PipelineEvaluator& evaluator_;
  const Dataset* dataset_;
  TaskSpec task_;
  int folds_;
  std::uint64_t seed_;
  std::size_t calls_ = 0;
};

std::vector<PrimitiveSpec> specs_for(const Catalog& catalog, std::span<const int> pipeline);

}  // namespace pipeforge
