#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "core/catalog.hpp"
#include "core/dataset.hpp"
#include "core/evaluation.hpp"
#include "core/game.hpp"
#include "core/mcts.hpp"
#include "core/net.hpp"
#include "core/rng.hpp"
#include "core/trace.hpp"

namespace pipeforge {

// What one game is played against: the task, its meta-features and the
// evaluator that scores committed pipelines.
struct GameEnv {
  std::string name;
  TaskSpec task;
  MetaFeatures meta{};
  const Dataset* dataset = nullptr;  // null for synthetic rewards
  PipelineEvaluator* evaluator = nullptr;
  int folds = kDefaultFolds;
  std::uint64_t eval_seed = 0;  // fold assignment; fixed per experiment
};

struct PlayOptions {
  SearchConfig search;
  bool greedy = false;  // argmax at every move instead of the tau schedule
};

// Plays from the empty pipeline until commit or the move budget. Each move
// records the visit policy at temperature 1 (the training target); the
// action is sampled from it before tau_cutoff and is the argmax after.
GameTrace play_game(const PriorModel& model, const Catalog& catalog, const GameRules& rules, const GameEnv& env,
                    const PlayOptions& options, std::uint64_t seed);

// One example per move, all sharing the game's final e.
std::vector<TrainingExample> training_examples(const GameTrace& trace, std::size_t action_count);

// Bounded FIFO; every pushed example gets the next insertion index.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(TrainingExample example);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t oldest_index() const { return next_index_ - items_.size(); }
  std::size_t inserted() const { return next_index_; }
  const TrainingExample& at(std::size_t i) const { return items_.at(i); }
  // Uniform draws with replacement.
  std::vector<TrainingExample> sample(std::size_t count, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t next_index_ = 0;
  std::deque<TrainingExample> items_;
};

struct DatasetEntry {
  std::string path;  // empty for synthetic entries
  TaskSpec task;
  std::optional<std::uint64_t> synthetic_seed;
  std::string name;
};

// Accepts {"path": csv, "task": obj|path} (task defaults to the sibling
// <stem>.task.json) or {"synthetic": {"seed": s}, "task": obj}.
std::vector<DatasetEntry> parse_dataset_entries(const nlohmann::json& list, const std::string& base_dir);

struct ExperimentConfig {
  std::string catalog_path;  // empty: bundled default catalog
  std::vector<DatasetEntry> datasets;
  std::uint64_t seed = 0;
  int iterations = 10;
  int games_per_iteration = 20;
  int train_steps = 200;
  int batch_size = 32;
  std::size_t buffer_capacity = 4096;
  int simulations = 100;
  double c_puct = 1.0;
  int tau_cutoff = 4;
  bool root_noise = false;
  int folds = kDefaultFolds;
  int max_length = kDefaultMaxLength;
  int max_moves = kDefaultMaxMoves;
  double learning_rate = 0.01;
  double alpha = 1e-4;
  double beta = 1e-4;
  std::size_t embed = 16;
  std::size_t hidden = 64;
  std::string external_evaluator;  // shell command; empty for built-in evaluation

  static ExperimentConfig from_json(const nlohmann::json& doc, const std::string& base_dir = ".");
  static ExperimentConfig from_file(const std::string& path);
  nlohmann::json to_json() const;
  void validate() const;
  GameRules rules() const { return {max_length, max_moves}; }
  SearchConfig search_config() const;
};

// Synthetic environments carry seeded pseudo meta-features so the network
// still sees a distinct context per task.
MetaFeatures synthetic_meta(std::uint64_t seed);

struct IterationReport {
  int iteration = 0;
  int games = 0;
  double mean_e = 0.0;
  double max_e = 0.0;
  double loss_before = 0.0;
  double loss_after = 0.0;
  int ok_games = 0;
  int failed_games = 0;
  int exhausted_games = 0;
  std::size_t buffer_size = 0;
  double best_e = 0.0;
  std::vector<std::string> best_pipeline;
  std::string best_dataset;
  std::string best_trace;  // "iter<i>-game<g>", also the trace file stem
  std::vector<std::size_t> best_actions;

  nlohmann::json to_json() const;
};

std::string game_label(int iteration, int game);

struct IterationObserver {
  std::function<void(int iteration, int game, const GameTrace&)> on_game;
  std::function<void(const IterationReport&)> on_report;
};

struct ExperimentResult {
  NetParams params;
  std::vector<IterationReport> reports;
};

// Owns loaded datasets and evaluators for an experiment.
class Environments {
 public:
  Environments(const ExperimentConfig& config, const Catalog& catalog);
  Environments(const std::vector<DatasetEntry>& entries, const Catalog& catalog, int folds, std::uint64_t eval_seed,
               const std::string& external_evaluator);
  const std::vector<GameEnv>& envs() const { return envs_; }
  // Distinct pipelines actually evaluated, summed over environments.
  std::size_t evaluations() const;

 private:
  std::vector<std::unique_ptr<Dataset>> datasets_;
  std::vector<std::unique_ptr<PipelineEvaluator>> inner_;
  std::vector<std::unique_ptr<CachedEvaluator>> cached_;
  std::vector<GameEnv> envs_;
};

NetParams initial_params(const ExperimentConfig& config, const Catalog& catalog);

ExperimentResult run_iterations(const ExperimentConfig& config, const Catalog& catalog,
                                const IterationObserver& observer = {});

}  // namespace pipeforge
