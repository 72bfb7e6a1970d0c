#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "core/catalog.hpp"
#include "core/net.hpp"
#include "core/rng.hpp"
#include "core/selfplay.hpp"

namespace pipeforge {

// Exact uniform sampling over every valid pipeline of length 1..max_length
// whose primitives all support the task.
class PipelineSampler {
 public:
  PipelineSampler(const Catalog& catalog, TaskKind task, int max_length);
  double count() const { return total_; }
  Pipeline sample(Rng& rng) const;

 private:
  // ways_[k][c]: sequences of k non-estimator primitives whose categories
  // are non-decreasing and all >= c.
  double ways(int k, int c) const { return ways_[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)]; }

  std::vector<std::vector<int>> by_category_;  // compatible ordinals; index 3 holds estimators
  std::vector<std::vector<double>> ways_;
  std::vector<double> by_length_;  // valid pipelines per length, index = length
  double total_ = 0.0;
};

struct BenchmarkConfig {
  std::string checkpoint;
  std::vector<DatasetEntry> datasets;
  std::uint64_t seed = 0;
  int repeats = 3;
  int simulations = 100;
  double c_puct = 1.0;
  int folds = kDefaultFolds;
  int max_moves = kDefaultMaxMoves;

  static BenchmarkConfig from_json(const nlohmann::json& doc, const std::string& base_dir = ".");
  static BenchmarkConfig from_file(const std::string& path);
};

struct BenchmarkRow {
  std::string dataset;
  std::vector<double> engine;
  std::vector<double> baseline;
  std::vector<double> random;
  std::vector<std::size_t> evaluations;  // engine's distinct evaluations per repeat; random gets the same
  std::vector<std::size_t> random_evaluations;  // what random search actually spent

  nlohmann::json to_json() const;
};

// Per dataset and repeat: a greedy search game with the network, the SGD
// baseline, and random search with the same number of distinct evaluations.
std::vector<BenchmarkRow> run_benchmark(const BenchmarkConfig& config, const Catalog& catalog,
                                        const NetParams& params, const std::string& external_evaluator = {});

// Best e over `budget` distinct uniformly drawn valid pipelines (fewer if the
// space is smaller).
double random_search(const Catalog& catalog, const GameEnv& env, int max_length, std::size_t budget, Rng& rng);

std::string format_table(const std::vector<BenchmarkRow>& rows);

double mean_of(const std::vector<double>& v);
double std_of(const std::vector<double>& v);  // population

}  // namespace pipeforge
