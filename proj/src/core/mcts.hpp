#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <vector>

#include "core/catalog.hpp"
#include "core/game.hpp"

namespace pipeforge {

// U(s,a) = Q(s,a) + c * P(s,a) * sqrt(N(s)) / (1 + N(s,a))
inline double puct_score(double q, double p, double n_s, double n_sa, double c) {
  return q + c * p * std::sqrt(n_s) / (1.0 + n_sa);
}

struct PolicyValue {
  std::vector<double> probs;  // full action space; zero on illegal actions
  double value = 0.0;         // predicted evaluation in [0, 1]
};

// Supplies priors and a value estimate for non-terminal states.
class PriorModel {
 public:
  virtual ~PriorModel() = default;
  virtual PolicyValue predict(const GameState& state, std::span<const std::uint8_t> legal) const = 0;
};

// Uniform priors over legal actions and a constant value.
class UniformPrior final : public PriorModel {
 public:
  explicit UniformPrior(double value = 0.5) : value_(value) {}
  PolicyValue predict(const GameState& state, std::span<const std::uint8_t> legal) const override;

 private:
  double value_;
};

// The real-world reward of a committed pipeline, in [0, 1].
class RewardSource {
 public:
  virtual ~RewardSource() = default;
  virtual double reward(const GameState& committed) = 0;
};

struct SearchConfig {
  double c = 1.0;
  int simulations = 100;
  // Moves before this index sample with temperature 1, later moves take the
  // most visited action.
  int tau_cutoff = 4;
  bool root_noise = false;
  double dirichlet_alpha = 0.3;
  double noise_weight = 0.25;
  std::uint64_t seed = 0;

  double temperature(int move) const { return move < tau_cutoff ? 1.0 : 0.0; }
  void validate() const;
};

struct SearchNode {
  GameState state;
  bool terminal = false;
  double leaf_value = 0.0;  // network v(s), or the real reward for terminals

  std::vector<std::size_t> actions;  // legal action indices, ascending
  std::vector<double> prior;
  std::vector<int> visits;
  std::vector<double> value_sum;
  std::vector<std::unique_ptr<SearchNode>> children;

  int total_visits() const;
  double q(std::size_t slot) const {
    return visits[slot] == 0 ? 0.0 : value_sum[slot] / visits[slot];
  }
};

struct PathStep {
  SearchNode* node;
  std::size_t slot;  // index into node->actions
};

// Adds one visit of `value` to every edge on the path. Single-player game,
// so the value is never negated.
void backup(std::span<const PathStep> path, double value);

struct RankedPipeline {
  Pipeline pipeline;
  int visits = 0;
  double mean_value = 0.0;
};

// One search tree, keyed by edit path (no transpositions). The first
// simulation expands the root, each later one expands exactly one new node
// or re-scores a terminal.
class Search {
 public:
  Search(const Catalog& catalog, const GameRules& rules, const PriorModel& model, RewardSource& reward,
         SearchConfig config);

  void reset(const GameState& root);
  void simulate();
  void run();  // config.simulations simulations from the current root

  const SearchNode& root() const { return *root_; }
  int simulations_run() const { return simulations_; }
  std::size_t action_count() const { return codec_.size(); }
  // Distinct committed pipelines scored by the reward source.
  std::size_t evaluations() const { return reward_memo_.size(); }

  // Visit-count policy over the full action space. tau == 0 picks the most
  // visited action, lowest index on ties.
  std::vector<double> policy(double tau) const;
  double root_value() const;
  // Committed pipelines seen in the tree, most visited first.
  std::vector<RankedPipeline> ranked_pipelines() const;

 private:
  std::unique_ptr<SearchNode> make_node(GameState state);
  double terminal_reward(const GameState& state);
  std::size_t select(const SearchNode& node) const;

  const Catalog& catalog_;
  GameRules rules_;
  ActionCodec codec_;
  const PriorModel& model_;
  RewardSource& reward_;
  SearchConfig config_;
  GameState root_state_;
  std::unique_ptr<SearchNode> root_;
  int simulations_ = 0;
  std::map<Pipeline, double> reward_memo_;
};

struct SearchResult {
  std::vector<double> pi;  // full action space
  std::vector<int> visits;
  double root_value = 0.0;
  std::size_t evaluations = 0;
};

// Runs config.simulations simulations from a non-terminal root; pi uses
// the temperature for the root's move number.
SearchResult run_search(const GameState& root, const Catalog& catalog, const GameRules& rules,
                        const PriorModel& model, RewardSource& reward, const SearchConfig& config);

}  // namespace pipeforge
