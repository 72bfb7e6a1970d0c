#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "core/catalog.hpp"
#include "core/game.hpp"
#include "core/mcts.hpp"

namespace pipeforge {

struct NetDims {
  std::size_t primitives = 0;  // catalog size n; the embedding table has n + 1 rows
  std::size_t max_length = 0;
  std::size_t actions = 0;
  std::size_t embed = 16;
  std::size_t hidden = 64;

  std::size_t state_width() const { return kContextWidth + max_length; }
  bool operator==(const NetDims&) const = default;
};

NetDims dims_for(const Catalog& catalog, const GameRules& rules, std::size_t embed = 16, std::size_t hidden = 64);

struct NetHyper {
  double alpha = 1e-4;  // squared L2 on all parameters
  double beta = 1e-4;   // L1 on policy logits
  double learning_rate = 0.01;
};

struct ParamGroup {
  std::string name;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t size() const { return rows * cols; }
};

// All weights live in one flat vector; groups are views into it.
class NetParams {
 public:
  NetParams() = default;
  NetParams(const NetDims& dims, const NetHyper& hyper);

  // Entries uniform in [-scale, scale].
  static NetParams random(const NetDims& dims, const NetHyper& hyper, std::uint64_t seed, double scale = 0.05);

  const NetDims& dims() const { return dims_; }
  const NetHyper& hyper() const { return hyper_; }
  NetHyper& hyper() { return hyper_; }
  const std::vector<ParamGroup>& groups() const { return groups_; }
  const ParamGroup& group(const std::string& name) const;

  std::vector<double>& theta() { return theta_; }
  const std::vector<double>& theta() const { return theta_; }
  std::span<double> view(const ParamGroup& g) { return {theta_.data() + g.offset, g.size()}; }
  std::span<const double> view(const ParamGroup& g) const { return {theta_.data() + g.offset, g.size()}; }

  bool operator==(const NetParams& other) const {
    return dims_ == other.dims_ && theta_ == other.theta_;
  }

 private:
  NetDims dims_;
  NetHyper hyper_;
  std::vector<ParamGroup> groups_;
  std::vector<double> theta_;
};

struct PolicyValueOutput {
  std::vector<double> probs;   // zero exactly on illegal actions
  std::vector<double> logits;  // pre-mask policy logits
  double value = 0.5;
};

PolicyValueOutput forward(const NetParams& params, std::span<const double> state_vec,
                          std::span<const std::uint8_t> legal);

struct TrainingExample {
  StateVector state_vec;
  std::vector<std::uint8_t> legal;
  std::vector<double> pi_target;  // full action space, zero off the legal set
  double e = 0.0;
};

struct LossTerms {
  double cross_entropy = 0.0;  // batch mean
  double value = 0.0;          // batch mean of (v - e)^2
  double l2 = 0.0;             // alpha * ||theta||^2
  double l1 = 0.0;             // beta * batch mean of ||logits||_1
  double total() const { return cross_entropy + value + l2 + l1; }
};

// Throws NumericError naming the first non-finite term.
LossTerms loss(const NetParams& params, std::span<const TrainingExample> batch);

// Analytic gradient of loss(); same layout as params.theta().
std::vector<double> gradient(const NetParams& params, std::span<const TrainingExample> batch,
                             LossTerms* terms = nullptr);

// theta <- theta - learning_rate * grad. Returns the loss before the step.
double train_step(NetParams& params, std::span<const TrainingExample> batch, double learning_rate);

void save_checkpoint(const NetParams& params, const Catalog& catalog, const std::string& path);

struct Checkpoint {
  NetParams params;
  std::string catalog_hash;
  nlohmann::json catalog_document;  // null when the file carries no catalog
};

// When `catalog` is given its hash must match the stored one.
Checkpoint load_checkpoint(const std::string& path, const Catalog* catalog = nullptr);

// Adapts the network to the search's PriorModel interface.
class NetPrior final : public PriorModel {
 public:
  NetPrior(const NetParams& params, const Catalog& catalog, const GameRules& rules)
      : params_(params), catalog_(catalog), rules_(rules) {}
  PolicyValue predict(const GameState& state, std::span<const std::uint8_t> legal) const override;

 private:
  const NetParams& params_;
  const Catalog& catalog_;
  GameRules rules_;
};

}  // namespace pipeforge
