#include "core/mcts.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "core/errors.hpp"
#include "core/rng.hpp"

namespace pipeforge {

PolicyValue UniformPrior::predict(const GameState& /*state*/, std::span<const std::uint8_t> legal) const {
  PolicyValue out;
  out.probs.assign(legal.size(), 0.0);
  const auto count = std::count(legal.begin(), legal.end(), std::uint8_t{1});
  if (count == 0) throw Error(ErrorKind::kInvalidArgument, "no legal action");
  for (std::size_t a = 0; a < legal.size(); ++a) {
    if (legal[a]) out.probs[a] = 1.0 / static_cast<double>(count);
  }
  out.value = value_;
  return out;
}

void SearchConfig::validate() const {
  if (!(c > 0.0)) throw Error(ErrorKind::kInvalidArgument, "exploration constant c must be positive");
  if (simulations < 1) throw Error(ErrorKind::kInvalidArgument, "simulations must be >= 1");
  if (!(noise_weight >= 0.0 && noise_weight < 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "noise weight must lie in [0, 1)");
  }
  if (root_noise && !(dirichlet_alpha > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "dirichlet alpha must be positive");
  }
}

int SearchNode::total_visits() const { return std::accumulate(visits.begin(), visits.end(), 0); }

void backup(std::span<const PathStep> path, double value) {
  for (const PathStep& step : path) {
    step.node->visits[step.slot] += 1;
    step.node->value_sum[step.slot] += value;
  }
}

Search::Search(const Catalog& catalog, const GameRules& rules, const PriorModel& model, RewardSource& reward,
               SearchConfig config)
    : catalog_(catalog),
      rules_(rules),
      codec_(catalog.size(), rules.max_length),
      model_(model),
      reward_(reward),
      config_(config) {
  config_.validate();
}

void Search::reset(const GameState& root) {
  if (is_terminal(root, rules_)) throw Error(ErrorKind::kTerminalState, "search root is terminal");
  root_state_ = root;
  root_.reset();
  simulations_ = 0;
  reward_memo_.clear();
}

double Search::terminal_reward(const GameState& state) {
  if (!state.committed) return 0.0;  // move budget ran out before a commit
  auto it = reward_memo_.find(state.pipeline);
  if (it != reward_memo_.end()) return it->second;
  double r = 0.0;
  try {
    r = reward_.reward(state);
  } catch (const std::exception&) {
    r = 0.0;
  }
  if (!(r >= 0.0 && r <= 1.0)) r = 0.0;
  reward_memo_.emplace(state.pipeline, r);
  return r;
}

std::unique_ptr<SearchNode> Search::make_node(GameState state) {
  auto node = std::make_unique<SearchNode>();
  node->state = std::move(state);
  if (is_terminal(node->state, rules_)) {
    node->terminal = true;
    node->leaf_value = terminal_reward(node->state);
    return node;
  }
  const auto legal = legal_actions(node->state, catalog_, rules_);
  const PolicyValue pv = model_.predict(node->state, legal);
  if (pv.probs.size() != legal.size()) {
    throw Error(ErrorKind::kShape, "prior model returned " + std::to_string(pv.probs.size()) +
                                       " probabilities for " + std::to_string(legal.size()) + " actions");
  }
  double mass = 0.0;
  for (std::size_t a = 0; a < legal.size(); ++a) {
    if (!legal[a]) continue;
    node->actions.push_back(a);
    node->prior.push_back(std::max(pv.probs[a], 0.0));
    mass += node->prior.back();
  }
  for (double& p : node->prior) {
    p = mass > 0.0 ? p / mass : 1.0 / static_cast<double>(node->actions.size());
  }
  node->leaf_value = std::clamp(pv.value, 0.0, 1.0);
  const std::size_t k = node->actions.size();
  node->visits.assign(k, 0);
  node->value_sum.assign(k, 0.0);
  node->children.resize(k);
  return node;
}

std::size_t Search::select(const SearchNode& node) const {
  const double n_s = static_cast<double>(node.total_visits());
  std::size_t best = 0;
  double best_score = -1.0;
  for (std::size_t i = 0; i < node.actions.size(); ++i) {
    const double u = puct_score(node.q(i), node.prior[i], n_s, node.visits[i], config_.c);
    if (u > best_score) {  // strict: lowest action index wins ties
      best_score = u;
      best = i;
    }
  }
  return best;
}

void Search::simulate() {
  if (!root_) {
    root_ = make_node(root_state_);
    if (config_.root_noise && root_->actions.size() > 1) {
      Rng rng(config_.seed);
      std::gamma_distribution<double> gamma(config_.dirichlet_alpha, 1.0);
      std::vector<double> noise(root_->actions.size());
      double total = 0.0;
      for (double& x : noise) total += (x = gamma(rng));
      for (std::size_t i = 0; i < noise.size(); ++i) {
        const double eta = total > 0.0 ? noise[i] / total : 1.0 / static_cast<double>(noise.size());
        root_->prior[i] = (1.0 - config_.noise_weight) * root_->prior[i] + config_.noise_weight * eta;
      }
    }
    ++simulations_;
    return;
  }

  std::vector<PathStep> path;
  SearchNode* node = root_.get();
  double value = 0.0;
  while (true) {
    if (node->terminal) {
      value = node->leaf_value;
      break;
    }
    const std::size_t slot = select(*node);
    path.push_back({node, slot});
    auto& child = node->children[slot];
    if (!child) {
      child = make_node(apply_action(node->state, codec_.decode(node->actions[slot]), catalog_, rules_));
      value = child->leaf_value;
      break;
    }
    node = child.get();
  }
  backup(path, value);
  ++simulations_;
}

void Search::run() {
  for (int i = 0; i < config_.simulations; ++i) simulate();
}

std::vector<double> Search::policy(double tau) const {
  std::vector<double> pi(codec_.size(), 0.0);
  const SearchNode& r = *root_;
  const bool visited = r.total_visits() > 0;
  std::vector<double> weight(r.actions.size());
  for (std::size_t i = 0; i < r.actions.size(); ++i) {
    weight[i] = visited ? static_cast<double>(r.visits[i]) : r.prior[i];
  }
  if (tau <= 0.0) {
    const auto best = static_cast<std::size_t>(std::max_element(weight.begin(), weight.end()) - weight.begin());
    pi[r.actions[best]] = 1.0;
    return pi;
  }
  double total = 0.0;
  for (double& w : weight) total += (w = std::pow(w, 1.0 / tau));
  for (std::size_t i = 0; i < r.actions.size(); ++i) pi[r.actions[i]] = weight[i] / total;
  return pi;
}

double Search::root_value() const {
  const SearchNode& r = *root_;
  const int n = r.total_visits();
  if (n == 0) return r.leaf_value;
  return std::accumulate(r.value_sum.begin(), r.value_sum.end(), 0.0) / n;
}

std::vector<RankedPipeline> Search::ranked_pipelines() const {
  std::map<Pipeline, std::pair<int, double>> totals;
  std::vector<const SearchNode*> stack{root_.get()};
  const std::size_t commit = codec_.commit_index();
  while (!stack.empty()) {
    const SearchNode* node = stack.back();
    stack.pop_back();
    for (std::size_t i = 0; i < node->actions.size(); ++i) {
      if (node->actions[i] == commit && node->visits[i] > 0) {
        auto& t = totals[node->state.pipeline];
        t.first += node->visits[i];
        t.second += node->value_sum[i];
      }
      if (node->children[i]) stack.push_back(node->children[i].get());
    }
  }
  std::vector<RankedPipeline> out;
  for (const auto& [pipeline, t] : totals) out.push_back({pipeline, t.first, t.second / t.first});
  std::stable_sort(out.begin(), out.end(), [](const RankedPipeline& a, const RankedPipeline& b) {
    if (a.visits != b.visits) return a.visits > b.visits;
    return a.mean_value > b.mean_value;
  });
  return out;
}

SearchResult run_search(const GameState& root, const Catalog& catalog, const GameRules& rules,
                        const PriorModel& model, RewardSource& reward, const SearchConfig& config) {
  Search search(catalog, rules, model, reward, config);
  search.reset(root);
  search.run();
  SearchResult result;
  result.pi = search.policy(config.temperature(root.move_count));
  result.visits.assign(search.action_count(), 0);
  const SearchNode& r = search.root();
  for (std::size_t i = 0; i < r.actions.size(); ++i) result.visits[r.actions[i]] = r.visits[i];
  result.root_value = search.root_value();
  result.evaluations = search.evaluations();
  return result;
}

}  // namespace pipeforge
