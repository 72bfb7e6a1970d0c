#pragma once

#include <cstdlib>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "core/catalog.hpp"
#include "core/dataset.hpp"
#include "core/mcts.hpp"

namespace pftest {

inline std::string source_path(const std::string& relative) {
  return std::string(PIPEFORGE_SOURCE_DIR) + "/" + relative;
}

inline std::string fixture(const std::string& name) { return source_path("data/fixtures/" + name); }

inline pipeforge::Dataset load_fixture(const std::string& stem) {
  const auto task = pipeforge::load_task_spec(fixture(stem + ".task.json"));
  return pipeforge::load_dataset(fixture(stem + ".csv"), task);
}

// Fresh per-test scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::path(PIPEFORGE_BINARY_DIR) / "test-scratch" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Rewards from a fixed table; pipelines missing from it score `fallback`.
class TableReward final : public pipeforge::RewardSource {
 public:
  explicit TableReward(std::map<pipeforge::Pipeline, double> table, double fallback = 0.0)
      : table_(std::move(table)), fallback_(fallback) {}
  double reward(const pipeforge::GameState& committed) override {
    ++calls;
    auto it = table_.find(committed.pipeline);
    return it == table_.end() ? fallback_ : it->second;
  }
  int calls = 0;

 private:
  std::map<pipeforge::Pipeline, double> table_;
  double fallback_;
};

class ThrowingReward final : public pipeforge::RewardSource {
 public:
  double reward(const pipeforge::GameState&) override { throw std::runtime_error("backend down"); }
};

// One binary-only estimator, nothing else.
inline pipeforge::Catalog single_estimator_catalog() {
  return pipeforge::Catalog::from_text(
      R"([{"id": "only-est", "category": "estimate", "tasks": ["binary_classification"], "defaults": {}}])");
}

}  // namespace pftest
