#pragma once

#include <array>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace pipeforge {

enum class TaskKind { kBinaryClassification = 0, kMulticlassClassification = 1, kRegression = 2 };
inline constexpr int kTaskKindCount = 3;
inline constexpr std::array<TaskKind, kTaskKindCount> kAllTaskKinds = {
    TaskKind::kBinaryClassification, TaskKind::kMulticlassClassification,
    TaskKind::kRegression};

enum class Metric { kAccuracy, kF1Macro, kRSquared };

struct TaskSpec {
  TaskKind kind = TaskKind::kBinaryClassification;
  std::string target_column;
  Metric metric = Metric::kAccuracy;

  bool is_classification() const { return kind != TaskKind::kRegression; }
  bool operator==(const TaskSpec&) const = default;
};

std::string_view to_string(TaskKind kind);
std::string_view to_string(Metric metric);
TaskKind parse_task_kind(std::string_view text);
Metric parse_metric(std::string_view text);

bool metric_compatible(TaskKind kind, Metric metric);

// {"kind": str, "target": str, "metric": str}; throws Error(kParse) on
// unknown values or an incompatible metric.
TaskSpec task_from_json(const nlohmann::json& doc);
nlohmann::json task_to_json(const TaskSpec& task);

}  // namespace pipeforge
