#include "core/task.hpp"

#include "core/errors.hpp"

namespace pipeforge {

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::kBinaryClassification:
      return "binary_classification";
    case TaskKind::kMulticlassClassification:
      return "multiclass_classification";
    case TaskKind::kRegression:
      return "regression";
  }
  return "unknown";
}

std::string_view to_string(Metric metric) {
  switch (metric) {
    case Metric::kAccuracy:
      return "accuracy";
    case Metric::kF1Macro:
      return "f1_macro";
    case Metric::kRSquared:
      return "r_squared";
  }
  return "unknown";
}

TaskKind parse_task_kind(std::string_view text) {
  for (TaskKind kind : kAllTaskKinds) {
    if (to_string(kind) == text) return kind;
  }
  throw Error(ErrorKind::kParse, "unknown task kind '" + std::string(text) + "'");
}

Metric parse_metric(std::string_view text) {
  for (Metric m : {Metric::kAccuracy, Metric::kF1Macro, Metric::kRSquared}) {
    if (to_string(m) == text) return m;
  }
  throw Error(ErrorKind::kParse, "unknown metric '" + std::string(text) + "'");
}

bool metric_compatible(TaskKind kind, Metric metric) {
  if (kind == TaskKind::kRegression) return metric == Metric::kRSquared;
  return metric == Metric::kAccuracy || metric == Metric::kF1Macro;
}

TaskSpec task_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("kind") || !doc.contains("target") ||
      !doc.contains("metric")) {
    throw Error(ErrorKind::kParse, "task spec needs \"kind\", \"target\" and \"metric\"");
  }
  TaskSpec task;
  try {
    task.kind = parse_task_kind(doc.at("kind").get<std::string>());
    task.target_column = doc.at("target").get<std::string>();
    task.metric = parse_metric(doc.at("metric").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("task spec: ") + e.what());
  }
  if (!metric_compatible(task.kind, task.metric)) {
    throw Error(ErrorKind::kParse, "metric " + std::string(to_string(task.metric)) +
                                       " does not fit task kind " +
                                       std::string(to_string(task.kind)));
  }
  return task;
}

nlohmann::json task_to_json(const TaskSpec& task) {
  return {{"kind", to_string(task.kind)},
          {"target", task.target_column},
          {"metric", to_string(task.metric)}};
}

}  // namespace pipeforge
