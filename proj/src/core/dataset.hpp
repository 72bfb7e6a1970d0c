#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "core/game.hpp"
#include "core/task.hpp"

namespace pipeforge {

enum class ColumnKind { kNumeric, kCategorical };

struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::kNumeric;
  std::vector<double> numeric;     // NaN where missing; empty for categorical columns
  std::vector<std::string> text;   // raw values; empty for numeric columns
  std::vector<std::uint8_t> missing;
};

// Immutable after load. Classification targets are stored as class indices
// into `classes` (sorted label order).
struct Dataset {
  std::string name;
  std::string path;
  std::string hash;
  TaskSpec task;
  std::vector<Column> features;
  std::vector<double> target;
  std::vector<std::string> classes;

  std::size_t rows() const { return target.size(); }
  std::size_t class_count() const { return classes.size(); }
};

// "", "NA", "NaN" and "?" mark a missing cell.
bool is_missing_marker(std::string_view cell);

// RFC-4180 parsing: header row, quoted fields, "" escapes, CRLF or LF.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

// Builds a dataset from a header and string rows. Throws Error(kDataset) on
// ragged rows, a missing target column, fewer than 10 rows, or a constant or
// missing target.
Dataset make_dataset(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows,
                     const TaskSpec& task, std::string name = "inline");

Dataset load_dataset(const std::string& path, const TaskSpec& task);

// Reads a task spec from inline JSON text or from a file path.
TaskSpec load_task_spec(const std::string& path_or_json);

MetaFeatures meta_features(const Dataset& dataset);

}  // namespace pipeforge
