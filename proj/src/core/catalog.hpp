#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "core/task.hpp"

namespace pipeforge {

// Stage order is the grammar: a valid pipeline never steps back to an
// earlier category.
enum class Category { kClean = 0, kTransform = 1, kSelect = 2, kEstimate = 3 };

std::string_view to_string(Category category);

// Upper bound on pipeline slots used unless a caller overrides it.
inline constexpr int kDefaultMaxLength = 8;

struct PrimitiveSpec {
  std::string id;
  Category category = Category::kClean;
  std::set<TaskKind> task_compat;
  // Frozen hyper-parameters; values are numbers or strings.
  nlohmann::json defaults = nlohmann::json::object();

  bool supports(TaskKind kind) const { return task_compat.count(kind) != 0; }
};

class Catalog {
 public:
  // Parses and validates a catalog document (top-level JSON array).
  static Catalog from_json(const nlohmann::json& document);
  static Catalog from_text(std::string_view text);
  static Catalog from_file(const std::string& path);
  // The bundled ten-primitive catalog.
  static const Catalog& builtin();

  std::size_t size() const { return primitives_.size(); }
  const PrimitiveSpec& at(std::size_t ordinal) const { return primitives_.at(ordinal); }
  const std::vector<PrimitiveSpec>& primitives() const { return primitives_; }

  // Throws UnknownPrimitiveError when the id is not part of the catalog.
  std::size_t ordinal(std::string_view id) const;
  bool contains(std::string_view id) const;

  // Canonical form of the document; stable key order.
  const nlohmann::json& document() const { return document_; }
  // 16 hex digits identifying the canonical document. Network shapes and
  // ordinals are tied to it.
  const std::string& hash() const { return hash_; }

 private:
  std::vector<PrimitiveSpec> primitives_;
  std::unordered_map<std::string, std::size_t> index_;
  nlohmann::json document_;
  std::string hash_;
};

// A pipeline as primitive ordinals into a catalog.
using Pipeline = std::vector<int>;

struct PipelineVerdict {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

// Grammar check: categories non-decreasing, at most one estimator and only
// in last position, length <= max_length. When a task is given, every
// primitive must also support it. Ordinals outside the catalog throw
// UnknownPrimitiveError, which is distinct from a grammar violation.
PipelineVerdict validate_pipeline(const Catalog& catalog, std::span<const int> pipeline,
                                  int max_length = kDefaultMaxLength,
                                  const TaskKind* task = nullptr);
PipelineVerdict validate_pipeline(const Catalog& catalog,
                                  std::span<const std::string> pipeline_ids,
                                  int max_length = kDefaultMaxLength,
                                  const TaskKind* task = nullptr);

Pipeline resolve_ids(const Catalog& catalog, std::span<const std::string> ids);
std::vector<std::string> pipeline_ids(const Catalog& catalog, std::span<const int> pipeline);

std::string fnv1a_hex(std::string_view bytes);

}  // namespace pipeforge
