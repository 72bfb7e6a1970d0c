#include "core/catalog.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "core/errors.hpp"

namespace pipeforge {
namespace detail {
extern const char* const kDefaultCatalogJson;
}  // namespace detail

std::string_view to_string(Category category) {
  switch (category) {
    case Category::kClean:
      return "clean";
    case Category::kTransform:
      return "transform";
    case Category::kSelect:
      return "select";
    case Category::kEstimate:
      return "estimate";
  }
  return "unknown";
}

namespace {

Category parse_category(const std::string& text, const std::string& id) {
  for (Category c : {Category::kClean, Category::kTransform, Category::kSelect,
                     Category::kEstimate}) {
    if (to_string(c) == text) return c;
  }
  throw CatalogError(id, "primitive '" + id + "': unknown category '" + text + "'");
}

}  // namespace

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Catalog Catalog::from_json(const nlohmann::json& document) {
  if (!document.is_array()) {
    throw Error(ErrorKind::kParse, "catalog document must be a JSON array");
  }
  Catalog catalog;
  std::set<TaskKind> declared;
  for (std::size_t i = 0; i < document.size(); ++i) {
    const auto& entry = document[i];
    if (!entry.is_object() || !entry.contains("id") || !entry["id"].is_string()) {
      throw Error(ErrorKind::kParse, "catalog entry " + std::to_string(i) + " lacks a string id");
    }
    PrimitiveSpec spec;
    spec.id = entry["id"].get<std::string>();
    if (spec.id.empty()) throw CatalogError(spec.id, "catalog entry " + std::to_string(i) + " has an empty id");
    if (!entry.contains("category") || !entry["category"].is_string()) {
      throw CatalogError(spec.id, "primitive '" + spec.id + "': missing category");
    }
    spec.category = parse_category(entry["category"].get<std::string>(), spec.id);
    if (entry.contains("tasks")) {
      if (!entry["tasks"].is_array()) {
        throw CatalogError(spec.id, "primitive '" + spec.id + "': tasks must be an array");
      }
      for (const auto& t : entry["tasks"]) {
        if (!t.is_string()) throw CatalogError(spec.id, "primitive '" + spec.id + "': task names must be strings");
        try {
          spec.task_compat.insert(parse_task_kind(t.get<std::string>()));
        } catch (const Error& e) {
          throw CatalogError(spec.id, "primitive '" + spec.id + "': " + e.what());
        }
      }
    }
    if (entry.contains("defaults")) {
      if (!entry["defaults"].is_object()) {
        throw CatalogError(spec.id, "primitive '" + spec.id + "': defaults must be an object");
      }
      for (const auto& [key, value] : entry["defaults"].items()) {
        if (!value.is_number() && !value.is_string()) {
          throw CatalogError(spec.id, "primitive '" + spec.id + "': default '" + key +
                                          "' must be a number or string");
        }
      }
      spec.defaults = entry["defaults"];
    }
    if (spec.category == Category::kEstimate && spec.task_compat.empty()) {
      throw CatalogError(spec.id, "estimator '" + spec.id + "' declares no compatible task");
    }
    if (catalog.index_.count(spec.id) != 0) {
      throw CatalogError(spec.id, "duplicate primitive id '" + spec.id + "'");
    }
    declared.insert(spec.task_compat.begin(), spec.task_compat.end());
    catalog.index_.emplace(spec.id, catalog.primitives_.size());
    catalog.primitives_.push_back(std::move(spec));
  }

  bool any_estimator = false;
  for (const auto& p : catalog.primitives_) any_estimator |= p.category == Category::kEstimate;
  if (!any_estimator) {
    throw CatalogError(catalog.primitives_.empty() ? "" : catalog.primitives_.front().id,
                       "catalog has no estimate primitive");
  }
  for (TaskKind kind : declared) {
    bool covered = false;
    for (const auto& p : catalog.primitives_) {
      covered |= p.category == Category::kEstimate && p.supports(kind);
    }
    if (!covered) {
      std::string offender;
      for (const auto& p : catalog.primitives_) {
        if (p.supports(kind)) {
          offender = p.id;
          break;
        }
      }
      throw CatalogError(offender, "no estimator for task " + std::string(to_string(kind)) +
                                       " declared by '" + offender + "'");
    }
  }

  nlohmann::json canonical = nlohmann::json::array();
  for (const auto& p : catalog.primitives_) {
    nlohmann::json tasks = nlohmann::json::array();
    for (TaskKind t : p.task_compat) tasks.push_back(to_string(t));
    canonical.push_back({{"id", p.id},
                         {"category", to_string(p.category)},
                         {"tasks", tasks},
                         {"defaults", p.defaults}});
  }
  catalog.document_ = canonical;
  catalog.hash_ = fnv1a_hex(canonical.dump());
  return catalog;
}

Catalog Catalog::from_text(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::kParse, std::string("catalog: ") + e.what());
  }
  return from_json(doc);
}

Catalog Catalog::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open catalog file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str());
}

const Catalog& Catalog::builtin() {
  static const Catalog catalog = from_text(detail::kDefaultCatalogJson);
  return catalog;
}

std::size_t Catalog::ordinal(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) throw UnknownPrimitiveError(std::string(id));
  return it->second;
}

bool Catalog::contains(std::string_view id) const { return index_.count(std::string(id)) != 0; }

PipelineVerdict validate_pipeline(const Catalog& catalog, std::span<const int> pipeline,
                                  int max_length, const TaskKind* task) {
  for (int ordinal : pipeline) {
    if (ordinal < 0 || static_cast<std::size_t>(ordinal) >= catalog.size()) {
      throw UnknownPrimitiveError("#" + std::to_string(ordinal));
    }
  }
  PipelineVerdict verdict;
  if (static_cast<int>(pipeline.size()) > max_length) {
    verdict.violations.push_back("length " + std::to_string(pipeline.size()) +
                                 " exceeds limit " + std::to_string(max_length));
  }
  for (std::size_t i = 0; i < pipeline.size(); ++i) {
    const PrimitiveSpec& spec = catalog.at(static_cast<std::size_t>(pipeline[i]));
    if (i > 0) {
      const PrimitiveSpec& prev = catalog.at(static_cast<std::size_t>(pipeline[i - 1]));
      if (spec.category < prev.category) {
        verdict.violations.push_back("category decreases at position " + std::to_string(i) +
                                     " (" + std::string(to_string(prev.category)) + " -> " +
                                     std::string(to_string(spec.category)) + ")");
      }
    }
    if (spec.category == Category::kEstimate && i + 1 != pipeline.size()) {
      verdict.violations.push_back("estimator '" + spec.id + "' at position " +
                                   std::to_string(i) + " is not last");
    }
    if (task != nullptr && !spec.supports(*task)) {
      verdict.violations.push_back("primitive '" + spec.id + "' does not support task " +
                                   std::string(to_string(*task)));
    }
  }
  return verdict;
}

PipelineVerdict validate_pipeline(const Catalog& catalog, std::span<const std::string> pipeline_ids,
                                  int max_length, const TaskKind* task) {
  const Pipeline resolved = resolve_ids(catalog, pipeline_ids);
  return validate_pipeline(catalog, resolved, max_length, task);
}

Pipeline resolve_ids(const Catalog& catalog, std::span<const std::string> ids) {
  Pipeline out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(static_cast<int>(catalog.ordinal(id)));
  return out;
}

std::vector<std::string> pipeline_ids(const Catalog& catalog, std::span<const int> pipeline) {
  std::vector<std::string> out;
  out.reserve(pipeline.size());
  for (int o : pipeline) out.push_back(catalog.at(static_cast<std::size_t>(o)).id);
  return out;
}

}  // namespace pipeforge
