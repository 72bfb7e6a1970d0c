#include "core/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "core/catalog.hpp"
#include "core/errors.hpp"

namespace pipeforge {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool parse_number(std::string_view s, double& out) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size() && std::isfinite(out);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct Moments {
  double mean = 0.0, std = 0.0, skew = 0.0, kurt = 0.0;
  std::size_t count = 0;
};

Moments moments(const std::vector<double>& values) {
  Moments m;
  double sum = 0.0;
  for (double v : values) {
    if (std::isnan(v)) continue;
    sum += v;
    ++m.count;
  }
  if (m.count == 0) return m;
  m.mean = sum / static_cast<double>(m.count);
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : values) {
    if (std::isnan(v)) continue;
    const double d = v - m.mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  const auto n = static_cast<double>(m.count);
  m2 /= n;
  m3 /= n;
  m4 /= n;
  m.std = std::sqrt(m2);
  if (m2 > 0.0) {
    m.skew = m3 / std::pow(m2, 1.5);
    m.kurt = m4 / (m2 * m2) - 3.0;
  }
  return m;
}

double abs_correlation(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0.0, sy = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::isnan(x[i])) continue;
    sx += x[i];
    sy += y[i];
    ++n;
  }
  if (n < 2) return 0.0;
  const double mx = sx / static_cast<double>(n), my = sy / static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::isnan(x[i])) continue;
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return 0.0;
  return std::abs(sxy / std::sqrt(sxx * syy));
}

}  // namespace

bool is_missing_marker(std::string_view cell) {
  return cell.empty() || cell == "NA" || cell == "NaN" || cell == "?";
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t i = 0;
  auto end_record = [&] {
    record.push_back(std::move(field));
    field.clear();
    records.push_back(std::move(record));
    record.clear();
    field_started = false;
  };
  while (i < text.size()) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          i += 2;
          continue;
        }
        in_quotes = false;
      } else {
        field.push_back(c);
      }
      ++i;
      continue;
    }
    if (c == '"' && field.empty()) {
      in_quotes = true;
      field_started = true;
    } else if (c == ',') {
      record.push_back(std::move(field));
      field.clear();
      field_started = true;
    } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      end_record();
      ++i;
    } else if (c == '\n') {
      end_record();
    } else {
      field.push_back(c);
      field_started = true;
    }
    ++i;
  }
  if (in_quotes) throw Error(ErrorKind::kParse, "unterminated quoted field");
  if (field_started || !field.empty() || !record.empty()) end_record();
  return records;
}

Dataset make_dataset(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows,
                     const TaskSpec& task, std::string name) {
  const auto target_it = std::find(header.begin(), header.end(), task.target_column);
  if (target_it == header.end()) {
    throw Error(ErrorKind::kDataset, "target column '" + task.target_column + "' not found");
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != header.size()) {
      // Header is line 1, so data row r sits on line r + 2.
      throw Error(ErrorKind::kParse, "row " + std::to_string(r + 2) + " has " + std::to_string(rows[r].size()) +
                                         " fields, header has " + std::to_string(header.size()));
    }
  }
  if (rows.size() < 10) {
    throw Error(ErrorKind::kDataset, "dataset has " + std::to_string(rows.size()) + " rows, at least 10 required");
  }
  const auto target_col = static_cast<std::size_t>(target_it - header.begin());

  Dataset ds;
  ds.name = std::move(name);
  ds.task = task;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c == target_col) continue;
    Column col;
    col.name = header[c];
    col.missing.resize(rows.size());
    bool numeric = true;
    std::vector<double> values(rows.size(), kNaN);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const std::string& cell = rows[r][c];
      if (is_missing_marker(cell)) {
        col.missing[r] = 1;
        continue;
      }
      double v = 0.0;
      if (numeric && parse_number(cell, v)) {
        values[r] = v;
      } else {
        numeric = false;
      }
    }
    if (numeric) {
      col.kind = ColumnKind::kNumeric;
      col.numeric = std::move(values);
    } else {
      col.kind = ColumnKind::kCategorical;
      col.text.resize(rows.size());
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (!col.missing[r]) col.text[r] = rows[r][c];
      }
    }
    ds.features.push_back(std::move(col));
  }

  ds.target.resize(rows.size());
  if (task.is_classification()) {
    std::set<std::string> labels;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const std::string& cell = rows[r][target_col];
      if (is_missing_marker(cell)) {
        throw Error(ErrorKind::kDataset, "missing target value on row " + std::to_string(r + 2));
      }
      labels.insert(cell);
    }
    ds.classes.assign(labels.begin(), labels.end());
    if (ds.classes.size() < 2) throw Error(ErrorKind::kDataset, "target column is constant");
    if (task.kind == TaskKind::kBinaryClassification && ds.classes.size() != 2) {
      throw Error(ErrorKind::kDataset, "binary task but target has " + std::to_string(ds.classes.size()) + " classes");
    }
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto pos = std::lower_bound(ds.classes.begin(), ds.classes.end(), rows[r][target_col]);
      ds.target[r] = static_cast<double>(pos - ds.classes.begin());
    }
  } else {
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (!parse_number(rows[r][target_col], ds.target[r])) {
        throw Error(ErrorKind::kDataset, "non-numeric regression target on row " + std::to_string(r + 2));
      }
    }
    const auto [lo, hi] = std::minmax_element(ds.target.begin(), ds.target.end());
    if (*lo == *hi) throw Error(ErrorKind::kDataset, "target column is constant");
  }

  std::ostringstream canon;
  for (const auto& h : header) canon << h << '\x1f';
  for (const auto& row : rows) {
    for (const auto& cell : row) canon << cell << '\x1f';
    canon << '\x1e';
  }
  canon << task_to_json(task).dump();
  ds.hash = fnv1a_hex(canon.str());
  return ds;
}

Dataset load_dataset(const std::string& path, const TaskSpec& task) {
  auto records = parse_csv(read_file(path));
  if (records.empty()) throw Error(ErrorKind::kDataset, "'" + path + "' is empty");
  std::vector<std::string> header = std::move(records.front());
  records.erase(records.begin());
  // A trailing blank line parses as a single empty field.
  while (!records.empty() && records.back().size() == 1 && records.back()[0].empty() && header.size() != 1) {
    records.pop_back();
  }
  std::string name = path;
  if (const auto slash = name.find_last_of('/'); slash != std::string::npos) name = name.substr(slash + 1);
  if (const auto dot = name.rfind(".csv"); dot != std::string::npos) name = name.substr(0, dot);
  Dataset ds = make_dataset(header, records, task, name);
  ds.path = path;
  return ds;
}

TaskSpec load_task_spec(const std::string& path_or_json) {
  std::string text = path_or_json;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos || text[first] != '{') text = read_file(path_or_json);
  try {
    return task_from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::kParse, std::string("task spec: ") + e.what());
  }
}

MetaFeatures meta_features(const Dataset& ds) {
  MetaFeatures f{};
  const auto n_rows = static_cast<double>(ds.rows());
  const auto n_cols = static_cast<double>(ds.features.size());
  std::size_t numeric = 0, categorical = 0, missing = 0, constant = 0;
  double sum_mean = 0.0, sum_std = 0.0, sum_skew = 0.0, sum_kurt = 0.0, sum_corr = 0.0;
  std::size_t with_values = 0;
  for (const auto& col : ds.features) {
    missing += static_cast<std::size_t>(std::count(col.missing.begin(), col.missing.end(), std::uint8_t{1}));
    if (col.kind == ColumnKind::kCategorical) {
      ++categorical;
      std::set<std::string> distinct;
      for (std::size_t r = 0; r < col.text.size(); ++r) {
        if (!col.missing[r]) distinct.insert(col.text[r]);
      }
      if (distinct.size() <= 1) ++constant;
      continue;
    }
    ++numeric;
    const Moments m = moments(col.numeric);
    std::set<double> distinct;
    for (double v : col.numeric) {
      if (!std::isnan(v)) distinct.insert(v);
      if (distinct.size() > 1) break;
    }
    if (distinct.size() <= 1) ++constant;
    if (m.count == 0) continue;
    ++with_values;
    sum_mean += m.mean;
    sum_std += m.std;
    sum_skew += std::abs(m.skew);
    sum_kurt += std::abs(m.kurt);
    sum_corr += abs_correlation(col.numeric, ds.target);
  }

  f[0] = std::log1p(n_rows);
  f[1] = n_cols;
  f[2] = static_cast<double>(numeric);
  f[3] = static_cast<double>(categorical);
  f[4] = n_cols > 0 ? static_cast<double>(missing) / (n_rows * n_cols) : 0.0;
  if (ds.task.is_classification()) {
    std::map<int, std::size_t> counts;
    for (double y : ds.target) ++counts[static_cast<int>(y)];
    double entropy = 0.0;
    std::size_t majority = 0;
    for (const auto& [label, count] : counts) {
      const double p = static_cast<double>(count) / n_rows;
      entropy -= p * std::log2(p);
      majority = std::max(majority, count);
    }
    f[5] = static_cast<double>(ds.class_count());
    f[6] = entropy;
    f[7] = static_cast<double>(majority) / n_rows;
  }
  if (with_values > 0) {
    const auto k = static_cast<double>(with_values);
    f[8] = sum_mean / k;
    f[9] = sum_std / k;
    f[10] = sum_skew / k;
    f[11] = sum_kurt / k;
    f[12] = sum_corr / k;
  }
  f[13] = n_cols > 0 ? static_cast<double>(numeric) / n_cols : 0.0;
  f[14] = n_cols > 0 ? std::log1p(n_rows / n_cols) : 0.0;
  f[15] = n_cols > 0 ? static_cast<double>(constant) / n_cols : 0.0;
  return f;
}

}  // namespace pipeforge
