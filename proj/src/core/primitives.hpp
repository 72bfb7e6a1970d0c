#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "core/catalog.hpp"
#include "core/dataset.hpp"

namespace pipeforge {

// Row-major feature block; NaN marks a missing value.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::vector<double> column(std::size_t c) const;
};

// One-hot expansion of categorical columns with a vocabulary learned from
// the training rows; unseen or missing categories encode as all zeros.
class FeatureEncoder {
 public:
  void fit(const Dataset& dataset, std::span<const std::size_t> train_rows);
  Matrix apply(const Dataset& dataset, std::span<const std::size_t> rows) const;
  std::size_t width() const { return width_; }
  const std::vector<std::vector<std::string>>& vocabularies() const { return vocab_; }

 private:
  bool fitted_ = false;
  std::vector<std::vector<std::string>> vocab_;  // empty for numeric columns
  std::size_t width_ = 0;
};

// Clean, transform and select stages.
class Transformer {
 public:
  virtual ~Transformer() = default;
  virtual void fit(const Matrix& x, std::span<const double> y) = 0;
  virtual Matrix apply(const Matrix& x) const = 0;
  // Everything learned by fit(), flattened; used by leakage checks.
  virtual std::vector<double> fitted_params() const = 0;
  const std::vector<std::string>& warnings() const { return warnings_; }

 protected:
  void require_fit(bool fitted, const std::string& id) const;
  std::vector<std::string> warnings_;
};

class Estimator {
 public:
  virtual ~Estimator() = default;
  virtual void fit(const Matrix& x, std::span<const double> y) = 0;
  // Class indices for classification, values for regression.
  virtual std::vector<double> predict(const Matrix& x) const = 0;
  virtual std::vector<double> fitted_params() const = 0;
};

struct EstimatorContext {
  TaskKind task = TaskKind::kBinaryClassification;
  std::size_t class_count = 0;
  std::uint64_t seed = 0;
};

// Ids with a built-in realization. Besides the default catalog this includes
// "majority-baseline", a constant predictor (majority class or mean).
bool has_builtin(const std::string& id);

// Returns nullptr for ids without a built-in realization or of the wrong
// category.
std::unique_ptr<Transformer> make_transformer(const PrimitiveSpec& spec);
std::unique_ptr<Estimator> make_estimator(const PrimitiveSpec& spec, const EstimatorContext& ctx);

}  // namespace pipeforge
