#include "core/primitives.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "core/errors.hpp"
#include "core/rng.hpp"

namespace pipeforge {

std::vector<double> Matrix::column(std::size_t c) const {
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) out[r] = (*this)(r, c);
  return out;
}

void FeatureEncoder::fit(const Dataset& dataset, std::span<const std::size_t> train_rows) {
  vocab_.assign(dataset.features.size(), {});
  width_ = 0;
  for (std::size_t c = 0; c < dataset.features.size(); ++c) {
    const Column& col = dataset.features[c];
    if (col.kind == ColumnKind::kNumeric) {
      width_ += 1;
      continue;
    }
    std::set<std::string> seen;
    for (std::size_t r : train_rows) {
      if (!col.missing[r]) seen.insert(col.text[r]);
    }
    vocab_[c].assign(seen.begin(), seen.end());
    width_ += vocab_[c].size();
  }
  fitted_ = true;
}

Matrix FeatureEncoder::apply(const Dataset& dataset, std::span<const std::size_t> rows) const {
  if (!fitted_) throw Error(ErrorKind::kInvalidArgument, "feature encoder applied before fit");
  Matrix out(rows.size(), width_);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t r = rows[i];
    std::size_t offset = 0;
    for (std::size_t c = 0; c < dataset.features.size(); ++c) {
      const Column& col = dataset.features[c];
      if (col.kind == ColumnKind::kNumeric) {
        out(i, offset++) = col.numeric[r];
        continue;
      }
      const auto& vocab = vocab_[c];
      if (!col.missing[r]) {
        const auto it = std::lower_bound(vocab.begin(), vocab.end(), col.text[r]);
        if (it != vocab.end() && *it == col.text[r]) out(i, offset + static_cast<std::size_t>(it - vocab.begin())) = 1.0;
      }
      offset += vocab.size();
    }
  }
  return out;
}

void Transformer::require_fit(bool fitted, const std::string& id) const {
  if (!fitted) throw Error(ErrorKind::kInvalidArgument, id + ": apply before fit");
}

namespace {

double param(const PrimitiveSpec& spec, const char* name, double fallback) {
  const auto it = spec.defaults.find(name);
  if (it == spec.defaults.end() || !it->is_number()) return fallback;
  return it->get<double>();
}

std::vector<double> present(const std::vector<double>& column) {
  std::vector<double> out;
  for (double v : column) {
    if (!std::isnan(v)) out.push_back(v);
  }
  return out;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double population_variance(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

void require_finite(const Matrix& x, const char* who) {
  for (double v : x.data) {
    if (!std::isfinite(v)) throw NumericError("features", std::string(who) + ": non-finite feature value");
  }
}

enum class ImputeRule { kMean, kMedian, kConstant };

class Imputer final : public Transformer {
 public:
  Imputer(std::string id, ImputeRule rule, double constant) : id_(std::move(id)), rule_(rule), constant_(constant) {}

  void fit(const Matrix& x, std::span<const double> /*y*/) override {
    fill_.assign(x.cols, 0.0);
    warnings_.clear();
    for (std::size_t c = 0; c < x.cols; ++c) {
      std::vector<double> v = present(x.column(c));
      if (rule_ == ImputeRule::kConstant) {
        fill_[c] = constant_;
        continue;
      }
      if (v.empty()) {
        fill_[c] = 0.0;
        warnings_.push_back(id_ + ": column " + std::to_string(c) + " is entirely missing, filling 0");
        continue;
      }
      if (rule_ == ImputeRule::kMean) {
        fill_[c] = mean_of(v);
      } else {
        std::sort(v.begin(), v.end());
        const std::size_t mid = v.size() / 2;
        fill_[c] = v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
      }
    }
    fitted_ = true;
  }

  Matrix apply(const Matrix& x) const override {
    require_fit(fitted_, id_);
    Matrix out = x;
    for (std::size_t r = 0; r < x.rows; ++r) {
      for (std::size_t c = 0; c < x.cols; ++c) {
        if (std::isnan(out(r, c))) out(r, c) = fill_[c];
      }
    }
    return out;
  }

  std::vector<double> fitted_params() const override { return fill_; }

 private:
  std::string id_;
  ImputeRule rule_;
  double constant_;
  bool fitted_ = false;
  std::vector<double> fill_;
};

class StandardScaler final : public Transformer {
 public:
  void fit(const Matrix& x, std::span<const double> /*y*/) override {
    mean_.assign(x.cols, 0.0);
    scale_.assign(x.cols, 1.0);
    for (std::size_t c = 0; c < x.cols; ++c) {
      const std::vector<double> v = present(x.column(c));
      mean_[c] = mean_of(v);
      const double sd = std::sqrt(population_variance(v));
      scale_[c] = sd > 0.0 ? sd : 1.0;
    }
    fitted_ = true;
  }

  Matrix apply(const Matrix& x) const override {
    require_fit(fitted_, "standard-scaler");
    Matrix out = x;
    for (std::size_t r = 0; r < x.rows; ++r) {
      for (std::size_t c = 0; c < x.cols; ++c) out(r, c) = (x(r, c) - mean_[c]) / scale_[c];
    }
    return out;
  }

  std::vector<double> fitted_params() const override {
    std::vector<double> p = mean_;
    p.insert(p.end(), scale_.begin(), scale_.end());
    return p;
  }

 private:
  bool fitted_ = false;
  std::vector<double> mean_, scale_;
};

class MinMaxScaler final : public Transformer {
 public:
  void fit(const Matrix& x, std::span<const double> /*y*/) override {
    lo_.assign(x.cols, 0.0);
    range_.assign(x.cols, 0.0);
    for (std::size_t c = 0; c < x.cols; ++c) {
      const std::vector<double> v = present(x.column(c));
      if (v.empty()) continue;
      const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
      lo_[c] = *lo;
      range_[c] = *hi - *lo;
    }
    fitted_ = true;
  }

  Matrix apply(const Matrix& x) const override {
    require_fit(fitted_, "minmax-scaler");
    Matrix out = x;
    for (std::size_t r = 0; r < x.rows; ++r) {
      for (std::size_t c = 0; c < x.cols; ++c) {
        if (std::isnan(x(r, c))) continue;
        out(r, c) = range_[c] > 0.0 ? (x(r, c) - lo_[c]) / range_[c] : 0.0;
      }
    }
    return out;
  }

  std::vector<double> fitted_params() const override {
    std::vector<double> p = lo_;
    p.insert(p.end(), range_.begin(), range_.end());
    return p;
  }

 private:
  bool fitted_ = false;
  std::vector<double> lo_, range_;
};

class IdentityTransform final : public Transformer {
 public:
  void fit(const Matrix& /*x*/, std::span<const double> /*y*/) override { fitted_ = true; }
  Matrix apply(const Matrix& x) const override {
    require_fit(fitted_, "identity-transform");
    return x;
  }
  std::vector<double> fitted_params() const override { return {}; }

 private:
  bool fitted_ = false;
};

// Keeps a subset of columns chosen at fit time.
class ColumnSelector : public Transformer {
 public:
  Matrix apply(const Matrix& x) const override {
    require_fit(fitted_, name_);
    if (x.cols != input_cols_) throw Error(ErrorKind::kShape, name_ + ": column count changed after fit");
    Matrix out(x.rows, keep_.size());
    for (std::size_t r = 0; r < x.rows; ++r) {
      for (std::size_t k = 0; k < keep_.size(); ++k) out(r, k) = x(r, keep_[k]);
    }
    return out;
  }

  std::vector<double> fitted_params() const override {
    std::vector<double> p(keep_.begin(), keep_.end());
    p.push_back(static_cast<double>(input_cols_));
    return p;
  }

 protected:
  explicit ColumnSelector(std::string name) : name_(std::move(name)) {}
  void set_kept(std::vector<std::size_t> keep, std::size_t input_cols) {
    keep_ = std::move(keep);
    input_cols_ = input_cols;
    fitted_ = true;
  }

 private:
  std::string name_;
  bool fitted_ = false;
  std::vector<std::size_t> keep_;
  std::size_t input_cols_ = 0;
};

class VarianceThreshold final : public ColumnSelector {
 public:
  explicit VarianceThreshold(double threshold) : ColumnSelector("variance-threshold"), threshold_(threshold) {}
  void fit(const Matrix& x, std::span<const double> /*y*/) override {
    std::vector<std::size_t> keep;
    for (std::size_t c = 0; c < x.cols; ++c) {
      if (population_variance(present(x.column(c))) >= threshold_) keep.push_back(c);
    }
    set_kept(std::move(keep), x.cols);
  }

 private:
  double threshold_;
};

class TopKTargetCorrelation final : public ColumnSelector {
 public:
  explicit TopKTargetCorrelation(std::size_t k) : ColumnSelector("top-k-target-correlation"), k_(k) {}
  void fit(const Matrix& x, std::span<const double> y) override {
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t c = 0; c < x.cols; ++c) {
      double sx = 0.0, sy = 0.0;
      std::size_t n = 0;
      for (std::size_t r = 0; r < x.rows; ++r) {
        if (std::isnan(x(r, c))) continue;
        sx += x(r, c);
        sy += y[r];
        ++n;
      }
      double corr = 0.0;
      if (n >= 2) {
        const double mx = sx / static_cast<double>(n), my = sy / static_cast<double>(n);
        double sxy = 0.0, sxx = 0.0, syy = 0.0;
        for (std::size_t r = 0; r < x.rows; ++r) {
          if (std::isnan(x(r, c))) continue;
          sxy += (x(r, c) - mx) * (y[r] - my);
          sxx += (x(r, c) - mx) * (x(r, c) - mx);
          syy += (y[r] - my) * (y[r] - my);
        }
        if (sxx > 0.0 && syy > 0.0) corr = std::abs(sxy / std::sqrt(sxx * syy));
      }
      scored.emplace_back(corr, c);
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    const std::size_t k = std::min(k_, x.cols);
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < k; ++i) keep.push_back(scored[i].second);
    std::sort(keep.begin(), keep.end());
    set_kept(std::move(keep), x.cols);
  }

 private:
  std::size_t k_;
};

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Linear model trained by plain SGD: log loss per class (one-vs-rest) for
// classification, squared loss for regression.
class SgdLinear final : public Estimator {
 public:
  SgdLinear(const PrimitiveSpec& spec, const EstimatorContext& ctx)
      : ctx_(ctx),
        epochs_(static_cast<int>(param(spec, "epochs", 50))),
        eta0_(param(spec, "eta0", 0.1)),
        decay_(param(spec, "decay", 0.01)),
        l2_(param(spec, "l2", 1e-4)) {}

  void fit(const Matrix& x, std::span<const double> y) override {
    require_finite(x, "sgd-linear");
    cols_ = x.cols;
    std::size_t models = 1;
    if (ctx_.task == TaskKind::kMulticlassClassification) models = ctx_.class_count;
    weights_.assign(models, std::vector<double>(cols_ + 1, 0.0));
    for (std::size_t m = 0; m < models; ++m) {
      std::vector<double> target(y.size());
      for (std::size_t i = 0; i < y.size(); ++i) {
        if (ctx_.task == TaskKind::kRegression) {
          target[i] = y[i];
        } else if (ctx_.task == TaskKind::kBinaryClassification) {
          target[i] = y[i] == 1.0 ? 1.0 : 0.0;
        } else {
          target[i] = y[i] == static_cast<double>(m) ? 1.0 : 0.0;
        }
      }
      train_one(x, target, weights_[m]);
    }
    fitted_ = true;
  }

  std::vector<double> predict(const Matrix& x) const override {
    if (!fitted_) throw Error(ErrorKind::kInvalidArgument, "sgd-linear: predict before fit");
    require_finite(x, "sgd-linear");
    if (x.cols != cols_) throw Error(ErrorKind::kShape, "sgd-linear: column count changed after fit");
    std::vector<double> out(x.rows);
    for (std::size_t r = 0; r < x.rows; ++r) {
      if (ctx_.task == TaskKind::kMulticlassClassification) {
        std::size_t best = 0;
        double best_z = -INFINITY;
        for (std::size_t m = 0; m < weights_.size(); ++m) {
          const double z = score(weights_[m], x, r);
          if (z > best_z) {
            best_z = z;
            best = m;
          }
        }
        out[r] = static_cast<double>(best);
      } else {
        const double z = score(weights_[0], x, r);
        out[r] = ctx_.task == TaskKind::kRegression ? z : (z >= 0.0 ? 1.0 : 0.0);
      }
    }
    return out;
  }

  std::vector<double> fitted_params() const override {
    std::vector<double> p;
    for (const auto& w : weights_) p.insert(p.end(), w.begin(), w.end());
    return p;
  }

 private:
  double score(const std::vector<double>& w, const Matrix& x, std::size_t r) const {
    double z = w[cols_];
    for (std::size_t c = 0; c < cols_; ++c) z += w[c] * x(r, c);
    return z;
  }

  void train_one(const Matrix& x, const std::vector<double>& target, std::vector<double>& w) const {
    Rng rng(ctx_.seed);
    std::vector<std::size_t> order(x.rows);
    std::iota(order.begin(), order.end(), 0);
    long long t = 0;
    for (int epoch = 0; epoch < epochs_; ++epoch) {
      rng.shuffle(std::span<std::size_t>(order));
      for (std::size_t r : order) {
        const double eta = eta0_ / (1.0 + decay_ * static_cast<double>(t));
        const double z = score(w, x, r);
        const double pred = ctx_.task == TaskKind::kRegression ? z : sigmoid(z);
        const double g = pred - target[r];
        for (std::size_t c = 0; c < cols_; ++c) w[c] -= eta * (g * x(r, c) + l2_ * w[c]);
        w[cols_] -= eta * g;
        ++t;
      }
    }
    for (double v : w) {
      if (!std::isfinite(v)) throw NumericError("sgd", "sgd-linear diverged");
    }
  }

  EstimatorContext ctx_;
  int epochs_;
  double eta0_, decay_, l2_;
  std::size_t cols_ = 0;
  bool fitted_ = false;
  std::vector<std::vector<double>> weights_;
};

class GaussianNb final : public Estimator {
 public:
  explicit GaussianNb(const PrimitiveSpec& spec) : var_floor_(param(spec, "var_floor", 1e-9)) {}

  void fit(const Matrix& x, std::span<const double> y) override {
    require_finite(x, "gaussian-nb");
    std::map<double, std::vector<std::size_t>> by_class;
    for (std::size_t r = 0; r < y.size(); ++r) by_class[y[r]].push_back(r);
    if (by_class.size() < 2) {
      throw NumericError("degenerate-fold", "gaussian-nb: training fold holds a single class");
    }
    cols_ = x.cols;
    labels_.clear();
    log_prior_.clear();
    mean_.clear();
    var_.clear();
    for (const auto& [label, rows] : by_class) {
      labels_.push_back(label);
      log_prior_.push_back(std::log(static_cast<double>(rows.size()) / static_cast<double>(y.size())));
      std::vector<double> mu(cols_, 0.0), var(cols_, 0.0);
      for (std::size_t c = 0; c < cols_; ++c) {
        for (std::size_t r : rows) mu[c] += x(r, c);
        mu[c] /= static_cast<double>(rows.size());
        for (std::size_t r : rows) var[c] += (x(r, c) - mu[c]) * (x(r, c) - mu[c]);
        var[c] = std::max(var[c] / static_cast<double>(rows.size()), var_floor_);
      }
      mean_.push_back(std::move(mu));
      var_.push_back(std::move(var));
    }
    fitted_ = true;
  }

  std::vector<double> predict(const Matrix& x) const override {
    if (!fitted_) throw Error(ErrorKind::kInvalidArgument, "gaussian-nb: predict before fit");
    require_finite(x, "gaussian-nb");
    if (x.cols != cols_) throw Error(ErrorKind::kShape, "gaussian-nb: column count changed after fit");
    std::vector<double> out(x.rows);
    for (std::size_t r = 0; r < x.rows; ++r) {
      double best = -INFINITY;
      for (std::size_t k = 0; k < labels_.size(); ++k) {
        double ll = log_prior_[k];
        for (std::size_t c = 0; c < cols_; ++c) {
          const double d = x(r, c) - mean_[k][c];
          ll -= 0.5 * std::log(2.0 * M_PI * var_[k][c]) + d * d / (2.0 * var_[k][c]);
        }
        if (ll > best) {
          best = ll;
          out[r] = labels_[k];
        }
      }
    }
    return out;
  }

  std::vector<double> fitted_params() const override {
    std::vector<double> p = labels_;
    p.insert(p.end(), log_prior_.begin(), log_prior_.end());
    for (const auto& m : mean_) p.insert(p.end(), m.begin(), m.end());
    for (const auto& v : var_) p.insert(p.end(), v.begin(), v.end());
    return p;
  }

 private:
  double var_floor_;
  std::size_t cols_ = 0;
  bool fitted_ = false;
  std::vector<double> labels_, log_prior_;
  std::vector<std::vector<double>> mean_, var_;
};

class MajorityBaseline final : public Estimator {
 public:
  explicit MajorityBaseline(TaskKind task) : task_(task) {}

  void fit(const Matrix& /*x*/, std::span<const double> y) override {
    if (task_ == TaskKind::kRegression) {
      constant_ = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
    } else {
      std::map<double, std::size_t> counts;
      for (double v : y) ++counts[v];
      std::size_t best = 0;
      for (const auto& [label, count] : counts) {
        if (count > best) {
          best = count;
          constant_ = label;
        }
      }
    }
    fitted_ = true;
  }

  std::vector<double> predict(const Matrix& x) const override {
    if (!fitted_) throw Error(ErrorKind::kInvalidArgument, "majority-baseline: predict before fit");
    return std::vector<double>(x.rows, constant_);
  }

  std::vector<double> fitted_params() const override { return {constant_}; }

 private:
  TaskKind task_;
  bool fitted_ = false;
  double constant_ = 0.0;
};

}  // namespace

bool has_builtin(const std::string& id) {
  static const std::set<std::string> ids = {
      "mean-imputer",       "median-imputer",           "constant-imputer", "standard-scaler",
      "minmax-scaler",      "identity-transform",       "variance-threshold", "top-k-target-correlation",
      "sgd-linear",         "gaussian-nb",              "majority-baseline"};
  return ids.count(id) != 0;
}

std::unique_ptr<Transformer> make_transformer(const PrimitiveSpec& spec) {
  if (spec.category == Category::kEstimate) return nullptr;
  const std::string& id = spec.id;
  if (id == "mean-imputer") return std::make_unique<Imputer>(id, ImputeRule::kMean, 0.0);
  if (id == "median-imputer") return std::make_unique<Imputer>(id, ImputeRule::kMedian, 0.0);
  if (id == "constant-imputer") {
    return std::make_unique<Imputer>(id, ImputeRule::kConstant, param(spec, "fill_value", 0.0));
  }
  if (id == "standard-scaler") return std::make_unique<StandardScaler>();
  if (id == "minmax-scaler") return std::make_unique<MinMaxScaler>();
  if (id == "identity-transform") return std::make_unique<IdentityTransform>();
  if (id == "variance-threshold") return std::make_unique<VarianceThreshold>(param(spec, "threshold", 1e-8));
  if (id == "top-k-target-correlation") {
    return std::make_unique<TopKTargetCorrelation>(static_cast<std::size_t>(param(spec, "k", 10)));
  }
  return nullptr;
}

std::unique_ptr<Estimator> make_estimator(const PrimitiveSpec& spec, const EstimatorContext& ctx) {
  if (spec.category != Category::kEstimate) return nullptr;
  if (spec.id == "sgd-linear") return std::make_unique<SgdLinear>(spec, ctx);
  if (spec.id == "gaussian-nb") {
    if (ctx.task == TaskKind::kRegression) return nullptr;
    return std::make_unique<GaussianNb>(spec);
  }
  if (spec.id == "majority-baseline") return std::make_unique<MajorityBaseline>(ctx.task);
  return nullptr;
}

}  // namespace pipeforge
