#include "core/net.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "core/errors.hpp"
#include "core/rng.hpp"

namespace pipeforge {

namespace {

constexpr double kProbFloor = 1e-12;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Meta-features span several orders of magnitude; a signed log keeps the
// context projection well conditioned.
double squash(double x) { return std::copysign(std::log1p(std::abs(x)), x); }

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// y += W x for a row-major rows x cols block.
void matvec_add(const double* w, std::size_t rows, std::size_t cols, const double* x, double* y) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* row = w + i * cols;
    double acc = 0.0;
    for (std::size_t j = 0; j < cols; ++j) acc += row[j] * x[j];
    y[i] += acc;
  }
}

// dx += W^T dy
void matvec_t_add(const double* w, std::size_t rows, std::size_t cols, const double* dy, double* dx) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* row = w + i * cols;
    const double g = dy[i];
    if (g == 0.0) continue;
    for (std::size_t j = 0; j < cols; ++j) dx[j] += row[j] * g;
  }
}

// dW += dy x^T
void outer_add(double* dw, std::size_t rows, std::size_t cols, const double* dy, const double* x) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double g = dy[i];
    if (g == 0.0) continue;
    double* row = dw + i * cols;
    for (std::size_t j = 0; j < cols; ++j) row[j] += g * x[j];
  }
}

struct Layout {
  const ParamGroup& embedding;
  const ParamGroup& context_w;
  const ParamGroup& context_b;
  const ParamGroup& wz;
  const ParamGroup& uz;
  const ParamGroup& bz;
  const ParamGroup& wr;
  const ParamGroup& ur;
  const ParamGroup& br;
  const ParamGroup& wn;
  const ParamGroup& un;
  const ParamGroup& bn;
  const ParamGroup& policy_w;
  const ParamGroup& policy_b;
  const ParamGroup& value_w;
  const ParamGroup& value_b;

  explicit Layout(const NetParams& p)
      : embedding(p.group("embedding")),
        context_w(p.group("context_w")),
        context_b(p.group("context_b")),
        wz(p.group("gru_wz")),
        uz(p.group("gru_uz")),
        bz(p.group("gru_bz")),
        wr(p.group("gru_wr")),
        ur(p.group("gru_ur")),
        br(p.group("gru_br")),
        wn(p.group("gru_wn")),
        un(p.group("gru_un")),
        bn(p.group("gru_bn")),
        policy_w(p.group("policy_w")),
        policy_b(p.group("policy_b")),
        value_w(p.group("value_w")),
        value_b(p.group("value_b")) {}
};

struct StepCache {
  std::size_t token = 0;
  std::vector<double> h_prev, z, r, u, n, h;
};

struct ForwardCache {
  std::vector<double> context;  // squashed meta + task entries
  std::vector<double> h0;
  std::vector<StepCache> steps;
  std::vector<double> logits;
  std::vector<double> probs;
  double value = 0.0;
};

void check_shapes(const NetParams& params, std::span<const double> state_vec, std::span<const std::uint8_t> legal) {
  const NetDims& d = params.dims();
  if (state_vec.size() != d.state_width()) {
    throw Error(ErrorKind::kShape, "state vector has " + std::to_string(state_vec.size()) + " entries, expected " +
                                       std::to_string(d.state_width()));
  }
  if (legal.size() != d.actions) {
    throw Error(ErrorKind::kShape, "legal mask has " + std::to_string(legal.size()) + " entries, expected " +
                                       std::to_string(d.actions));
  }
  if (std::find(legal.begin(), legal.end(), std::uint8_t{1}) == legal.end()) {
    throw Error(ErrorKind::kInvalidArgument, "legal mask has no legal action");
  }
}

ForwardCache run_forward(const NetParams& params, const Layout& L, std::span<const double> state_vec,
                         std::span<const std::uint8_t> legal) {
  check_shapes(params, state_vec, legal);
  const NetDims& dims = params.dims();
  const std::size_t h = dims.hidden;
  const std::size_t d = dims.embed;
  const double* theta = params.theta().data();
  auto at = [&](const ParamGroup& g) { return theta + g.offset; };

  ForwardCache c;
  c.context.resize(kContextWidth);
  for (std::size_t i = 0; i < kContextWidth; ++i) c.context[i] = squash(state_vec[i]);
  c.h0.assign(at(L.context_b), at(L.context_b) + h);
  matvec_add(at(L.context_w), h, kContextWidth, c.context.data(), c.h0.data());
  for (double& x : c.h0) x = std::tanh(x);

  std::vector<double> hidden = c.h0;
  c.steps.resize(dims.max_length);
  for (std::size_t t = 0; t < dims.max_length; ++t) {
    const double slot = state_vec[kContextWidth + t];
    const auto token = static_cast<std::size_t>(std::llround(slot));
    if (!(slot >= 0.0) || token > dims.primitives || static_cast<double>(token) != slot) {
      throw Error(ErrorKind::kShape, "slot value " + std::to_string(slot) + " is not a primitive ordinal");
    }
    StepCache& s = c.steps[t];
    s.token = token;
    s.h_prev = hidden;
    const double* x = at(L.embedding) + token * d;

    s.z.assign(at(L.bz), at(L.bz) + h);
    matvec_add(at(L.wz), h, d, x, s.z.data());
    matvec_add(at(L.uz), h, h, hidden.data(), s.z.data());
    for (double& v : s.z) v = sigmoid(v);

    s.r.assign(at(L.br), at(L.br) + h);
    matvec_add(at(L.wr), h, d, x, s.r.data());
    matvec_add(at(L.ur), h, h, hidden.data(), s.r.data());
    for (double& v : s.r) v = sigmoid(v);

    s.u.assign(h, 0.0);
    matvec_add(at(L.un), h, h, hidden.data(), s.u.data());
    s.n.assign(at(L.bn), at(L.bn) + h);
    matvec_add(at(L.wn), h, d, x, s.n.data());
    for (std::size_t i = 0; i < h; ++i) s.n[i] = std::tanh(s.n[i] + s.r[i] * s.u[i]);

    s.h.resize(h);
    for (std::size_t i = 0; i < h; ++i) s.h[i] = (1.0 - s.z[i]) * s.n[i] + s.z[i] * hidden[i];
    hidden = s.h;
  }

  c.logits.assign(at(L.policy_b), at(L.policy_b) + dims.actions);
  matvec_add(at(L.policy_w), dims.actions, h, hidden.data(), c.logits.data());
  double value_logit = at(L.value_b)[0];
  matvec_add(at(L.value_w), 1, h, hidden.data(), &value_logit);
  c.value = sigmoid(value_logit);

  double top = -INFINITY;
  for (std::size_t a = 0; a < dims.actions; ++a) {
    if (legal[a]) top = std::max(top, c.logits[a]);
  }
  c.probs.assign(dims.actions, 0.0);
  double total = 0.0;
  for (std::size_t a = 0; a < dims.actions; ++a) {
    if (legal[a]) total += (c.probs[a] = std::exp(c.logits[a] - top));
  }
  for (double& p : c.probs) p /= total;
  return c;
}

const std::vector<double>& final_hidden(const ForwardCache& c) {
  return c.steps.empty() ? c.h0 : c.steps.back().h;
}

void validate_example(const NetParams& params, const TrainingExample& ex) {
  if (ex.pi_target.size() != params.dims().actions) {
    throw Error(ErrorKind::kShape, "policy target has " + std::to_string(ex.pi_target.size()) + " entries, expected " +
                                       std::to_string(params.dims().actions));
  }
}

struct ExampleTerms {
  double cross_entropy = 0.0;
  double value = 0.0;
  double l1 = 0.0;
};

ExampleTerms example_terms(const ForwardCache& c, const TrainingExample& ex) {
  ExampleTerms t;
  for (std::size_t a = 0; a < c.probs.size(); ++a) {
    if (ex.legal[a] && ex.pi_target[a] != 0.0) {
      t.cross_entropy -= ex.pi_target[a] * std::log(std::max(c.probs[a], kProbFloor));
    }
    t.l1 += std::abs(c.logits[a]);
  }
  t.value = (c.value - ex.e) * (c.value - ex.e);
  return t;
}

LossTerms finish_terms(const NetParams& params, ExampleTerms sum, std::size_t batch) {
  const double inv = 1.0 / static_cast<double>(batch);
  double sq = 0.0;
  for (double w : params.theta()) sq += w * w;
  LossTerms out;
  out.cross_entropy = sum.cross_entropy * inv;
  out.value = sum.value * inv;
  out.l2 = params.hyper().alpha * sq;
  out.l1 = params.hyper().beta * sum.l1 * inv;
  const std::pair<const char*, double> named[] = {
      {"cross_entropy", out.cross_entropy}, {"value", out.value}, {"l2", out.l2}, {"l1", out.l1}};
  for (const auto& [name, v] : named) {
    if (!std::isfinite(v)) throw NumericError(name, std::string("non-finite ") + name + " loss term");
  }
  return out;
}

}  // namespace

NetDims dims_for(const Catalog& catalog, const GameRules& rules, std::size_t embed, std::size_t hidden) {
  NetDims d;
  d.primitives = catalog.size();
  d.max_length = static_cast<std::size_t>(rules.max_length);
  d.actions = action_space_size(catalog.size(), rules.max_length);
  d.embed = embed;
  d.hidden = hidden;
  return d;
}

NetParams::NetParams(const NetDims& dims, const NetHyper& hyper) : dims_(dims), hyper_(hyper) {
  if (dims.primitives == 0 || dims.max_length == 0 || dims.actions == 0 || dims.embed == 0 || dims.hidden == 0) {
    throw Error(ErrorKind::kShape, "network dimensions must be positive");
  }
  const std::size_t h = dims.hidden;
  const std::size_t d = dims.embed;
  const std::pair<const char*, std::pair<std::size_t, std::size_t>> shapes[] = {
      {"embedding", {dims.primitives + 1, d}},
      {"context_w", {h, kContextWidth}},
      {"context_b", {h, 1}},
      {"gru_wz", {h, d}},
      {"gru_uz", {h, h}},
      {"gru_bz", {h, 1}},
      {"gru_wr", {h, d}},
      {"gru_ur", {h, h}},
      {"gru_br", {h, 1}},
      {"gru_wn", {h, d}},
      {"gru_un", {h, h}},
      {"gru_bn", {h, 1}},
      {"policy_w", {dims.actions, h}},
      {"policy_b", {dims.actions, 1}},
      {"value_w", {1, h}},
      {"value_b", {1, 1}},
  };
  std::size_t offset = 0;
  for (const auto& [name, shape] : shapes) {
    groups_.push_back({name, offset, shape.first, shape.second});
    offset += shape.first * shape.second;
  }
  theta_.assign(offset, 0.0);
}

NetParams NetParams::random(const NetDims& dims, const NetHyper& hyper, std::uint64_t seed, double scale) {
  NetParams p(dims, hyper);
  Rng rng(seed);
  for (double& w : p.theta_) w = rng.uniform(-scale, scale);
  return p;
}

const ParamGroup& NetParams::group(const std::string& name) const {
  for (const auto& g : groups_) {
    if (g.name == name) return g;
  }
  throw Error(ErrorKind::kShape, "no parameter group '" + name + "'");
}

PolicyValueOutput forward(const NetParams& params, std::span<const double> state_vec,
                          std::span<const std::uint8_t> legal) {
  const Layout layout(params);
  ForwardCache c = run_forward(params, layout, state_vec, legal);
  return {std::move(c.probs), std::move(c.logits), c.value};
}

LossTerms loss(const NetParams& params, std::span<const TrainingExample> batch) {
  if (batch.empty()) throw Error(ErrorKind::kInvalidArgument, "loss needs a non-empty batch");
  const Layout layout(params);
  ExampleTerms sum;
  for (const auto& ex : batch) {
    validate_example(params, ex);
    const ForwardCache c = run_forward(params, layout, ex.state_vec, ex.legal);
    const ExampleTerms t = example_terms(c, ex);
    sum.cross_entropy += t.cross_entropy;
    sum.value += t.value;
    sum.l1 += t.l1;
  }
  return finish_terms(params, sum, batch.size());
}

std::vector<double> gradient(const NetParams& params, std::span<const TrainingExample> batch, LossTerms* terms) {
  if (batch.empty()) throw Error(ErrorKind::kInvalidArgument, "gradient needs a non-empty batch");
  const Layout L(params);
  const NetDims& dims = params.dims();
  const std::size_t h = dims.hidden;
  const std::size_t d = dims.embed;
  const std::size_t A = dims.actions;
  const double beta = params.hyper().beta;
  const double* theta = params.theta().data();
  auto at = [&](const ParamGroup& g) { return theta + g.offset; };

  std::vector<double> grad(params.theta().size(), 0.0);
  auto gat = [&](const ParamGroup& g) { return grad.data() + g.offset; };

  ExampleTerms sum;
  std::vector<double> dlogits(A), dh(h), dh_prev(h), da_n(h), da_r(h), da_z(h), du(h), dx(d);
  for (const auto& ex : batch) {
    validate_example(params, ex);
    const ForwardCache c = run_forward(params, L, ex.state_vec, ex.legal);
    const ExampleTerms t = example_terms(c, ex);
    sum.cross_entropy += t.cross_entropy;
    sum.value += t.value;
    sum.l1 += t.l1;

    // Cross-entropy through the clamped log and the masked softmax.
    double mean_g = 0.0;
    std::vector<double> g(A, 0.0);
    for (std::size_t a = 0; a < A; ++a) {
      if (ex.legal[a] && c.probs[a] > kProbFloor) g[a] = -ex.pi_target[a] / c.probs[a];
      mean_g += g[a] * c.probs[a];
    }
    for (std::size_t a = 0; a < A; ++a) {
      dlogits[a] = (ex.legal[a] ? c.probs[a] * (g[a] - mean_g) : 0.0) + beta * sign(c.logits[a]);
    }
    const double dv = 2.0 * (c.value - ex.e);
    const double ds = dv * c.value * (1.0 - c.value);

    const std::vector<double>& h_last = final_hidden(c);
    outer_add(gat(L.policy_w), A, h, dlogits.data(), h_last.data());
    for (std::size_t a = 0; a < A; ++a) gat(L.policy_b)[a] += dlogits[a];
    outer_add(gat(L.value_w), 1, h, &ds, h_last.data());
    gat(L.value_b)[0] += ds;

    std::fill(dh.begin(), dh.end(), 0.0);
    matvec_t_add(at(L.policy_w), A, h, dlogits.data(), dh.data());
    matvec_t_add(at(L.value_w), 1, h, &ds, dh.data());

    for (std::size_t step = dims.max_length; step-- > 0;) {
      const StepCache& s = c.steps[step];
      const double* x = at(L.embedding) + s.token * d;
      std::fill(dx.begin(), dx.end(), 0.0);
      for (std::size_t i = 0; i < h; ++i) {
        const double dn = dh[i] * (1.0 - s.z[i]);
        const double dz = dh[i] * (s.h_prev[i] - s.n[i]);
        dh_prev[i] = dh[i] * s.z[i];
        da_n[i] = dn * (1.0 - s.n[i] * s.n[i]);
        const double dr = da_n[i] * s.u[i];
        du[i] = da_n[i] * s.r[i];
        da_r[i] = dr * s.r[i] * (1.0 - s.r[i]);
        da_z[i] = dz * s.z[i] * (1.0 - s.z[i]);
      }
      outer_add(gat(L.wn), h, d, da_n.data(), x);
      outer_add(gat(L.un), h, h, du.data(), s.h_prev.data());
      outer_add(gat(L.wr), h, d, da_r.data(), x);
      outer_add(gat(L.ur), h, h, da_r.data(), s.h_prev.data());
      outer_add(gat(L.wz), h, d, da_z.data(), x);
      outer_add(gat(L.uz), h, h, da_z.data(), s.h_prev.data());
      for (std::size_t i = 0; i < h; ++i) {
        gat(L.bn)[i] += da_n[i];
        gat(L.br)[i] += da_r[i];
        gat(L.bz)[i] += da_z[i];
      }
      matvec_t_add(at(L.wn), h, d, da_n.data(), dx.data());
      matvec_t_add(at(L.wr), h, d, da_r.data(), dx.data());
      matvec_t_add(at(L.wz), h, d, da_z.data(), dx.data());
      matvec_t_add(at(L.un), h, h, du.data(), dh_prev.data());
      matvec_t_add(at(L.ur), h, h, da_r.data(), dh_prev.data());
      matvec_t_add(at(L.uz), h, h, da_z.data(), dh_prev.data());
      double* demb = gat(L.embedding) + s.token * d;
      for (std::size_t j = 0; j < d; ++j) demb[j] += dx[j];
      dh.swap(dh_prev);
    }

    std::vector<double> da0(h);
    for (std::size_t i = 0; i < h; ++i) da0[i] = dh[i] * (1.0 - c.h0[i] * c.h0[i]);
    outer_add(gat(L.context_w), h, kContextWidth, da0.data(), c.context.data());
    for (std::size_t i = 0; i < h; ++i) gat(L.context_b)[i] += da0[i];
  }

  const LossTerms lt = finish_terms(params, sum, batch.size());
  if (terms != nullptr) *terms = lt;
  const double inv = 1.0 / static_cast<double>(batch.size());
  const double two_alpha = 2.0 * params.hyper().alpha;
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = grad[i] * inv + two_alpha * theta[i];
  return grad;
}

double train_step(NetParams& params, std::span<const TrainingExample> batch, double learning_rate) {
  LossTerms terms;
  const std::vector<double> grad = gradient(params, batch, &terms);
  for (double g : grad) {
    if (!std::isfinite(g)) throw NumericError("gradient", "non-finite gradient entry");
  }
  auto& theta = params.theta();
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= learning_rate * grad[i];
  return terms.total();
}

void save_checkpoint(const NetParams& params, const Catalog& catalog, const std::string& path) {
  const NetDims& d = params.dims();
  nlohmann::json groups = nlohmann::json::object();
  for (const auto& g : params.groups()) {
    const auto v = params.view(g);
    groups[g.name] = {{"shape", {g.rows, g.cols}}, {"data", std::vector<double>(v.begin(), v.end())}};
  }
  nlohmann::json doc = {
      {"version", 1},
      {"catalog_hash", catalog.hash()},
      {"dims", {{"n", d.primitives}, {"L_max", d.max_length}, {"A", d.actions}, {"d", d.embed}, {"h", d.hidden}}},
      {"hyper",
       {{"alpha", params.hyper().alpha}, {"beta", params.hyper().beta}, {"learning_rate", params.hyper().learning_rate}}},
      {"params", groups},
      {"catalog", catalog.document()},
  };
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write checkpoint '" + path + "'");
  out << doc.dump() << '\n';
  if (!out) throw Error(ErrorKind::kIo, "failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path, const Catalog* catalog) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open checkpoint '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::kParse, "checkpoint '" + path + "': " + e.what());
  }
  try {
    if (doc.at("version").get<int>() != 1) {
      throw Error(ErrorKind::kShape, "unsupported checkpoint version " + doc.at("version").dump());
    }
    Checkpoint out;
    out.catalog_hash = doc.at("catalog_hash").get<std::string>();
    if (catalog != nullptr && catalog->hash() != out.catalog_hash) {
      throw Error(ErrorKind::kShape, "checkpoint was trained for catalog " + out.catalog_hash + ", active catalog is " +
                                         catalog->hash());
    }
    const auto& jd = doc.at("dims");
    NetDims dims;
    dims.primitives = jd.at("n").get<std::size_t>();
    dims.max_length = jd.at("L_max").get<std::size_t>();
    dims.actions = jd.at("A").get<std::size_t>();
    dims.embed = jd.at("d").get<std::size_t>();
    dims.hidden = jd.at("h").get<std::size_t>();
    if (dims.actions != action_space_size(dims.primitives, static_cast<int>(dims.max_length))) {
      throw Error(ErrorKind::kShape, "checkpoint action count does not match its catalog size");
    }
    if (catalog != nullptr && dims.primitives != catalog->size()) {
      throw Error(ErrorKind::kShape, "checkpoint catalog size differs from the active catalog");
    }
    NetHyper hyper;
    if (doc.contains("hyper")) {
      const auto& jh = doc["hyper"];
      hyper.alpha = jh.value("alpha", hyper.alpha);
      hyper.beta = jh.value("beta", hyper.beta);
      hyper.learning_rate = jh.value("learning_rate", hyper.learning_rate);
    }
    NetParams params(dims, hyper);
    const auto& jp = doc.at("params");
    for (const auto& g : params.groups()) {
      const auto& entry = jp.at(g.name);
      const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
      const auto data = entry.at("data").get<std::vector<double>>();
      if (shape.size() != 2 || shape[0] != g.rows || shape[1] != g.cols || data.size() != g.size()) {
        throw Error(ErrorKind::kShape, "parameter group '" + g.name + "' has the wrong shape");
      }
      std::copy(data.begin(), data.end(), params.view(g).begin());
    }
    out.params = std::move(params);
    if (doc.contains("catalog")) out.catalog_document = doc["catalog"];
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, "checkpoint '" + path + "': " + e.what());
  }
}

PolicyValue NetPrior::predict(const GameState& state, std::span<const std::uint8_t> legal) const {
  const StateVector v = encode_state(state, catalog_, rules_);
  PolicyValueOutput out = forward(params_, v, legal);
  return {std::move(out.probs), out.value};
}

}  // namespace pipeforge
