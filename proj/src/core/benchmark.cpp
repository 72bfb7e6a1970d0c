#include "core/benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "core/errors.hpp"

namespace pipeforge {

using nlohmann::json;

PipelineSampler::PipelineSampler(const Catalog& catalog, TaskKind task, int max_length) {
  if (max_length < 1) throw Error(ErrorKind::kInvalidArgument, "max_length must be >= 1");
  by_category_.resize(4);
  for (std::size_t o = 0; o < catalog.size(); ++o) {
    const auto& p = catalog.at(o);
    if (p.supports(task)) by_category_[static_cast<std::size_t>(p.category)].push_back(static_cast<int>(o));
  }
  const int prefix_max = max_length - 1;
  ways_.assign(static_cast<std::size_t>(prefix_max) + 1, std::vector<double>(4, 0.0));
  for (int c = 0; c <= 3; ++c) ways_[0][static_cast<std::size_t>(c)] = 1.0;
  for (int k = 1; k <= prefix_max; ++k) {
    for (int c = 2; c >= 0; --c) {
      double w = 0.0;
      for (int c2 = c; c2 <= 2; ++c2) w += static_cast<double>(by_category_[static_cast<std::size_t>(c2)].size()) * ways(k - 1, c2);
      ways_[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)] = w;
    }
    ways_[static_cast<std::size_t>(k)][3] = 0.0;
  }
  const double estimators = static_cast<double>(by_category_[3].size());
  by_length_.assign(static_cast<std::size_t>(max_length) + 1, 0.0);
  for (int len = 1; len <= max_length; ++len) {
    by_length_[static_cast<std::size_t>(len)] = ways(len - 1, 0) * estimators;
    total_ += by_length_[static_cast<std::size_t>(len)];
  }
  if (total_ <= 0.0) throw Error(ErrorKind::kInvalidArgument, "no valid pipeline for this task");
}

Pipeline PipelineSampler::sample(Rng& rng) const {
  auto pick = [&rng](const std::vector<double>& weights) {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    double u = rng.uniform() * total;
    std::size_t last = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] <= 0.0) continue;
      last = i;
      if (u < weights[i]) return i;
      u -= weights[i];
    }
    return last;
  };
  const auto len = static_cast<int>(pick(by_length_));
  Pipeline out;
  int min_category = 0;
  for (int k = len - 1; k >= 1; --k) {
    // choose the next primitive so that k-1 more remain
    std::vector<double> w;
    std::vector<std::pair<int, int>> choice;  // (ordinal, category)
    for (int c = min_category; c <= 2; ++c) {
      for (int o : by_category_[static_cast<std::size_t>(c)]) {
        w.push_back(ways(k - 1, c));
        choice.emplace_back(o, c);
      }
    }
    const auto& [ordinal, category] = choice[pick(w)];
    out.push_back(ordinal);
    min_category = category;
  }
  const auto& est = by_category_[3];
  out.push_back(est[static_cast<std::size_t>(rng.below(est.size()))]);
  return out;
}

BenchmarkConfig BenchmarkConfig::from_json(const json& doc, const std::string& base_dir) {
  static const std::set<std::string> keys = {"checkpoint", "datasets", "seed",  "repeats",
                                             "simulations", "c_puct",  "folds", "max_moves"};
  if (!doc.is_object()) throw Error(ErrorKind::kParse, "benchmark config must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (!keys.count(key)) throw Error(ErrorKind::kParse, "unknown benchmark config key '" + key + "'");
  }
  BenchmarkConfig c;
  try {
    if (doc.contains("checkpoint")) {
      const std::string cp = doc.at("checkpoint").get<std::string>();
      c.checkpoint = std::filesystem::path(cp).is_absolute() ? cp : (std::filesystem::path(base_dir) / cp).lexically_normal().string();
    }
    c.datasets = parse_dataset_entries(doc.at("datasets"), base_dir);
    c.seed = doc.value("seed", c.seed);
    c.repeats = doc.value("repeats", c.repeats);
    c.simulations = doc.value("simulations", c.simulations);
    c.c_puct = doc.value("c_puct", c.c_puct);
    c.folds = doc.value("folds", c.folds);
    c.max_moves = doc.value("max_moves", c.max_moves);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("benchmark config: ") + e.what());
  }
  if (c.datasets.empty()) throw Error(ErrorKind::kInvalidArgument, "benchmark config lists no datasets");
  if (c.repeats < 1) throw Error(ErrorKind::kInvalidArgument, "repeats must be >= 1");
  if (c.folds < 2) throw Error(ErrorKind::kInvalidArgument, "folds must be >= 2");
  if (c.max_moves < 1) throw Error(ErrorKind::kInvalidArgument, "max_moves must be >= 1");
  return c;
}

BenchmarkConfig BenchmarkConfig::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot read benchmark config '" + path + "'");
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorKind::kParse, "benchmark config '" + path + "' is not valid JSON");
  const std::string dir = std::filesystem::path(path).parent_path().string();
  return from_json(doc, dir.empty() ? "." : dir);
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

json BenchmarkRow::to_json() const {
  return {{"dataset", dataset},
          {"engine_mean", mean_of(engine)},
          {"engine_std", std_of(engine)},
          {"baseline_mean", mean_of(baseline)},
          {"baseline_std", std_of(baseline)},
          {"random_mean", mean_of(random)},
          {"random_std", std_of(random)},
          {"engine", engine},
          {"baseline", baseline},
          {"random", random},
          {"evaluations", evaluations},
          {"random_evaluations", random_evaluations}};
}

double random_search(const Catalog& catalog, const GameEnv& env, int max_length, std::size_t budget, Rng& rng) {
  const PipelineSampler sampler(catalog, env.task.kind, max_length);
  const auto reachable = static_cast<std::size_t>(std::min(sampler.count(), static_cast<double>(budget)));
  PipelineReward reward(catalog, *env.evaluator, env.dataset, env.task, env.folds, env.eval_seed);
  std::set<Pipeline> seen;
  double best = 0.0;
  while (seen.size() < reachable) {
    Pipeline p = sampler.sample(rng);
    if (!seen.insert(p).second) continue;
    best = std::max(best, reward.evaluate(p).e);
  }
  return best;
}

std::vector<BenchmarkRow> run_benchmark(const BenchmarkConfig& config, const Catalog& catalog,
                                        const NetParams& params, const std::string& external_evaluator) {
  const GameRules rules{static_cast<int>(params.dims().max_length), config.max_moves};
  const NetPrior prior(params, catalog, rules);
  std::vector<BenchmarkRow> rows;
  for (const auto& entry : config.datasets) {
    BenchmarkRow row;
    row.dataset = entry.name;
    for (int r = 0; r < config.repeats; ++r) {
      const std::uint64_t seed = derive_seed(config.seed, static_cast<std::uint64_t>(r));
      // Fresh caches per repeat so evaluation counts are per method.
      Environments engine_env({entry}, catalog, config.folds, seed, external_evaluator);
      PlayOptions options;
      options.greedy = true;
      options.search.simulations = config.simulations;
      options.search.c = config.c_puct;
      options.search.seed = seed;
      const GameTrace trace = play_game(prior, catalog, rules, engine_env.envs()[0], options, seed);
      const std::size_t budget = engine_env.evaluations();
      row.engine.push_back(trace.evaluation);
      row.evaluations.push_back(budget);

      Environments other_env({entry}, catalog, config.folds, seed, external_evaluator);
      const GameEnv& env = other_env.envs()[0];
      EvaluationRequest request;
      request.pipeline = baseline_pipeline();
      request.dataset = env.dataset;
      request.task = env.task;
      request.folds = env.folds;
      request.seed = env.eval_seed;
      const EvaluationResult base = env.evaluator->evaluate(request);
      row.baseline.push_back(base.ok() ? base.e : 0.0);

      Rng rng(derive_seed(seed, 0xBADC0DE));
      Environments random_env({entry}, catalog, config.folds, seed, external_evaluator);
      row.random.push_back(random_search(catalog, random_env.envs()[0], rules.max_length, budget, rng));
      row.random_evaluations.push_back(random_env.evaluations());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

std::string cell(const std::vector<double>& v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f ± %.4f", mean_of(v), std_of(v));
  return buf;
}

}  // namespace

std::string format_table(const std::vector<BenchmarkRow>& rows) {
  std::vector<std::vector<std::string>> cells = {{"dataset", "engine", "baseline_sgd", "random_search", "evaluations"}};
  for (const auto& row : rows) {
    std::vector<double> evals(row.evaluations.begin(), row.evaluations.end());
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", mean_of(evals));
    cells.push_back({row.dataset, cell(row.engine), cell(row.baseline), cell(row.random), buf});
  }
  // "±" is two bytes but one column wide
  auto width = [](const std::string& s) {
    std::size_t w = 0;
    for (unsigned char ch : s) w += (ch & 0xC0) != 0x80;
    return w;
  };
  std::vector<std::size_t> widths(cells[0].size(), 0);
  for (const auto& line : cells) {
    for (std::size_t i = 0; i < line.size(); ++i) widths[i] = std::max(widths[i], width(line[i]));
  }
  std::string out;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    std::string line;
    for (std::size_t i = 0; i < cells[r].size(); ++i) {
      if (i) line += "  ";
      line += cells[r][i] + std::string(widths[i] - width(cells[r][i]), ' ');
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
    if (r == 0) {
      std::size_t total = 0;
      for (std::size_t w : widths) total += w;
      out += std::string(total + 2 * (widths.size() - 1), '-') + "\n";
    }
  }
  return out;
}

}  // namespace pipeforge
