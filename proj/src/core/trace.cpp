#include "core/trace.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "core/errors.hpp"

namespace pipeforge {

using nlohmann::json;

std::string_view to_string(GameStatus status) {
  switch (status) {
    case GameStatus::kOk:
      return "ok";
    case GameStatus::kFailedPipeline:
      return "failed_pipeline";
    case GameStatus::kBudgetExhausted:
      return "budget_exhausted";
  }
  return "failed_pipeline";
}

GameStatus parse_game_status(std::string_view text) {
  for (GameStatus s : {GameStatus::kOk, GameStatus::kFailedPipeline, GameStatus::kBudgetExhausted}) {
    if (to_string(s) == text) return s;
  }
  throw Error(ErrorKind::kParse, "unknown game status '" + std::string(text) + "'");
}

std::vector<EditAction> GameTrace::actions(const Catalog& cat) const {
  const ActionCodec codec(cat.size(), rules.max_length);
  std::vector<EditAction> out;
  out.reserve(moves.size());
  for (const auto& m : moves) {
    if (m.action >= codec.size()) {
      throw ReplayError(static_cast<std::size_t>(m.move), "action index " + std::to_string(m.action) + " out of range");
    }
    out.push_back(codec.decode(m.action));
  }
  return out;
}

std::string trace_to_jsonl(const GameTrace& trace) {
  std::string out;
  for (const auto& m : trace.moves) {
    json line = {{"move", m.move}, {"state_vec", m.state_vec}, {"legal", m.legal}, {"pi", m.pi}, {"action", m.action}};
    out += line.dump() + "\n";
  }
  json final_line = {{"final_pipeline", trace.final_pipeline},
                     {"evaluation", trace.evaluation},
                     {"status", to_string(trace.status)},
                     {"dataset", trace.dataset},
                     {"task", task_to_json(trace.task)},
                     {"meta", trace.meta},
                     {"max_length", trace.rules.max_length},
                     {"max_moves", trace.rules.max_moves},
                     {"catalog_hash", trace.catalog_hash},
                     {"catalog", trace.catalog}};
  out += final_line.dump() + "\n";
  return out;
}

GameTrace trace_from_jsonl(const std::string& text) {
  GameTrace trace;
  bool have_final = false;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "trace line " + std::to_string(line_no);
    if (have_final) throw Error(ErrorKind::kParse, where + ": content after the final record");
    json doc = json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw Error(ErrorKind::kParse, where + ": not a JSON object");
    try {
      if (doc.contains("final_pipeline")) {
        trace.final_pipeline = doc.at("final_pipeline").get<std::vector<std::string>>();
        trace.evaluation = doc.at("evaluation").get<double>();
        trace.status = parse_game_status(doc.at("status").get<std::string>());
        trace.dataset = doc.value("dataset", std::string());
        trace.task = task_from_json(doc.at("task"));
        const auto meta = doc.at("meta").get<std::vector<double>>();
        if (meta.size() != kMetaFeatureCount) throw Error(ErrorKind::kParse, "meta must have 16 entries");
        std::copy(meta.begin(), meta.end(), trace.meta.begin());
        trace.rules.max_length = doc.at("max_length").get<int>();
        trace.rules.max_moves = doc.at("max_moves").get<int>();
        trace.catalog_hash = doc.value("catalog_hash", std::string());
        trace.catalog = doc.at("catalog");
        have_final = true;
      } else {
        MoveRecord m;
        m.move = doc.at("move").get<int>();
        m.state_vec = doc.at("state_vec").get<std::vector<double>>();
        m.legal = doc.at("legal").get<std::vector<std::size_t>>();
        m.pi = doc.at("pi").get<std::vector<double>>();
        m.action = doc.at("action").get<std::size_t>();
        if (m.pi.size() != m.legal.size()) throw Error(ErrorKind::kParse, "pi and legal differ in length");
        trace.moves.push_back(std::move(m));
      }
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kParse, where + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorKind::kParse, where + ": " + e.what());
    }
  }
  if (!have_final) throw Error(ErrorKind::kParse, "trace has no final record");
  return trace;
}

void write_trace(const GameTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write trace '" + path + "'");
  out << trace_to_jsonl(trace);
  if (!out) throw Error(ErrorKind::kIo, "failed writing trace '" + path + "'");
}

GameTrace read_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot read trace '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return trace_from_jsonl(buf.str());
}

namespace {

ReplayCheck fail(int move, std::string reason) { return {false, move, std::move(reason)}; }

std::vector<std::size_t> legal_indices(const std::vector<std::uint8_t>& mask) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) out.push_back(i);
  }
  return out;
}

}  // namespace

ReplayCheck check_replay(const GameTrace& trace) {
  const Catalog catalog = Catalog::from_json(trace.catalog);
  const ActionCodec codec(catalog.size(), trace.rules.max_length);
  GameState state = trace.initial();
  for (std::size_t k = 0; k < trace.moves.size(); ++k) {
    const MoveRecord& m = trace.moves[k];
    if (m.move != static_cast<int>(k)) return fail(static_cast<int>(k), "move numbers out of sequence");
    if (is_terminal(state, trace.rules)) return fail(m.move, "state already terminal");
    if (encode_state(state, catalog, trace.rules) != m.state_vec) return fail(m.move, "state vector differs");
    if (legal_indices(legal_actions(state, catalog, trace.rules)) != m.legal) return fail(m.move, "legal set differs");
    if (m.action >= codec.size()) return fail(m.move, "action index out of range");
    try {
      state = apply_action(state, codec.decode(m.action), catalog, trace.rules);
    } catch (const Error& e) {
      return fail(m.move, e.what());
    }
  }
  const int end = static_cast<int>(trace.moves.size());
  if (pipeline_ids(catalog, state.pipeline) != trace.final_pipeline) return fail(end, "final pipeline differs");
  const bool should_commit = trace.status != GameStatus::kBudgetExhausted;
  if (!trace.moves.empty() && state.committed != should_commit) return fail(end, "status does not match the replay");
  return {};
}

namespace {

std::string join_ids(const std::vector<std::string>& ids) {
  std::string out = "[";
  for (std::size_t i = 0; i < ids.size(); ++i) out += (i ? ", " : "") + ids[i];
  return out + "]";
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

ReplayCheck explain(const GameTrace& trace, std::ostream& out) {
  const ReplayCheck check = check_replay(trace);
  const Catalog catalog = Catalog::from_json(trace.catalog);
  const ActionCodec codec(catalog.size(), trace.rules.max_length);
  out << "dataset: " << (trace.dataset.empty() ? "-" : trace.dataset) << " (" << to_string(trace.task.kind) << ", "
      << to_string(trace.task.metric) << ")\n";
  out << "initial pipeline: []\n";
  for (const auto& m : trace.moves) {
    const double top = m.pi.empty() ? 0.0 : *std::max_element(m.pi.begin(), m.pi.end());
    const std::string what =
        m.action < codec.size() ? describe(codec.decode(m.action), catalog) : "action " + std::to_string(m.action);
    out << "move " << m.move << ": " << what << "; π(top)=" << fixed(top, 2) << "\n";
  }
  if (!trace.moves.empty()) {
    out << "final pipeline: " << join_ids(trace.final_pipeline) << "\n";
    out << "e = " << fixed(trace.evaluation, 4) << " (" << to_string(trace.status) << ")\n";
  }
  if (check.ok) {
    out << "replay check: OK\n";
  } else {
    out << "reason: " << check.reason << "\n";
    out << "replay check: FAILED at move " << check.failed_move << "\n";
  }
  return check;
}

}  // namespace pipeforge
