#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "core/evaluation.hpp"

namespace pipeforge {

inline constexpr int kProtocolVersion = 1;
inline constexpr const char* kEvaluatorEnvVar = "PIPEFORGE_EVALUATOR";

nlohmann::json make_request(const EvaluationRequest& request, std::int64_t id);

// Checks a response line against the protocol and the EvaluationResult
// invariants. Throws Error(kEvaluator) describing the first violation.
EvaluationResult parse_response(const nlohmann::json& response, std::int64_t expected_id);

// Client for an evaluator process speaking newline-delimited JSON on its
// stdin/stdout. The process is started lazily with /bin/sh -c <command>,
// and restarted after a timeout, a dead peer or an unparseable line. One
// request in flight at a time.
class ExternalEvaluator final : public PipelineEvaluator {
 public:
  explicit ExternalEvaluator(std::string command,
                             std::chrono::milliseconds timeout = std::chrono::seconds(120));
  ~ExternalEvaluator() override;
  ExternalEvaluator(const ExternalEvaluator&) = delete;
  ExternalEvaluator& operator=(const ExternalEvaluator&) = delete;

  EvaluationResult evaluate(const EvaluationRequest& request) override;

  std::size_t requests() const { return requests_; }
  std::size_t violations() const { return violations_; }
  std::size_t restarts() const { return starts_ > 0 ? starts_ - 1 : 0; }

 private:
  void start();
  void stop();
  void send_line(const std::string& line);
  std::string read_line();

  std::string command_;
  std::chrono::milliseconds timeout_;
  int pid_ = -1;
  int fd_ = -1;
  std::string pending_;
  std::int64_t next_id_ = 1;
  std::size_t requests_ = 0;
  std::size_t violations_ = 0;
  std::size_t starts_ = 0;
};

}  // namespace pipeforge
