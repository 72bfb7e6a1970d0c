#include "core/external.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>

#include "core/errors.hpp"

namespace pipeforge {

using nlohmann::json;

json make_request(const EvaluationRequest& request, std::int64_t id) {
  json pipeline = json::array();
  for (const auto& p : request.pipeline) pipeline.push_back({{"id", p.id}, {"defaults", p.defaults}});
  return {{"v", kProtocolVersion},
          {"id", id},
          {"op", "evaluate"},
          {"pipeline", std::move(pipeline)},
          {"dataset_path", request.dataset != nullptr ? request.dataset->path : std::string()},
          {"task", task_to_json(request.task)},
          {"folds", request.folds},
          {"seed", request.seed}};
}

namespace {

[[noreturn]] void violation(const std::string& what) { throw Error(ErrorKind::kEvaluator, what); }

double number_field(const json& doc, const char* key) {
  if (!doc.contains(key) || !doc[key].is_number()) violation(std::string("missing or non-numeric '") + key + "'");
  const double v = doc[key].get<double>();
  if (!std::isfinite(v)) violation(std::string("non-finite '") + key + "'");
  return v;
}

}  // namespace

EvaluationResult parse_response(const json& response, std::int64_t expected_id) {
  if (!response.is_object()) violation("response is not an object");
  if (!response.contains("v") || response["v"] != kProtocolVersion) violation("protocol version mismatch");
  if (!response.contains("id") || !response["id"].is_number_integer() ||
      response["id"].get<std::int64_t>() != expected_id) {
    violation("response id does not match request " + std::to_string(expected_id));
  }
  EvaluationResult r;
  r.e = number_field(response, "e");
  if (r.e < 0.0 || r.e > 1.0) violation("e out of range [0, 1]");
  r.raw_metric = number_field(response, "raw");
  if (!response.contains("fold_scores") || !response["fold_scores"].is_array()) violation("missing 'fold_scores'");
  for (const auto& s : response["fold_scores"]) {
    if (!s.is_number()) violation("non-numeric fold score");
    r.fold_scores.push_back(s.get<double>());
  }
  if (!response.contains("status") || !response["status"].is_string()) violation("missing 'status'");
  try {
    r.status = parse_eval_status(response["status"].get<std::string>());
  } catch (const Error&) {
    violation("unknown status '" + response["status"].get<std::string>() + "'");
  }
  if (!r.ok() && r.e != 0.0) violation("non-ok status with nonzero e");
  return r;
}

ExternalEvaluator::ExternalEvaluator(std::string command, std::chrono::milliseconds timeout)
    : command_(std::move(command)), timeout_(timeout) {
  if (command_.empty()) throw Error(ErrorKind::kInvalidArgument, "empty evaluator command");
}

ExternalEvaluator::~ExternalEvaluator() { stop(); }

void ExternalEvaluator::start() {
  int sv[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0) {
    throw Error(ErrorKind::kEvaluator, std::string("socketpair: ") + std::strerror(errno));
  }
  const pid_t pid = ::fork();
  if (pid < 0) {
    ::close(sv[0]);
    ::close(sv[1]);
    throw Error(ErrorKind::kEvaluator, std::string("fork: ") + std::strerror(errno));
  }
  if (pid == 0) {
    // Own process group so stop() also reaches anything the shell spawned.
    ::setpgid(0, 0);
    ::dup2(sv[1], STDIN_FILENO);
    ::dup2(sv[1], STDOUT_FILENO);
    ::close(sv[0]);
    ::close(sv[1]);
    ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::setpgid(pid, pid);
  ::close(sv[1]);
  pid_ = pid;
  fd_ = sv[0];
  pending_.clear();
  ++starts_;
  send_line(json{{"v", kProtocolVersion}, {"role", "engine"}}.dump());
  const json hello = json::parse(read_line(), nullptr, false);
  if (hello.is_discarded() || !hello.is_object() || hello.value("v", json()) != kProtocolVersion ||
      hello.value("role", std::string()) != "evaluator") {
    stop();
    throw Error(ErrorKind::kEvaluator, "evaluator handshake failed (protocol version mismatch)");
  }
}

void ExternalEvaluator::stop() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
  if (pid_ > 0) {
    ::kill(-pid_, SIGKILL);
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, nullptr, 0);
  }
  pid_ = -1;
  pending_.clear();
}

void ExternalEvaluator::send_line(const std::string& line) {
  std::string data = line + "\n";
  std::size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t n = ::send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorKind::kEvaluator, std::string("evaluator write failed: ") + std::strerror(errno));
    }
    sent += static_cast<std::size_t>(n);
  }
}

std::string ExternalEvaluator::read_line() {
  const auto deadline = std::chrono::steady_clock::now() + timeout_;
  for (;;) {
    if (const auto nl = pending_.find('\n'); nl != std::string::npos) {
      std::string line = pending_.substr(0, nl);
      pending_.erase(0, nl + 1);
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) throw Error(ErrorKind::kEvaluator, "evaluator timed out");
    pollfd p{fd_, POLLIN, 0};
    const int ready = ::poll(&p, 1, static_cast<int>(std::min<long long>(left.count(), 1 << 30)));
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorKind::kEvaluator, std::string("poll: ") + std::strerror(errno));
    }
    if (ready == 0) continue;
    char buf[4096];
    const ssize_t n = ::read(fd_, buf, sizeof buf);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw Error(ErrorKind::kEvaluator, "evaluator closed its output");
    pending_.append(buf, static_cast<std::size_t>(n));
  }
}

EvaluationResult ExternalEvaluator::evaluate(const EvaluationRequest& request) {
  const auto t0 = std::chrono::steady_clock::now();
  ++requests_;
  const std::int64_t id = next_id_++;
  std::string line;
  try {
    if (fd_ < 0) start();
    send_line(make_request(request, id).dump());
    line = read_line();
  } catch (const Error& e) {
    stop();
    return failed_result(EvalStatus::kRuntimeFailure, e.what());
  }
  const json response = json::parse(line, nullptr, false);
  if (response.is_discarded()) {
    ++violations_;
    stop();
    return failed_result(EvalStatus::kRuntimeFailure, "malformed evaluator response");
  }
  try {
    EvaluationResult r = parse_response(response, id);
    r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
  } catch (const Error& e) {
    ++violations_;
    return failed_result(EvalStatus::kRuntimeFailure, e.what());
  }
}

}  // namespace pipeforge
