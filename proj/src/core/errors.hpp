#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pipeforge {

// Every error raised by the core derives from Error and carries a kind that
// the C boundary maps onto a status code.
enum class ErrorKind {
  kInvalidArgument,
  kIo,
  kParse,
  kCatalog,
  kUnknownPrimitive,
  kIllegalAction,
  kTerminalState,
  kShape,
  kNumeric,
  kDataset,
  kEvaluator,
  kReplay,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

class CatalogError : public Error {
 public:
  CatalogError(const std::string& offending_id, const std::string& message)
      : Error(ErrorKind::kCatalog, message), offending_id_(offending_id) {}
  const std::string& offending_id() const { return offending_id_; }

 private:
  std::string offending_id_;
};

class UnknownPrimitiveError : public Error {
 public:
  explicit UnknownPrimitiveError(const std::string& id)
      : Error(ErrorKind::kUnknownPrimitive, "unknown primitive id '" + id + "'"),
        id_(id) {}
  const std::string& id() const { return id_; }

 private:
  std::string id_;
};

class IllegalActionError : public Error {
 public:
  IllegalActionError(const std::string& rule, const std::string& message)
      : Error(ErrorKind::kIllegalAction, message), rule_(rule) {}
  // Short name of the violated rule, e.g. "category-order" or "position".
  const std::string& rule() const { return rule_; }

 private:
  std::string rule_;
};

class ReplayError : public Error {
 public:
  ReplayError(std::size_t move_index, const std::string& message)
      : Error(ErrorKind::kReplay, message), move_index_(move_index) {}
  std::size_t move_index() const { return move_index_; }

 private:
  std::size_t move_index_;
};

class NumericError : public Error {
 public:
  NumericError(const std::string& term, const std::string& message)
      : Error(ErrorKind::kNumeric, message), term_(term) {}
  const std::string& term() const { return term_; }

 private:
  std::string term_;
};

}  // namespace pipeforge
