#pragma once

#include <stdexcept>
#include <string>

namespace uabs {

/// Machine-readable failure categories. The CLI prints the category name on
/// stderr so callers can branch on it without parsing prose.
enum class ErrorCategory {
  AllZero,
  NegativeWeight,
  NonFinite,
  OutOfVocab,
  ShapeMismatch,
  UnknownInput,
  InvalidConfig,
  NoFinishedHypothesis,
  SearchSpaceTooLarge,
  UnsortedEdges,
  DegenerateVariance,
  WorldMismatch,
  SchemaVersionMismatch,
  InvariantViolation,
  Io,
};

const char* to_string(ErrorCategory category) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory category, const std::string& message) {
  throw Error(category, message);
}

}  // namespace uabs
