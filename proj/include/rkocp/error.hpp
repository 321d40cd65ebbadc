#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rkocp {

enum class ErrorKind {
  InvalidTableau,
  AdjointUndefined,
  NotFound,
  DegenerateFamily,
  InvalidProblem,
  StepTooLarge,
  RiccatiFailure,
  RolloutDiverged,
  BackwardFailure,
  LineSearchFailed,
  NotConverged,
  CostateFailure,
  NodeControlFailure,
  OracleFailure,
  NeedsReference,
  NoFit,
  ParseError,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Base exception for every failure reported by the library. The kind is the
/// stable, testable part; the message carries context for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace rkocp
