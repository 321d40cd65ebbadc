#include "rkocp/error.hpp"

namespace rkocp {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidTableau: return "InvalidTableau";
    case ErrorKind::AdjointUndefined: return "AdjointUndefined";
    case ErrorKind::NotFound: return "NotFound";
    case ErrorKind::DegenerateFamily: return "DegenerateFamily";
    case ErrorKind::InvalidProblem: return "InvalidProblem";
    case ErrorKind::StepTooLarge: return "StepTooLarge";
    case ErrorKind::RiccatiFailure: return "RiccatiFailure";
    case ErrorKind::RolloutDiverged: return "RolloutDiverged";
    case ErrorKind::BackwardFailure: return "BackwardFailure";
    case ErrorKind::LineSearchFailed: return "LineSearchFailed";
    case ErrorKind::NotConverged: return "NotConverged";
    case ErrorKind::CostateFailure: return "CostateFailure";
    case ErrorKind::NodeControlFailure: return "NodeControlFailure";
    case ErrorKind::OracleFailure: return "OracleFailure";
    case ErrorKind::NeedsReference: return "NeedsReference";
    case ErrorKind::NoFit: return "NoFit";
    case ErrorKind::ParseError: return "ParseError";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

}  // namespace rkocp
