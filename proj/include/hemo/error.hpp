#pragma once

#include <stdexcept>
#include <string>

namespace hemo {

// Failure kinds raised by the library. The CLI maps the category of a kind
// onto its exit code (data errors -> 2, numerical failures -> 3).
enum class ErrorKind {
  // data / contract errors
  MalformedFile,
  VersionMismatch,
  DegenerateFace,
  DimensionMismatch,
  OutOfBounds,
  NonPositiveHyperparameter,
  NonPositiveParameter,
  BudgetTooSmall,
  InvalidArgument,
  // numerical failures
  FactorizationFailure,
  NonFiniteObjective,
  SolverStall,
  SingularDesign,
  ZeroKernel,
  AllPointsFailed,
  DegenerateVariance,
};

const char* to_string(ErrorKind kind) noexcept;
bool is_numerical(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::MalformedFile: return "MalformedFile";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::DegenerateFace: return "DegenerateFace";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::OutOfBounds: return "OutOfBounds";
    case ErrorKind::NonPositiveHyperparameter: return "NonPositiveHyperparameter";
    case ErrorKind::NonPositiveParameter: return "NonPositiveParameter";
    case ErrorKind::BudgetTooSmall: return "BudgetTooSmall";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::FactorizationFailure: return "FactorizationFailure";
    case ErrorKind::NonFiniteObjective: return "NonFiniteObjective";
    case ErrorKind::SolverStall: return "SolverStall";
    case ErrorKind::SingularDesign: return "SingularDesign";
    case ErrorKind::ZeroKernel: return "ZeroKernel";
    case ErrorKind::AllPointsFailed: return "AllPointsFailed";
    case ErrorKind::DegenerateVariance: return "DegenerateVariance";
  }
  return "Unknown";
}

inline bool is_numerical(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::FactorizationFailure:
    case ErrorKind::NonFiniteObjective:
    case ErrorKind::SolverStall:
    case ErrorKind::SingularDesign:
    case ErrorKind::ZeroKernel:
    case ErrorKind::AllPointsFailed:
    case ErrorKind::DegenerateVariance:
      return true;
    default:
      return false;
  }
}

}  // namespace hemo
