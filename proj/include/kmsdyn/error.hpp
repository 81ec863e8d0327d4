#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kmsdyn {

/// Every failure the library reports carries one of these kinds.  The CLI maps
/// each kind to its own exit code.
enum class ErrorKind {
  Usage,
  InvalidArgument,
  SyntaxError,
  DegreeTooLow,
  DivisionByZeroPolynomial,
  NonConvergence,
  RootNotARoot,
  ExceptionalSeed,
  OutOfRegime,
  NotABranchPoint,
  WitnessNotFoundAtDepth,
  AtomBudgetExceeded,
  NotSubinvariant,
  InvalidSystem,
  InternalConsistency,
  Io,
};

inline constexpr std::string_view to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::Usage: return "Usage";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::SyntaxError: return "SyntaxError";
    case ErrorKind::DegreeTooLow: return "DegreeTooLow";
    case ErrorKind::DivisionByZeroPolynomial: return "DivisionByZeroPolynomial";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::RootNotARoot: return "RootNotARoot";
    case ErrorKind::ExceptionalSeed: return "ExceptionalSeed";
    case ErrorKind::OutOfRegime: return "OutOfRegime";
    case ErrorKind::NotABranchPoint: return "NotABranchPoint";
    case ErrorKind::WitnessNotFoundAtDepth: return "WitnessNotFoundAtDepth";
    case ErrorKind::AtomBudgetExceeded: return "AtomBudgetExceeded";
    case ErrorKind::NotSubinvariant: return "NotSubinvariant";
    case ErrorKind::InvalidSystem: return "InvalidSystem";
    case ErrorKind::InternalConsistency: return "InternalConsistency";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

/// Process exit code for an error kind; 0 is success, 1 is reserved for
/// unexpected exceptions.
inline constexpr int exit_code(ErrorKind k) { return 2 + static_cast<int>(k); }

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string detail)
      : std::runtime_error(std::string(to_string(kind)) + ": " + detail),
        kind_(kind),
        detail_(std::move(detail)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

}  // namespace kmsdyn
