#pragma once

#include <stdexcept>
#include <string>

namespace sortition {

enum class ErrorKind {
  MissingColumn,
  UnknownValue,
  NonpositiveWeight,
  InvalidSchema,
  EmptyDataset,
  SchemaMismatch,
  EmptyPool,
  InfeasibleCap,
  NumericalFailure,
  Stalled,
  IterationLimit,
  QuotaViolation,
  Diverged,
  MissingHouseholdColumn,
  QuotaInfeasible,
  RestartLimit,
  BadPool,
  InvalidArgument,
  Io,
};

inline const char *to_string(ErrorKind kind) {
  switch (kind) {
  case ErrorKind::MissingColumn: return "MissingColumn";
  case ErrorKind::UnknownValue: return "UnknownValue";
  case ErrorKind::NonpositiveWeight: return "NonpositiveWeight";
  case ErrorKind::InvalidSchema: return "InvalidSchema";
  case ErrorKind::EmptyDataset: return "EmptyDataset";
  case ErrorKind::SchemaMismatch: return "SchemaMismatch";
  case ErrorKind::EmptyPool: return "EmptyPool";
  case ErrorKind::InfeasibleCap: return "InfeasibleCap";
  case ErrorKind::NumericalFailure: return "NumericalFailure";
  case ErrorKind::Stalled: return "Stalled";
  case ErrorKind::IterationLimit: return "IterationLimit";
  case ErrorKind::QuotaViolation: return "QuotaViolation";
  case ErrorKind::Diverged: return "Diverged";
  case ErrorKind::MissingHouseholdColumn: return "MissingHouseholdColumn";
  case ErrorKind::QuotaInfeasible: return "QuotaInfeasible";
  case ErrorKind::RestartLimit: return "RestartLimit";
  case ErrorKind::BadPool: return "BadPool";
  case ErrorKind::InvalidArgument: return "InvalidArgument";
  case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable kind so
/// callers (notably the CLI) can map it onto exit codes.
class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string &message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

} // namespace sortition
