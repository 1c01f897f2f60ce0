#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bnpc {

enum class ErrorKind {
  NotPositiveDefinite,
  InvalidParameter,
  DimensionMismatch,
  DegenerateData,
  ConfigError,
  MissingDataUnsupported,
  AllMissingColumn,
  ZeroEvidence,
  CallbackFailure,
  EmptySelection,
  SharpRddViolation,
  InsufficientBoundaryData,
  ZeroTreatmentMass,
  ParseError,
  NonBinaryTreatment,
  EmptyFile,
  IncompatibleEstimand,
  IoError,
};

std::string_view error_kind_name(ErrorKind kind);

// Numerical failures get their own CLI exit code; everything else is a
// validation problem with the inputs or configuration.
bool is_numerical(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace bnpc
