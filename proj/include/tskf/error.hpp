#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tskf {

enum class ErrorCode {
  EmptyInput,
  NonFinite,
  InvalidSegment,
  NotInTimeScale,
  StepTooLarge,
  UnknownName,
  BadParameter,
  NoValidSamples,
  NonMonotoneTimestamps,
  DimensionMismatch,
  NotPositiveDefinite,
  EmptyGrid,
  SingularInnovationCovariance,
  NonPositiveMu,
  GridTrajectoryMismatch,
  NumericDivergence,
  NoSignChange,
  TraceScaleMismatch,
  UnsupportedFormat,
  ConfigError,
  IoError,
  OracleMismatch,
};

std::string_view to_string(ErrorCode code) noexcept;

// All library failures are reported through this exception. The C API maps
// the code onto tskf_status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Raised when the filter or the truth simulation produces non-finite values.
class DivergenceError : public Error {
 public:
  DivergenceError(double t, double mu, const std::string& message)
      : Error(ErrorCode::NumericDivergence, message), t_(t), mu_(mu) {}

  double t() const noexcept { return t_; }
  double mu() const noexcept { return mu_; }

 private:
  double t_;
  double mu_;
};

}  // namespace tskf
