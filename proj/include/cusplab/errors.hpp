#pragma once

#include <stdexcept>
#include <string>

namespace cusplab {

/// Base class for every signal raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A matrix entry would exceed the representable range (|entry| > 1e300).
class OverflowError : public Error {
 public:
  using Error::Error;
};

/// Determinant drifted too far from 1 to be renormalized safely.
class PrecisionLossError : public Error {
 public:
  using Error::Error;
};

/// An iterative estimate failed its convergence check.
class NonConvergenceError : public Error {
 public:
  using Error::Error;
};

/// A constructive search found no admissible candidate within its bounds.
class NotFoundError : public Error {
 public:
  using Error::Error;
};

/// Floating-point continued fraction expansion lost all significant digits.
class PrecisionWallError : public Error {
 public:
  using Error::Error;
};

/// Too few events or ensemble members for the requested statistic.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// Statistics too noisy to produce a consistent answer.
class InconclusiveError : public Error {
 public:
  using Error::Error;
};

/// A quantity that must be divided by is zero.
class DivisionByZeroError : public Error {
 public:
  using Error::Error;
};

/// Invalid experiment configuration; `field` names the offending entry.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message)
      : Error(field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace cusplab
