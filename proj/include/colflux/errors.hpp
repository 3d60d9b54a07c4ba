#pragma once

#include <stdexcept>
#include <string>

namespace colflux {

/// Base of every error raised by the library. The CLI maps the concrete
/// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed call: length mismatch, time not on the grid, empty input.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// A standing modelling assumption (A1 smoothness, A2 ellipticity, A3 no
/// boundary advection) is violated by a coefficient profile.
class AssumptionError : public Error {
 public:
  AssumptionError(std::string assumption, const std::string& what)
      : Error(assumption + ": " + what), assumption_(std::move(assumption)) {}

  const std::string& assumption() const noexcept { return assumption_; }

 private:
  std::string assumption_;
};

/// Zero pivot in a tridiagonal factorisation.
class SingularityError : public Error {
 public:
  using Error::Error;
};

/// Eigensolver failure, CG stagnation, mode normalisation failure.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Forward solve produced non-finite values.
class StabilityError : public NumericalError {
 public:
  StabilityError(std::size_t step, const std::string& what)
      : NumericalError(what + " (step " + std::to_string(step) + ")"), step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// An empirical diagnostic could not be certified (e.g. no finite energy
/// constant below the search cap).
class DiagnosticError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// A function lies outside the form domain of the prior covariance.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Observation weight with negative samples.
class WeightPositivityError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

/// Seed function for a blind direction lies in the exponential span.
class DegenerateSeedError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Dense computation requested above its size cap.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Configuration schema violation; `path` is a JSON pointer to the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string path, const std::string& what)
      : Error(path + ": " + what), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace colflux
