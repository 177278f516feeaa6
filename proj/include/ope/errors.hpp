#pragma once

#include <stdexcept>
#include <string>

namespace ope {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid argument or configuration value.
struct ParameterError : Error {
  using Error::Error;
};

/// Dimension mismatch between objects (policy vs. MDP, tensors, ...).
struct ShapeError : Error {
  using Error::Error;
};

/// Malformed input file or JSON document.
struct ParseError : Error {
  using Error::Error;
};

/// File written by an incompatible schema version.
struct VersionError : ParseError {
  using ParseError::ParseError;
};

/// All self-normalization weights vanished at some time step.
struct DegenerateNormalizationError : Error {
  DegenerateNormalizationError(const std::string& what, int time_step)
      : Error(what), time_step(time_step) {}
  int time_step;
};

/// An estimator produced a non-finite value.
struct EstimatorError : Error {
  EstimatorError(const std::string& what, std::string estimator, std::string policy_id)
      : Error(what), estimator(std::move(estimator)), policy_id(std::move(policy_id)) {}
  std::string estimator;
  std::string policy_id;
};

/// Metric denominator degenerated to zero (e.g. all true values zero).
struct DegenerateInstanceError : Error {
  using Error::Error;
};

/// Rank correlation over a constant vector.
struct UndefinedCorrelationError : Error {
  using Error::Error;
};

}  // namespace ope
