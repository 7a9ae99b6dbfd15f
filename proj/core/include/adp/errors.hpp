#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace adp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent matrix or vector dimensions.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A block that must be inverted is (numerically) singular.
class SingularityError : public Error {
 public:
  using Error::Error;
};

/// A matrix required to be positive semidefinite is not.
class NotPsdError : public Error {
 public:
  using Error::Error;
};

/// A gain that must stabilize the closed loop does not.
class StabilityError : public Error {
 public:
  using Error::Error;
};

/// Invalid user configuration (out-of-range parameter, broken invariant).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Non-finite or otherwise unusable numeric input.
class InputError : public Error {
 public:
  using Error::Error;
};

/// A stochastic simulation produced a non-finite state.
class SimulationError : public Error {
 public:
  SimulationError(const std::string& what, std::size_t step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// NaN or Inf appeared inside an iterative solver.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, std::size_t iteration)
      : Error(what + " (iteration " + std::to_string(iteration) + ")"),
        iteration_(iteration) {}

  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

/// Least-squares identification with a rank-deficient regressor.
class IdentificationError : public Error {
 public:
  using Error::Error;
};

/// A report or snapshot could not be written.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace adp
