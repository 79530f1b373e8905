#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ntk {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (shape, range, kind).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// An iterative numerical routine failed (eigensolver, integrator).
class NumericalError : public Error {
 public:
  using Error::Error;
};

class NotPositiveDefinite : public NumericalError {
 public:
  NotPositiveDefinite(std::size_t pivot, double value)
      : NumericalError("matrix is not positive definite: pivot " + std::to_string(pivot) +
                       " has value " + std::to_string(value)),
        pivot_(pivot),
        value_(value) {}

  std::size_t pivot() const noexcept { return pivot_; }
  double value() const noexcept { return value_; }

 private:
  std::size_t pivot_;
  double value_;
};

class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, double residual)
      : NumericalError(what + " (last residual " + std::to_string(residual) + ")"),
        residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Parameters became non-finite during training.
class DivergenceError : public NumericalError {
 public:
  explicit DivergenceError(long step)
      : NumericalError("non-finite parameters after step " + std::to_string(step)), step_(step) {}

  long step() const noexcept { return step_; }

 private:
  long step_;
};

/// Euler integration in function space blew up.
class IntegratorError : public NumericalError {
 public:
  explicit IntegratorError(long step)
      : NumericalError("kernel gradient descent unstable: residual grew for 10 consecutive steps ending at step " +
                       std::to_string(step)),
        step_(step) {}

  long step() const noexcept { return step_; }

 private:
  long step_;
};

/// Malformed input file (bad magic, truncated payload, inconsistent files).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Payload shorter than its header promises.
class LengthError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Two files that must describe the same samples disagree.
class ConsistencyError : public FormatError {
 public:
  using FormatError::FormatError;
};

}  // namespace ntk
