#pragma once

#include <stdexcept>
#include <string>

namespace perfdyn {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input: dimension mismatch, out-of-domain parameter, malformed config.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A computation produced a non-finite value or failed to converge.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Non-finite state encountered while iterating a trajectory.
class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, long step)
      : NumericalError(what + " (step " + std::to_string(step) + ")"), step_(step) {}

  long step() const noexcept { return step_; }

 private:
  long step_;
};

}  // namespace perfdyn
