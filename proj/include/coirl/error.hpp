#pragma once

#include <stdexcept>
#include <string>

namespace coirl {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: wrong dimensions, out-of-range values, bad config.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A context that is not a point of the probability simplex.
class InvalidContext : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// Operation called on an object that cannot serve it (e.g. empty library).
class InvalidState : public Error {
 public:
  using Error::Error;
};

/// GPI requested on a CMDP whose dynamics depend on the context.
class UnsupportedDynamics : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// Failures of numerical routines (non-convergence, degenerate geometry).
class NumericalError : public Error {
 public:
  using Error::Error;
};

class NonConvergence : public NumericalError {
 public:
  NonConvergence(const std::string& what, double residual)
      : NumericalError(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class DegenerateCut : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DegenerateStep : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace coirl
