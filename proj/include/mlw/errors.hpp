#pragma once

#include <stdexcept>
#include <string>

namespace mlw {

/// Base class of everything this library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the mathematical domain of a function
/// (lambda = 0 in a power law, a non-positive Beta argument, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A value violates a documented type invariant or precondition.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// The data or the current iterate make a computation impossible:
/// singular matrices, degenerate periodograms, failed estimation.
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace mlw
