#pragma once

#include <stdexcept>
#include <string>

namespace pearl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller broke a documented precondition (bad sizes, empty inputs, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Malformed or unreadable embedding / model file.
class LoadError : public Error {
 public:
  using Error::Error;
};

/// A class has too few members for the requested fold count.
class StratificationError : public Error {
 public:
  using Error::Error;
};

/// A fit could not be completed (singular scatter, degenerate prototype, ...).
class FitError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf appeared in an activation or loss.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace pearl
