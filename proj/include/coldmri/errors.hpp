#pragma once

#include <stdexcept>
#include <string>

namespace coldmri {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data violates a value precondition (non-finite entries, zero reference norm).
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

/// Operands disagree on height/width.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A step index lies outside [0, T] (or outside the range an operation accepts).
class IndexError : public Error {
 public:
  using Error::Error;
};

/// Parameters are individually valid but mutually inconsistent.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// The task sampling rate falls below the schedule minimum SR_T.
class UnsupportedRateError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// An operation was called out of sequence (e.g. backward before forward).
class StateError : public Error {
 public:
  using Error::Error;
};

/// File-format or filesystem failure.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace coldmri
