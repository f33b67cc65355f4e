#pragma once

#include <stdexcept>
#include <string>

namespace gnmr {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes do not fit the operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A caller broke an operation's precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value (rates, grid, sensor names...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Graph configuration failed validation.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf reached a value that must be finite.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint or cache file could not be loaded.
class LoadError : public Error {
 public:
  using Error::Error;
};

/// Artifacts were produced for different graphs.
class CompatibilityError : public Error {
 public:
  using Error::Error;
};

}  // namespace gnmr
