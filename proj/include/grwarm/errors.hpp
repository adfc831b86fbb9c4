#pragma once

#include <stdexcept>
#include <string>

namespace grwarm {

/// Invalid argument or configuration value (out of range, wrong sign, ...).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Operand sizes disagree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation produced or received a non-finite value.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The requested quantity is undefined at this point (e.g. division by a zero norm).
class SingularityError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace grwarm
