#pragma once

#include <stdexcept>
#include <string>

namespace flrr {

/// Bad input: malformed data, violated preconditions, inconsistent dimensions.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The numerics failed on otherwise valid input (singular systems,
/// degenerate residuals, non-finite objectives).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace flrr
