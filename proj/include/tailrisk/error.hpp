#pragma once

#include <stdexcept>
#include <string>

namespace tailrisk {

/// Bad user input: malformed files, invalid arguments, inconsistent shapes.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The numerics failed: degenerate samples, exploding paths, no valid start.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tailrisk
