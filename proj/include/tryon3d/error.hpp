#pragma once

#include <stdexcept>
#include <string>

namespace tryon3d {

// Bad or inconsistent input: missing files, malformed formats, dimension
// mismatches, violated preconditions.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure inside an otherwise valid call (singular systems etc.).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tryon3d
