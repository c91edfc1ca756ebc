#pragma once

#include <stdexcept>
#include <string>

namespace pathcv {

// Bad input: out-of-range parameters, malformed scenarios, length mismatches.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A control variate whose variance vanishes, e.g. log-return controls under sigma = 0.
class DegenerateControlError : public ValidationError {
 public:
  explicit DegenerateControlError(const std::string& what)
      : ValidationError("degenerate control: " + what) {}
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pathcv
