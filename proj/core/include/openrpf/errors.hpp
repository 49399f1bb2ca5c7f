#pragma once

#include <stdexcept>
#include <string>

namespace openrpf {

// Bad input: malformed config, out-of-range parameters, cone membership.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Orbit windows refuse to wrap around their ends.
class WindowExceeded : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double last_residual)
      : std::runtime_error(what), last_residual_(last_residual) {}
  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_residual_;
};

class InvariantViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace openrpf
