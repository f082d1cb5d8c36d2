#pragma once

#include <stdexcept>
#include <string>

namespace ohflux {

/// Bad user input: malformed data, non-finite samples, mismatched grids.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration: unknown keys, bad parameter values, CFL violations.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The discrete solution became non-finite.
class BlowUpError : public std::runtime_error {
 public:
  BlowUpError(std::string const& what, std::size_t step)
      : std::runtime_error(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// A runtime-checked property of the scheme failed.
class InvariantViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical integration did not reach the requested tolerance.
class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ohflux
