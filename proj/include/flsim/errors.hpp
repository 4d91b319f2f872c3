#pragma once

#include <stdexcept>
#include <string>

namespace flsim {

// Raised when a config or input violates a structural invariant.
// The CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when the learning/gap parameters leave the contractive regime,
// i.e. the iteration-bound denominator is non-positive. CLI exit code 3.
class DivergentRegimeError : public std::runtime_error {
 public:
  explicit DivergentRegimeError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace flsim
