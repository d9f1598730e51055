#pragma once

#include <stdexcept>
#include <string>

namespace dtwin {

/// Bad input: malformed configuration, files or arguments that violate a
/// precondition. The CLI maps this to exit code 2.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical routine could not produce a result (singular solve, eigen
/// solver failure). The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dtwin
