#pragma once

#include <stdexcept>
#include <string>

namespace milthrow {

// Invalid input data, arguments, or configuration. The CLI maps this to exit 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Environment or runtime failures (I/O, corruption, divergence). CLI exit 2.
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace milthrow
