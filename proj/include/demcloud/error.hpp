#pragma once

#include <stdexcept>
#include <string>

namespace demcloud {

// Base of every error the library raises. The CLI maps the concrete
// subclass to its exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad flags or configuration values (exit code 1).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed, missing or mismatched input data (exit code 2).
class DataError : public Error {
 public:
  using Error::Error;
};

// Internal invariant violated, e.g. training diverged (exit code 3).
class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace demcloud
