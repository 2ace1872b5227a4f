#pragma once

#include <stdexcept>
#include <string>

namespace m3dsim {

// Base of every error the simulator raises. The CLI maps subclasses onto
// exit codes: ConfigError -> 2, everything else -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or invalid configuration, profile, or manifest.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Bad trace contents or trace I/O failure.
class TraceError : public Error {
 public:
  using Error::Error;
};

// Operation called outside its precondition (empty input, undefined ratio).
class DomainError : public Error {
 public:
  using Error::Error;
};

}  // namespace m3dsim
