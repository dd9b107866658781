#pragma once

#include <stdexcept>
#include <string>

namespace coopcause {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user input: scenario files, datasets, flags. The CLI maps it to exit 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A well-formed request that has no defined answer (total conflict,
/// empty vote, undefined confidence). The CLI maps it to exit 1.
class DomainError : public Error {
 public:
  using Error::Error;
};

}  // namespace coopcause
