#pragma once

#include <stdexcept>
#include <string>

namespace fare {

/// Base for every error the core library raises. The C API maps each subclass
/// onto a distinct status code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters or configuration documents.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Mismatched matrix, vector or crossbar dimensions.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Block mapping cannot place every surviving block on a crossbar.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace fare
