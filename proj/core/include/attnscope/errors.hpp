#pragma once

#include <stdexcept>
#include <string>

namespace attnscope {

// Base class for everything thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor shapes do not line up. The message names both shapes.
struct DimensionError : Error {
  using Error::Error;
};

// A documented precondition was violated by the caller.
struct ContractError : Error {
  using Error::Error;
};

// Invalid run configuration (bad flag value, key, or config file entry).
struct ConfigError : Error {
  using Error::Error;
};

// Numerical failure at run time: NaN loss, degenerate softmax, exploded norms.
struct NumericError : Error {
  using Error::Error;
};

// Malformed or incompatible file (checkpoint magic/version, report schema).
struct FormatError : Error {
  using Error::Error;
};

// Artifacts that must belong together do not (checkpoint vs. trace hash).
struct IntegrityError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace attnscope
