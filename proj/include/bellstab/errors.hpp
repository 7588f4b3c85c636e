#pragma once

#include <stdexcept>
#include <string>

namespace bellstab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operands live on incompatible Hilbert spaces.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A value violates a documented invariant (non-normalized state, rate < 0, ...).
class InvariantError : public Error {
 public:
  using Error::Error;
};

/// Integration or root-finding went wrong: trace drift, fit failure, infeasible calibration.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Bad user configuration. The CLI maps this to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace bellstab
