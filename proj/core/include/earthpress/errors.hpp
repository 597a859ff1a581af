#pragma once

#include <stdexcept>
#include <string>

namespace earthpress {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Pressure field with fewer than two knots or otherwise malformed.
class InvalidFieldError : public Error {
 public:
  using Error::Error;
};

/// Scenario, model or sampler settings that violate an invariant.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// The assembled lining system cannot be solved for the given load.
class SingularSystemError : public Error {
 public:
  using Error::Error;
};

/// A requested angle does not coincide with a mesh node.
class LookupError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Every retained sample of a parameter is identical, so the
/// within-chain variance vanishes.
class DegenerateVarianceError : public Error {
 public:
  using Error::Error;
};

/// A chain was asked to move from a state with zero posterior density.
class InvalidStateError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace earthpress
