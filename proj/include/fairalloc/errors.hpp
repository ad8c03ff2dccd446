#pragma once

#include <stdexcept>
#include <string>

namespace fairalloc {

// Base of every error the library throws. The CLI maps the subclasses onto
// process exit codes (see tools/main.cpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Input data that fails validation (scores outside [0,1], bad capacities, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

// Simplex iteration cap exceeded.
class SolverStall : public SolverError {
 public:
  using SolverError::SolverError;
};

class InfeasibleError : public SolverError {
 public:
  using SolverError::SolverError;
};

// Raised when an offline benchmark cannot meet a rule's requirements, which
// means the rule is not ex-post feasible.
class RequirementInfeasible : public InfeasibleError {
 public:
  using InfeasibleError::InfeasibleError;
};

// A run broke a capacity or accounting invariant. Always a bug.
class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace fairalloc
