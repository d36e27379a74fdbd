#pragma once
// Exception hierarchy. The CLI maps each family onto a process exit code.

#include <stdexcept>
#include <string>

namespace mfdyn {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Arguments living on different grids / bases, or wrong matrix sizes.
struct ShapeError : Error {
  using Error::Error;
};

// Potential narrower than the lattice can represent.
struct ResolutionError : Error {
  using Error::Error;
};

// Gram matrix of a trial orbital set too close to singular.
struct IllConditionedError : Error {
  using Error::Error;
};

// Caller broke a documented precondition (stale time stamp, wrong state kind).
struct ContractViolation : Error {
  using Error::Error;
};

// NaN, Krylov stagnation, step size underflow.
struct NumericalFailure : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

// A property that must hold exactly (lemma inequality, identity) did not.
struct LemmaViolation : Error {
  using Error::Error;
};

inline void require_shape(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

}  // namespace mfdyn
