#pragma once

#include <stdexcept>
#include <string>

namespace rbal {

// Base class for all library failures.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad user-supplied configuration (resolutions, ranges, flags).
struct ConfigError : Error {
    using Error::Error;
};

// Input data violates a documented invariant (zero section row,
// mismatched dimensions, missing weight tags, ...).
struct ValidationError : Error {
    using Error::Error;
};

// A matrix is too ill-conditioned to proceed (cond > 1e12 guardrail).
struct ConditioningError : Error {
    using Error::Error;
};

// A candidate metric degenerates on the grid (non-positive g at a point).
struct GeometryError : Error {
    using Error::Error;
};

}  // namespace rbal
