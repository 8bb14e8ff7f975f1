#pragma once

#include <stdexcept>
#include <string>

namespace sohcast {

// Exit-code mapping used by the C API and CLI lives in capi.cpp; the
// classes here mark which contract was violated.

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid configuration or an architecture that contradicts strict shapes.
struct ConfigError : Error {
    using Error::Error;
};

// Malformed or inconsistent input data (schema, monotonicity, lengths).
struct DataError : Error {
    using Error::Error;
};

// Tensor / layer shape mismatch.
struct DimensionError : Error {
    using Error::Error;
};

// Parameter outside its mathematical domain (sigma <= 0 and friends).
struct DomainError : Error {
    using Error::Error;
};

// API preconditions (non-scalar backward root, weight/pool size mismatch).
struct ContractError : Error {
    using Error::Error;
};

// Non-finite value encountered in a numeric routine.
struct NumericError : Error {
    using Error::Error;
};

// Training diverged or could not proceed.
struct TrainingError : Error {
    using Error::Error;
};

// Weight fitting failed (degenerate objective).
struct FittingError : Error {
    using Error::Error;
};

// Run directory has no trained pool.
struct MissingPoolError : Error {
    using Error::Error;
};

// Run manifest unreadable or inconsistent with the artifacts on disk.
struct ManifestError : Error {
    using Error::Error;
};

}  // namespace sohcast
