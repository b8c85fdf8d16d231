#pragma once

#include <stdexcept>
#include <string>

namespace qdot {

// Base class for all toolkit errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid configuration or command usage (CLI exit code 2).
struct ConfigError : Error {
    using Error::Error;
};

// Malformed or missing input data: unreadable files, unsorted streams (CLI exit code 2).
struct InputError : Error {
    using Error::Error;
};

// Numerical failure: degenerate steady state, undefined correlation,
// grid too coarse for the requested kernel, zero-rate normalization.
struct NumericsError : Error {
    using Error::Error;
};

// Fit could not be carried out: singular curvature, unidentifiable
// parameter, unresolved dip. Non-convergence is NOT an error (flagged
// in FitResult instead).
struct FitError : Error {
    using Error::Error;
};

// Configured resource cap exceeded (event-count overflow guard).
struct ResourceError : Error {
    using Error::Error;
};

} // namespace qdot
