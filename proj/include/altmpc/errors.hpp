#pragma once

#include <stdexcept>
#include <string>

namespace altmpc {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Non-finite or structurally malformed input (empty sequence, length mismatch).
struct InvalidInputError : Error {
    using Error::Error;
};

/// Parameter outside its admissible range (tau <= 0, dt_sub > dt, ...).
struct InvalidParameterError : Error {
    using Error::Error;
};

/// Regression on step-response data could not produce a usable time constant.
struct IdentificationError : Error {
    using Error::Error;
};

/// Scenario geometry is degenerate (lane narrower than the vehicle, ...).
struct InvalidScenarioError : Error {
    using Error::Error;
};

/// QP with inconsistent dimensions or a non-affine construction.
struct InvalidProblemError : Error {
    using Error::Error;
};

/// A planner subproblem failed in a way slacks cannot absorb.
struct PlannerFailureError : Error {
    using Error::Error;
};

/// Malformed scenario/config file; message carries the offending field or line.
struct ParseError : Error {
    using Error::Error;
};

/// File could not be opened or written.
struct IoError : Error {
    using Error::Error;
};

}  // namespace altmpc
