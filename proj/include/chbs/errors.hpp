// errors.hpp -- exception taxonomy shared by all solver components.
#pragma once

#include <stdexcept>
#include <string>

namespace chbs {

// Base class so callers can catch everything from this library at once.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Argument outside the mathematical domain of an operation (e.g. phase
// values at or beyond the singular endpoints of a logarithmic nonlinearity).
struct DomainError : Error { using Error::Error; };

// Structurally invalid construction input (grid dimensions, option values).
struct ConfigError : Error { using Error::Error; };

// Array extents inconsistent with the grid they are claimed to live on.
struct ShapeError : Error { using Error::Error; };

// Operation invoked with a parameter/linkage combination outside the
// supported coupling matrix (e.g. L > 0 together with sigma = 0).
struct RegimeError : Error { using Error::Error; };

// Right-hand side fails the zero-generalized-mean compatibility condition.
struct MeanError : Error { using Error::Error; };

// Iterative linear solver stalled or exceeded its iteration budget.
struct SolverError : Error { using Error::Error; };

// Nonlinear iteration failed to reach tolerance within its budgets.
struct ConvergenceError : Error { using Error::Error; };

// Invalid initial data for a trajectory (mean out of range, values too
// close to the singular endpoints for the exact nonlinearity).
struct InitError : Error { using Error::Error; };

// Invalid parameter for a diagnostic or fitting routine.
struct ParamError : Error { using Error::Error; };

// A fit was requested on data the model cannot represent (e.g. a power-law
// fit on a sequence that decays faster than any power law).
struct FitError : Error { using Error::Error; };

// Config text could not be parsed; message carries line information.
struct ParseError : Error { using Error::Error; };

// Parsed config is syntactically fine but semantically inadmissible;
// message aggregates every violated field.
struct ValidationError : Error { using Error::Error; };

// Checkpoint file is unreadable, truncated, or inconsistent with the
// run configuration it is being resumed under.
struct CheckpointError : Error { using Error::Error; };

}  // namespace chbs
