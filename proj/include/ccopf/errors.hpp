#pragma once

#include <stdexcept>
#include <string>

namespace ccopf {

// Malformed case-file text (missing table, bad token, ...).
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Structurally well-formed input that violates a model invariant.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Common base for per-sample solver failures; callers that iterate over
// samples may treat these as recoverable and skip the sample.
struct SolveError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Newton iteration did not reach tolerance.
struct PowerFlowDivergence : SolveError {
  double last_residual;
  int iterations;
  PowerFlowDivergence(double residual, int iters)
      : SolveError("power flow diverged: residual " + std::to_string(residual) + " after " +
                   std::to_string(iters) + " iterations"),
        last_residual(residual),
        iterations(iters) {}
};

// Singular power-flow Jacobian (voltage-collapse proximity) or singular branch.
struct SingularityError : SolveError {
  using SolveError::SolveError;
};

// Training abandoned (e.g. too many power-flow failures in one epoch).
struct TrainingAbort : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ccopf
