// fields.hpp -- pair-level operations: generalized mean, zero-mean
// projection, total energy, and the inverse-operator (dual) norms.
#pragma once

#include "chbs/grid.hpp"
#include "chbs/pair.hpp"
#include "chbs/params.hpp"
#include "chbs/potentials.hpp"

namespace chbs {

// Pair with the surface component set to the trace of the bulk one.
BulkSurfacePair make_trace_linked(const SlabGrid& g, Field bulk);

// Copy the boundary rows of the bulk component into the surface component.
void sync_trace(const SlabGrid& g, BulkSurfacePair& y);

// Shape/linkage sanity; throws ShapeError.
void check_pair(const SlabGrid& g, const BulkSurfacePair& y, const char* who);

// Measure-weighted mean over bulk and surface combined:
//   (|O|<y>_O + |G|<y_G>_G) / (|O| + |G|).
double generalized_mean(const SlabGrid& g, const BulkSurfacePair& y);

// Subtract the generalized mean from both components (idempotent).
void project_zero_mean(const SlabGrid& g, BulkSurfacePair& y);

// E = 1/2 a_bulk(phi,phi) + 1/2 a_surf(psi,psi) + int F(phi) + int_G G(psi).
// Throws DomainError when a singular density is evaluated outside [-1,1].
double total_energy(const SlabGrid& g, const PotentialSpec& spec,
                    const BulkSurfacePair& phi);

// Same with the convex parts replaced by their Moreau envelopes; finite for
// arguments beyond [-1,1], which regularized trajectories may visit.
double total_energy_regularized(const SlabGrid& g, const PotentialSpec& spec,
                                const YosidaConfig& yos,
                                const BulkSurfacePair& phi);

struct HminusOptions {
  double tol = 1e-11;       // relative residual target
  int max_iter = 200000;    // conjugate-gradient iteration budget
  double mean_tol = 1e-12;  // compatibility tolerance on the rhs mean
};

// Solve the coupled elliptic problem  a_{L,sigma}(u, z) = (rhs, z)_h  for the
// zero-mean pair u, by conjugate gradients with per-iteration mean
// re-projection.  The rhs must have zero generalized mean (MeanError).  For
// L = 0 the surface unknown is the trace of the bulk one and the returned
// pair is trace-linked; the surface right-hand side still acts through the
// traces of the test functions.  SolverError if the budget is exhausted.
BulkSurfacePair hminus_solve(const SlabGrid& g, double L, double sigma,
                             const BulkSurfacePair& rhs,
                             const HminusOptions& opts = {});

// || y ||_* = sqrt( a(S Py, S Py) + mean(y)^2 ), the inverse-operator norm
// with the mean-squared correction; for zero-mean y this is the plain dual
// seminorm.
double hminus_norm(const SlabGrid& g, double L, double sigma,
                   const BulkSurfacePair& y, const HminusOptions& opts = {});

}  // namespace chbs
