// stationary.hpp -- steady states: constant chemical potential, fixed mean.
//
// A steady state of the flow has a spatially constant chemical potential
// shared by bulk and boundary.  The discrete problem solved here stacks the
// same merged potential rows the time stepper uses (so "stationary" means
// stationary for the discrete dynamics, not just in an asymptotic sense)
// plus one constraint row pinning the generalized mean, and treats the
// constant potential as the matching extra unknown.

#pragma once

#include "chbs/fields.hpp"
#include "chbs/grid.hpp"
#include "chbs/pair.hpp"
#include "chbs/params.hpp"

namespace chbs {

struct StationaryConfig {
  double tol = 1e-12;          // infinity norm of the merged rows
  int max_iter = 200;
  int max_backtracks = 60;
  double phase_cap = 1.0 - 1e-12;
};

struct StationaryResult {
  BulkSurfacePair phi;
  double mu_infty = 0.0;  // the constant chemical potential
  double residual = 0.0;  // achieved infinity norm
  int iterations = 0;
};

// The value the constant potential must take at a steady state with this
// profile: the measure-weighted average of the potential derivatives.
double mu_infty_formula(const SlabGrid& g, const ModelParams& p,
                        const BulkSurfacePair& phi);

// Infinity norm of the merged stationarity rows at `phi`, with the constant
// potential taken from mu_infty_formula.  Small values mean the profile is a
// steady state of the discrete flow.
double steady_residual(const SlabGrid& g, const ModelParams& p,
                       const BulkSurfacePair& phi);

// Damped Newton for the bordered system.  `guess` supplies the initial
// profile; its generalized mean is the conserved target.  Throws
// ConvergenceError when the iteration fails.
StationaryResult solve_stationary(const SlabGrid& g, const ModelParams& p,
                                  const BulkSurfacePair& guess,
                                  const StationaryConfig& cfg = {});

}  // namespace chbs
