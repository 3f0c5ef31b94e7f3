// diagnostics.hpp -- separation margins, level-set decay, rate fits.

#pragma once

#include <vector>

#include "chbs/fields.hpp"
#include "chbs/grid.hpp"
#include "chbs/pair.hpp"
#include "chbs/params.hpp"

namespace chbs {

// Distance from saturation: 1 - max |phi| over bulk and boundary nodes.
// Positive values mean the profile is strictly separated from +-1.
double separation_delta(const SlabGrid& g, const BulkSurfacePair& phi);

// Measure (bulk weights plus boundary weights) of the superlevel set
// {phi >= level} resp. the sublevel set {phi <= level}.
double measure_above(const SlabGrid& g, const BulkSurfacePair& phi,
                     double level);
double measure_below(const SlabGrid& g, const BulkSurfacePair& phi,
                     double level);

// Geometric level ladder k_n = 1 - delta - delta / 2^n, n = 0..count-1.
std::vector<double> level_ladder(double delta, int count);

// Superlevel measures along the ladder, for both saturation signs:
// z_n = |{phi >= k_n}| + |{phi <= -k_n}|.
std::vector<double> ladder_measures(const SlabGrid& g,
                                    const BulkSurfacePair& phi,
                                    const std::vector<double>& levels);

// Smallness threshold for the iteration lemma with constants (C, b, eps).
double decay_threshold(double c_const, double b_const, double eps);

struct DecayReport {
  double threshold = 0.0;   // the varsigma above
  bool pass = false;        // z_0 below threshold and geometric decay after
  int first_violation = -1; // index of the first failing level, -1 if none
};

// Checks z_0 <= varsigma and z_n <= varsigma * b^(-n/eps) with a relative
// slack of 1e-12.  Throws ParamError for C <= 0, b <= 1, or eps outside
// (0, 1).
DecayReport check_level_decay(const std::vector<double>& z, double c_const,
                              double b_const, double eps);

struct DissipationTerms {
  double bulk_gradient = 0.0;
  double surface_gradient = 0.0;
  double kinetic_jump = 0.0;
  double total = 0.0;  // equals the coupling form applied to (mu, theta)
};

// Splits a(mu, mu) into its three quadratic parts; `mu` carries the bulk
// potential with the boundary potential in the surface slot.
DissipationTerms dissipation_terms(const SlabGrid& g, const ModelParams& p,
                                   const BulkSurfacePair& mu);

struct RateFit {
  double p = 0.0;           // exponent of (1 + t)^(-p)
  double theta_star = 0.0;  // p / (1 + 2 p)
  double prefactor = 0.0;
  double rms = 0.0;         // ln-space residual of the fit
  int used = 0;             // samples that entered the fit
};

// Least-squares fit of ln d = ln prefactor - p * ln(1 + t) over samples with
// t >= 1 and d above the noise floor (1e-13).  Throws FitError when fewer
// than 10 usable samples remain or when the decay is visibly not a power law
// (large ln-space rms; exponentially converging data trips this).
RateFit fit_convergence_rate(const std::vector<double>& times,
                             const std::vector<double>& dists);

// Plain distances between profiles under the quadrature weights.
double l2_distance(const SlabGrid& g, const BulkSurfacePair& a,
                   const BulkSurfacePair& b);
double h1_distance(const SlabGrid& g, const BulkSurfacePair& a,
                   const BulkSurfacePair& b);

struct EnergyAudit {
  double max_increase = 0.0;    // max over steps of E_{n+1} - E_n
  double max_balance_gap = 0.0; // max of E_{n+1} - E_n + tau * D_{n+1}
};

// Step-to-step audit of the dissipation inequality from sampled energies
// E_n and dissipation values D_n (aligned, D_n evaluated at state n).
EnergyAudit energy_balance_audit(const std::vector<double>& energies,
                                 const std::vector<double>& dissipations,
                                 double tau);

}  // namespace chbs
