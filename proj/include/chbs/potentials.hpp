// potentials.hpp -- double-well free-energy densities F = beta_hat + pi_hat,
// their monotone derivative beta, the Lipschitz remainder pi, and the
// Moreau--Yosida regularization (resolvent, yosida_beta, moreau_envelope).
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "chbs/errors.hpp"

namespace chbs {

enum class PotentialKind { Logarithmic, Custom };
enum class Side { Bulk, Boundary };

struct Deriv {
  double value = 0.0;
  double deriv = 0.0;
};

// User-supplied nonlinearity.  beta must be monotone increasing with
// beta(0) = 0; beta_hat is its convex primitive with beta_hat(0) = 0;
// pi is globally Lipschitz with concave primitive pi_hat.  If `singular`
// is set, beta is defined on (-1,1) and beta_hat extends continuously to
// the endpoints with the declared values (may be +infinity).
struct CustomPotential {
  std::function<double(double)> beta;
  std::function<double(double)> beta_prime;
  std::function<double(double)> beta_hat;
  std::function<double(double)> pi;
  std::function<double(double)> pi_prime;
  std::function<double(double)> pi_hat;
  bool singular = false;
  double beta_hat_pos_end = 0.0;  // value of beta_hat at +1 (singular kinds)
  double beta_hat_neg_end = 0.0;  // value of beta_hat at -1 (singular kinds)
};

// One side (bulk or boundary) of the potential pair.
struct PotentialSide {
  PotentialKind kind = PotentialKind::Logarithmic;
  double theta = 1.0;    // absolute temperature (logarithmic kind)
  double theta_c = 0.0;  // critical temperature (logarithmic kind)
  CustomPotential custom;

  bool singular() const {
    return kind == PotentialKind::Logarithmic || custom.singular;
  }
};

// Potential pair with the bulk/boundary domination constants: the bulk
// derivative is controlled by the boundary one, |beta| <= rho*|beta_G| + c0.
struct PotentialSpec {
  PotentialSide bulk;
  PotentialSide boundary;
  double rho = 1.0;
  double c0 = 0.0;

  // Logarithmic density (theta/2)[(1+r)ln(1+r)+(1-r)ln(1-r)] - (theta_c/2)r^2
  // on both sides.
  static PotentialSpec logarithmic(double theta, double theta_c);

  // Custom nonlinearity, same on both sides.
  static PotentialSpec custom(CustomPotential c);
};

// Regularization parameters for the Yosida approximation.
struct YosidaConfig {
  double epsilon = 1e-2;     // in (0,1)
  double newton_tol = 1e-13; // residual tolerance for the resolvent solve
  int max_iter = 100;
};

struct ResolventResult {
  double j = 0.0;        // resolvent value J_eps(r), strictly inside (-1,1)
                         // for singular kinds
  double beta_j = 0.0;   // beta(J), evaluated coherently with the solve
  double dbeta_j = 0.0;  // beta'(J) (may be +inf at clamped endpoints)
  double residual = 0.0; // |J + eps*beta(J) - r| (boundary: eps*rho)
  int iterations = 0;
};

// beta and its derivative at r.  Throws DomainError if |r| >= 1 for a
// singular kind.
Deriv eval_beta(const PotentialSpec& spec, Side side, double r);

// pi and its derivative at r (defined on all of R).
Deriv eval_pi(const PotentialSpec& spec, Side side, double r);

// Convex part beta_hat at r; finite endpoint limits are used at |r| = 1
// (theta*ln 2 for the logarithmic kind).  Throws DomainError if |r| > 1
// for a singular kind.
double eval_beta_hat(const PotentialSpec& spec, Side side, double r);

// Concave part pi_hat at r.
double eval_pi_hat(const PotentialSpec& spec, Side side, double r);

// Full density F = beta_hat + pi_hat (bulk) or G (boundary).
double eval_energy_density(const PotentialSpec& spec, Side side, double r);

// Resolvent J solving J + eps*beta(J) = r (bulk) or J + eps*rho*beta_G(J) = r
// (boundary).  Well-defined for every real r; for singular kinds the result
// stays strictly inside (-1,1).
ResolventResult resolvent(const PotentialSpec& spec, Side side, double r,
                          const YosidaConfig& cfg);

// Yosida approximation beta_eps(r) = (r - J)/eps (boundary: /(eps*rho)) and
// its derivative beta'(J)/(1 + eps*beta'(J)); globally Lipschitz with
// constant 1/eps (1/(eps*rho)).
Deriv yosida_beta(const PotentialSpec& spec, Side side, double r,
                  const YosidaConfig& cfg);

// Moreau envelope (1/(2 eps))|r - J|^2 + beta_hat(J) (boundary: eps*rho in
// the quadratic weight).  Equals the integral of beta_eps from 0 to r.
// Unlike beta_hat itself it is finite for all real r, including |r| > 1:
// the resolvent pulls the argument back inside the singular domain, so the
// regularized density is the natural extension used by regularized runs.
double moreau_envelope(const PotentialSpec& spec, Side side, double r,
                       const YosidaConfig& cfg);

// Structural-assumption audit, sampled on `sample_count` points (>= 100).
// mbar0 is the conserved generalized mean used by the coercivity fit
// beta(r)*(r - mbar0) >= c3*|beta(r)| - c4.
struct AssumptionReport {
  bool a1_pass = false;      // monotonicity + normalization, both sides
  bool a2_pass = false;      // |beta| <= rho*|beta_G| + c0 on samples
  bool a5_pass = false;      // log-log growth exponent kappa > 0.51
  bool a5_applicable = false;
  bool coercivity_pass = false;  // fitted (c3, c4) validated on a finer grid
  double varpi_bulk = 0.0;
  double varpi_boundary = 0.0;
  double a2_max_violation = 0.0;
  double lipschitz_pi_bulk = 0.0;
  double lipschitz_pi_boundary = 0.0;
  double a5_kappa_bulk = 0.0;
  double a5_kappa_boundary = 0.0;
  double c3 = 0.0;
  double c4 = 0.0;
  std::vector<std::string> warnings;

  bool pass() const;
  std::string to_text() const;  // flat "key = value" lines
};

AssumptionReport check_assumptions(const PotentialSpec& spec, int sample_count,
                                   double mbar0);

}  // namespace chbs
