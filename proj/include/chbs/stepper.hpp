// stepper.hpp -- implicit time stepping for the coupled bulk/boundary flow.
//
// One step solves the merged weak-form system for the new order parameter,
// bulk chemical potential, and (when the boundary relaxes at a finite rate)
// the boundary chemical potential.  The residual rows are the nodal weak
// equations divided by their quadrature weights, with the flux conditions
// folded into the boundary rows; summing the mass rows against the measure
// telescopes exactly, which is what makes conservation structural rather
// than approximate.

#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "chbs/fields.hpp"
#include "chbs/grid.hpp"
#include "chbs/pair.hpp"
#include "chbs/params.hpp"
#include "chbs/potentials.hpp"

namespace chbs {

// Treatment of the non-convex part of the potential: ConvexSplit keeps the
// convex part implicit and the concave part at the old state (unconditional
// energy decrease); FullyImplicit evaluates everything at the new state.
enum class Scheme { ConvexSplit, FullyImplicit };

struct StepConfig {
  double tau = 1e-3;
  Scheme scheme = Scheme::ConvexSplit;
  double newton_tol = 1e-10;   // infinity norm of the merged residual
  int newton_max = 50;
  int max_backtracks = 30;
  double phase_cap = 1.0 - 1e-12;  // hard barrier for the singular potential
  int max_bisections = 10;         // step-halving retries on a failed solve
};

// Unknowns of one implicit step.  `phi` and `mu` are trace-linked pairs;
// `theta` holds the boundary chemical potential (2*nx).  When L = 0 theta is
// not an unknown and mirrors the trace of mu.
struct StepUnknowns {
  BulkSurfacePair phi, mu;
  Field theta;
};

struct StepDiagnostics {
  double energy = 0.0;        // dissipated functional at the new state
  double mean = 0.0;          // generalized mean (conserved)
  double dissipation = 0.0;   // coupling form a(mu, mu) at the new state
  double separation = 0.0;    // 1 - max |phi|
  double defect = 0.0;        // accepted residual infinity norm
  int newton_iters = 0;       // summed over bisection segments
  int bisections = 0;         // extra halvings needed (0 normally)
};

// Evaluate the merged residual at the given unknowns; `phi_old` supplies both
// the previous state and the explicit point of the concave terms.  Row
// layout: the potential rows (n_bulk), the mass rows (n_bulk), then -- only
// when L > 0 -- the boundary relaxation rows (n_surf).
std::vector<double> step_residual(const SlabGrid& g, const ModelParams& p,
                                  Scheme scheme, double tau,
                                  const BulkSurfacePair& phi_old,
                                  const StepUnknowns& u);

// Number of unknowns (= residual rows) for the regime.
int step_system_size(const SlabGrid& g, const ModelParams& p);

// Flatten/unflatten between StepUnknowns and the Newton vector
// [phi; mu; theta?].  Surface traces are kept in sync on unflatten.
std::vector<double> pack_unknowns(const SlabGrid& g, const ModelParams& p,
                                  const StepUnknowns& u);
StepUnknowns unpack_unknowns(const SlabGrid& g, const ModelParams& p,
                             const std::vector<double>& x);

// One coefficient of the step Jacobian.  Each (row, col) position appears at
// most once in the list returned by step_jacobian.
struct MatrixEntry {
  int row = 0, col = 0;
  double value = 0.0;
};

// Analytic Jacobian of step_residual with respect to the packed unknowns,
// evaluated at `u`.  This is exactly the matrix the Newton solver factorizes;
// it is exposed so derivative consistency can be checked externally.
std::vector<MatrixEntry> step_jacobian(const SlabGrid& g, const ModelParams& p,
                                       Scheme scheme, double tau,
                                       const StepUnknowns& u);

class Stepper {
 public:
  Stepper(SlabGrid g, ModelParams p, StepConfig c);
  ~Stepper();
  Stepper(Stepper&&) noexcept;
  Stepper& operator=(Stepper&&) noexcept;

  const SlabGrid& grid() const { return grid_; }
  const ModelParams& params() const { return params_; }
  const StepConfig& config() const { return config_; }

  // Install the state at time t / step counter.  `phi` must be trace linked;
  // mu/theta are Newton warm starts (pass empty to derive them from phi).
  void set_state(BulkSurfacePair phi, BulkSurfacePair mu, Field theta,
                 double t, std::uint64_t step);

  // Override the conserved mean that every step projects onto.  set_state
  // recomputes it from phi; a resumed trajectory must instead re-install the
  // original value so the continuation is bit-identical.
  void set_target_mean(double m);

  const BulkSurfacePair& phi() const { return phi_; }
  const BulkSurfacePair& mu() const { return mu_; }
  const Field& theta() const { return theta_; }
  double time() const { return t_; }
  std::uint64_t step_count() const { return step_; }
  double target_mean() const { return target_mean_; }

  // Advance by config().tau (splitting the step in halves on solver failure,
  // up to max_bisections levels).  Throws ConvergenceError when even the
  // smallest sub-step fails.
  StepDiagnostics advance();

  // The coupling form a(mu,mu) at the current state.
  double dissipation() const;

  // Dissipated functional at the current state (Moreau envelope when the
  // potential is regularized, exact otherwise).
  double energy() const;

 private:
  struct Workspace;

  StepUnknowns solve_step(double tau, const BulkSurfacePair& phi_old,
                          StepUnknowns guess, int* iters,
                          double* defect) const;
  StepUnknowns advance_segment(double tau, int depth,
                               const BulkSurfacePair& phi_old,
                               StepUnknowns guess, int* iters, int* bisections,
                               double* defect) const;

  SlabGrid grid_;
  ModelParams params_;
  StepConfig config_;
  BulkSurfacePair phi_, mu_;
  Field theta_;
  double t_ = 0.0;
  std::uint64_t step_ = 0;
  double target_mean_ = 0.0;
  std::unique_ptr<Workspace> ws_;
};

// Deterministic initial data helpers.  Both return a trace-linked pair with
// generalized mean exactly `mean` (one uniform shift after filling).
BulkSurfacePair constant_state(const SlabGrid& g, double mean);
BulkSurfacePair noisy_state(const SlabGrid& g, double mean, double amplitude,
                            std::uint64_t seed);

// Throws InitError when the state is unusable for the given parameters
// (mean outside (-1,1), or values too close to saturation for the exact
// singular potential).
void check_initial_state(const SlabGrid& g, const ModelParams& p,
                         const BulkSurfacePair& phi);

// Natural chemical-potential warm start derived from phi alone.
void derive_potentials(const SlabGrid& g, const ModelParams& p,
                       const BulkSurfacePair& phi, BulkSurfacePair& mu,
                       Field& theta);

}  // namespace chbs
