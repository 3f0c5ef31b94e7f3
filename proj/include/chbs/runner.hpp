// runner.hpp -- drives trajectories from a RunConfig and records outputs.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "chbs/config.hpp"
#include "chbs/pair.hpp"
#include "chbs/stepper.hpp"

namespace chbs {

// Sampled trajectory row.  `velocity` is the dual-norm size of the discrete
// time derivative, measured at sample points (0 in the t = t0 row).
struct SampleRow {
  double t = 0.0;
  double energy = 0.0;
  double mean = 0.0;
  double dissipation = 0.0;
  double velocity = 0.0;
  double separation = 0.0;
  double max_abs_phi = 0.0;
  double defect = 0.0;
  int newton_iters = 0;
};

// Time from which the late-phase separation floor is tracked.
inline constexpr double kLateTime = 0.5;

struct TrajectorySummary {
  double t_start = 0.0;
  double t_final = 0.0;
  std::uint64_t steps = 0;
  double mean_target = 0.0;
  double energy_initial = 0.0;
  double energy_final = 0.0;
  double max_energy_increase = 0.0;  // over consecutive steps, signed
  double max_mass_drift = 0.0;       // |mean - target|, all steps
  double max_defect = 0.0;           // accepted residual norm, all steps
  double min_separation = 0.0;       // 1 - max|phi|, all steps
  double min_separation_late = 0.0;  // same, restricted to t >= kLateTime
  double cumulative_dissipation = 0.0;  // sum of tau * a(mu, mu)
  bool converged = false;            // velocity fell below run.steady_tol
  double final_velocity_norm = 0.0;
  long long total_newton_iters = 0;
  long long total_bisections = 0;
  std::vector<SampleRow> samples;
  BulkSurfacePair phi_final, mu_final;
  Field theta_final;
};

// Run the configured trajectory.  When `out_dir` is nonempty, writes
// trajectory.csv and summary.txt there (plus restart records when the config
// requests them); creates the directory if needed.  `log`, when non-null,
// receives progress lines (wall-clock content never goes into files).
TrajectorySummary run_trajectory(const RunConfig& cfg,
                                 const std::string& out_dir,
                                 std::ostream* log = nullptr);

// Initial pair for the configured init section (loads restart records for
// kind = checkpoint and validates compatibility).  Out-params receive the
// warm-start data, clock, and conserved mean when resuming; untouched
// otherwise.
BulkSurfacePair initial_state(const RunConfig& cfg, BulkSurfacePair* mu,
                              Field* theta, double* t0, std::uint64_t* step0,
                              double* mean_target = nullptr);

// One sweep: rerun the config with `axis` replaced by each value in turn.
// Writes per-run outputs under out_dir/<axis>=<value>/ and an aggregated
// sweep.csv; rows keep the input order.  `jobs` > 1 runs points in parallel
// (each run is single-threaded and independent).
struct SweepRow {
  std::string value;
  TrajectorySummary summary;
};
std::vector<SweepRow> run_sweep(const RunConfig& base, const std::string& axis,
                                const std::vector<std::string>& values,
                                const std::string& out_dir, int jobs,
                                std::ostream* log = nullptr);

// %.17g rendering used for every number that lands in a CSV or summary.
std::string format_g17(double v);

}  // namespace chbs
