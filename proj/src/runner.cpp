// runner.cpp -- trajectory loop, sampling, restart records, sweeps.

#include "chbs/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <thread>

#include "chbs/checkpoint.hpp"
#include "chbs/diagnostics.hpp"
#include "chbs/errors.hpp"

namespace chbs {

std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

void write_row(std::ofstream& out, const SampleRow& r) {
  out << format_g17(r.t) << ',' << format_g17(r.energy) << ','
      << format_g17(r.mean) << ',' << format_g17(r.dissipation) << ','
      << format_g17(r.velocity) << ',' << format_g17(r.separation) << ','
      << format_g17(r.max_abs_phi) << ',' << format_g17(r.defect) << ','
      << r.newton_iters << '\n';
}

Checkpoint make_record(const RunConfig& cfg, const Stepper& st) {
  Checkpoint c;
  c.lx = cfg.grid.lx;
  c.nx = cfg.grid.nx;
  c.ny = cfg.grid.ny;
  c.params_hash = config_hash(cfg);
  c.t = st.time();
  c.step = st.step_count();
  c.stationary = false;
  c.mu_infty = 0.0;
  c.mean_target = st.target_mean();
  c.phi = st.phi();
  c.mu = st.mu();
  c.theta = st.theta();
  return c;
}

}  // namespace

BulkSurfacePair initial_state(const RunConfig& cfg, BulkSurfacePair* mu,
                              Field* theta, double* t0, std::uint64_t* step0,
                              double* mean_target) {
  const SlabGrid g = build_grid(cfg.grid.lx, cfg.grid.nx, cfg.grid.ny);
  switch (cfg.init.kind) {
    case InitKind::Constant: {
      BulkSurfacePair phi = constant_state(g, cfg.init.mean);
      check_initial_state(g, cfg.params, phi);
      return phi;
    }
    case InitKind::Noise: {
      BulkSurfacePair phi =
          noisy_state(g, cfg.init.mean, cfg.init.amplitude, cfg.init.seed);
      check_initial_state(g, cfg.params, phi);
      return phi;
    }
    case InitKind::Checkpoint: {
      Checkpoint c = load_checkpoint(cfg.init.checkpoint);
      require_compatible(c, g, config_hash(cfg));
      if (mu) *mu = std::move(c.mu);
      if (theta) *theta = std::move(c.theta);
      if (t0) *t0 = c.t;
      if (step0) *step0 = c.step;
      if (mean_target) *mean_target = c.mean_target;
      return std::move(c.phi);
    }
  }
  throw ConfigError("unreachable init kind");
}

TrajectorySummary run_trajectory(const RunConfig& cfg,
                                 const std::string& out_dir,
                                 std::ostream* log) {
  const SlabGrid g = build_grid(cfg.grid.lx, cfg.grid.nx, cfg.grid.ny);
  validate_params(cfg.params);

  BulkSurfacePair mu;
  Field theta;
  double t0 = 0.0;
  std::uint64_t step0 = 0;
  double target = std::numeric_limits<double>::quiet_NaN();
  BulkSurfacePair phi = initial_state(cfg, &mu, &theta, &t0, &step0, &target);

  Stepper st(g, cfg.params, cfg.step);
  st.set_state(std::move(phi), std::move(mu), std::move(theta), t0, step0);
  if (!std::isnan(target)) st.set_target_mean(target);

  long long n_steps;
  if (cfg.run.max_steps >= 0) {
    n_steps = cfg.run.max_steps;
  } else {
    n_steps = std::llround((cfg.run.t_end - t0) / cfg.step.tau);
    if (n_steps < 0) n_steps = 0;
  }

  std::ofstream csv;
  const bool writing = !out_dir.empty();
  if (writing) {
    std::filesystem::create_directories(out_dir);
    csv.open(out_dir + "/trajectory.csv", std::ios::trunc);
    if (!csv)
      throw ConfigError("cannot write into output directory '" + out_dir + "'");
    csv << "t,energy,mean,dissipation,velocity,separation,max_abs_phi,defect,"
           "newton_iters\n";
  }

  TrajectorySummary sum;
  sum.t_start = t0;
  sum.mean_target = st.target_mean();
  sum.energy_initial = st.energy();
  sum.max_energy_increase = -std::numeric_limits<double>::infinity();
  sum.min_separation = std::numeric_limits<double>::infinity();
  sum.min_separation_late = std::numeric_limits<double>::infinity();

  const HminusOptions hopts;
  auto sample_velocity = [&](const BulkSurfacePair& prev,
                             const BulkSurfacePair& now) {
    BulkSurfacePair v = now;
    for (int k = 0; k < g.n_bulk(); ++k)
      v.bulk[k] = (now.bulk[k] - prev.bulk[k]) / cfg.step.tau;
    sync_trace(g, v);
    return hminus_norm(g, cfg.params.L, cfg.params.sigma, v, hopts);
  };

  {
    SampleRow row;
    row.t = t0;
    row.energy = sum.energy_initial;
    row.mean = st.target_mean();
    row.dissipation = st.dissipation();
    row.velocity = 0.0;
    row.separation = separation_delta(g, st.phi());
    row.max_abs_phi = 1.0 - row.separation;
    row.defect = 0.0;
    row.newton_iters = 0;
    sum.samples.push_back(row);
    if (writing) write_row(csv, row);
  }

  double prev_energy = sum.energy_initial;
  BulkSurfacePair prev_phi = st.phi();
  double last_velocity = 0.0;

  for (long long s = 1; s <= n_steps; ++s) {
    prev_phi = st.phi();
    const StepDiagnostics d = st.advance();

    sum.max_energy_increase =
        std::max(sum.max_energy_increase, d.energy - prev_energy);
    prev_energy = d.energy;
    sum.max_mass_drift =
        std::max(sum.max_mass_drift, std::abs(d.mean - st.target_mean()));
    sum.max_defect = std::max(sum.max_defect, d.defect);
    sum.min_separation = std::min(sum.min_separation, d.separation);
    if (st.time() >= kLateTime)
      sum.min_separation_late = std::min(sum.min_separation_late, d.separation);
    sum.cumulative_dissipation += cfg.step.tau * d.dissipation;
    sum.total_newton_iters += d.newton_iters;
    sum.total_bisections += d.bisections;

    const bool last = s == n_steps;
    const bool sampled = last || (s % cfg.run.sample_every == 0);
    bool stop = false;
    if (sampled) {
      last_velocity = sample_velocity(prev_phi, st.phi());
      SampleRow row;
      row.t = st.time();
      row.energy = d.energy;
      row.mean = d.mean;
      row.dissipation = d.dissipation;
      row.velocity = last_velocity;
      row.separation = d.separation;
      row.max_abs_phi = 1.0 - d.separation;
      row.defect = d.defect;
      row.newton_iters = d.newton_iters;
      sum.samples.push_back(row);
      if (writing) write_row(csv, row);
      if (cfg.run.stop_when_steady && last_velocity <= cfg.run.steady_tol) {
        sum.converged = true;
        stop = true;
      }
      if (log)
        *log << "t = " << format_g17(st.time())
             << "  energy = " << format_g17(d.energy)
             << "  velocity = " << format_g17(last_velocity) << "\n";
    }
    if (cfg.run.checkpoint_every > 0 && s % cfg.run.checkpoint_every == 0)
      save_checkpoint(cfg.run.checkpoint_out, make_record(cfg, st));
    if (stop) break;
  }

  sum.t_final = st.time();
  sum.steps = st.step_count();
  sum.energy_final = st.energy();
  sum.final_velocity_norm = last_velocity;
  if (sum.samples.size() < 2) {
    sum.max_energy_increase = 0.0;
    sum.min_separation = sum.samples.front().separation;
    sum.min_separation_late = sum.min_separation;
  }
  if (!std::isfinite(sum.min_separation_late))
    sum.min_separation_late = sum.min_separation;
  sum.phi_final = st.phi();
  sum.mu_final = st.mu();
  sum.theta_final = st.theta();

  if (!cfg.run.checkpoint_out.empty())
    save_checkpoint(cfg.run.checkpoint_out, make_record(cfg, st));

  if (writing) {
    std::ofstream txt(out_dir + "/summary.txt", std::ios::trunc);
    txt << "t_start = " << format_g17(sum.t_start) << "\n"
        << "t_final = " << format_g17(sum.t_final) << "\n"
        << "steps = " << sum.steps << "\n"
        << "mean_target = " << format_g17(sum.mean_target) << "\n"
        << "energy_initial = " << format_g17(sum.energy_initial) << "\n"
        << "energy_final = " << format_g17(sum.energy_final) << "\n"
        << "max_energy_increase = " << format_g17(sum.max_energy_increase)
        << "\n"
        << "max_mass_drift = " << format_g17(sum.max_mass_drift) << "\n"
        << "max_defect = " << format_g17(sum.max_defect) << "\n"
        << "min_separation = " << format_g17(sum.min_separation) << "\n"
        << "min_separation_late = " << format_g17(sum.min_separation_late)
        << "\n"
        << "cumulative_dissipation = "
        << format_g17(sum.cumulative_dissipation) << "\n"
        << "converged = " << (sum.converged ? "true" : "false") << "\n"
        << "final_velocity_norm = " << format_g17(sum.final_velocity_norm)
        << "\n"
        << "total_newton_iters = " << sum.total_newton_iters << "\n"
        << "total_bisections = " << sum.total_bisections << "\n";
  }
  return sum;
}

std::vector<SweepRow> run_sweep(const RunConfig& base, const std::string& axis,
                                const std::vector<std::string>& values,
                                const std::string& out_dir, int jobs,
                                std::ostream* log) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  if (jobs < 1) jobs = 1;

  // Build all run configs up front so bad values fail before any run starts.
  std::vector<RunConfig> cfgs(values.size(), base);
  for (std::size_t i = 0; i < values.size(); ++i) {
    apply_axis(cfgs[i], axis, values[i]);
    if (!cfgs[i].run.checkpoint_out.empty())
      throw ConfigError(
          "sweeps do not take run.checkpoint_out (records would collide)");
    try {
      validate_params(cfgs[i].params);
    } catch (const Error& e) {
      throw ConfigError("sweep value " + values[i] + ": " + e.what());
    }
  }

  std::vector<SweepRow> rows(values.size());
  std::vector<std::exception_ptr> errs(values.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= values.size()) return;
      try {
        const std::string dir =
            out_dir.empty() ? "" : out_dir + "/" + axis + "=" + values[i];
        rows[i].value = values[i];
        rows[i].summary = run_trajectory(cfgs[i], dir, nullptr);
      } catch (...) {
        errs[i] = std::current_exception();
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    const std::size_t n =
        std::min(static_cast<std::size_t>(jobs), values.size());
    pool.reserve(n);
    for (std::size_t i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (std::size_t i = 0; i < errs.size(); ++i)
    if (errs[i]) std::rethrow_exception(errs[i]);

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream csv(out_dir + "/sweep.csv", std::ios::trunc);
    csv << axis
        << ",t_final,steps,energy_final,min_separation_late,converged,"
           "final_velocity_norm,max_mass_drift,max_defect\n";
    for (const auto& r : rows) {
      const TrajectorySummary& s = r.summary;
      csv << r.value << ',' << format_g17(s.t_final) << ',' << s.steps << ','
          << format_g17(s.energy_final) << ','
          << format_g17(s.min_separation_late) << ','
          << (s.converged ? "true" : "false") << ','
          << format_g17(s.final_velocity_norm) << ','
          << format_g17(s.max_mass_drift) << ',' << format_g17(s.max_defect)
          << '\n';
    }
  }
  if (log) *log << "sweep finished: " << values.size() << " runs\n";
  return rows;
}

}  // namespace chbs
