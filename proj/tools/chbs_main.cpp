// chbs_main.cpp -- command line front end for runs, sweeps, and audits.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "chbs/config.hpp"
#include "chbs/diagnostics.hpp"
#include "chbs/errors.hpp"
#include "chbs/runner.hpp"
#include "chbs/stationary.hpp"

namespace {

using namespace chbs;

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int cmd_run(const std::string& config_path, const std::string& out_dir,
            bool quiet, const std::uint64_t* seed) {
  RunConfig cfg = parse_config_file(config_path);
  if (seed) cfg.init.seed = *seed;
  const auto t0 = std::chrono::steady_clock::now();
  const TrajectorySummary sum =
      run_trajectory(cfg, out_dir, quiet ? nullptr : &std::cerr);
  const auto t1 = std::chrono::steady_clock::now();
  if (!quiet)
    std::cerr << "wall time: "
              << std::chrono::duration<double>(t1 - t0).count() << " s\n";
  std::cout << "steps = " << sum.steps << "\n"
            << "t_final = " << format_g17(sum.t_final) << "\n"
            << "energy_final = " << format_g17(sum.energy_final) << "\n"
            << "max_mass_drift = " << format_g17(sum.max_mass_drift) << "\n"
            << "min_separation = " << format_g17(sum.min_separation) << "\n"
            << "converged = " << (sum.converged ? "true" : "false") << "\n";
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& axis,
              const std::string& values_csv, const std::string& out_dir,
              int jobs, bool quiet, const std::uint64_t* seed) {
  RunConfig cfg = parse_config_file(config_path);
  if (seed) cfg.init.seed = *seed;
  const std::vector<std::string> values = split_csv(values_csv);
  const auto rows =
      run_sweep(cfg, axis, values, out_dir, jobs, quiet ? nullptr : &std::cerr);
  for (const auto& r : rows)
    std::cout << axis << " = " << r.value
              << "  energy_final = " << format_g17(r.summary.energy_final)
              << "  converged = " << (r.summary.converged ? "true" : "false")
              << "\n";
  return 0;
}

int cmd_check(const std::string& config_path) {
  const RunConfig cfg = parse_config_file(config_path);
  const AssumptionReport pot =
      check_assumptions(cfg.params.potential, 2001, cfg.init.mean);
  std::cout << pot.to_text();
  const SlabGrid g = build_grid(cfg.grid.lx, cfg.grid.nx, cfg.grid.ny);
  const OperatorAudit ops =
      operator_self_test(g, cfg.params.L, cfg.params.sigma, 12345);
  std::cout << ops.text;
  const bool ok = pot.pass() && ops.ok;
  std::cout << "check = " << (ok ? "pass" : "fail") << "\n";
  return ok ? 0 : 4;
}

int cmd_steady(const std::string& config_path, const std::string& out_dir) {
  const RunConfig cfg = parse_config_file(config_path);
  const SlabGrid g = build_grid(cfg.grid.lx, cfg.grid.nx, cfg.grid.ny);
  validate_params(cfg.params);
  const BulkSurfacePair guess =
      initial_state(cfg, nullptr, nullptr, nullptr, nullptr);
  const StationaryResult res = solve_stationary(g, cfg.params, guess);
  const double defect = steady_residual(g, cfg.params, res.phi);
  const double energy = total_energy(g, cfg.params.potential, res.phi);

  std::cout << "mu_infty = " << format_g17(res.mu_infty) << "\n"
            << "residual = " << format_g17(res.residual) << "\n"
            << "steady_residual = " << format_g17(defect) << "\n"
            << "iterations = " << res.iterations << "\n"
            << "energy = " << format_g17(energy) << "\n"
            << "separation = " << format_g17(separation_delta(g, res.phi))
            << "\n";
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream csv(out_dir + "/steady_profile.csv", std::ios::trunc);
    csv << "i,j,phi\n";
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i)
        csv << i << ',' << j << ','
            << format_g17(res.phi.bulk[g.idx(i, j)]) << '\n';
    std::ofstream txt(out_dir + "/steady_summary.txt", std::ios::trunc);
    txt << "mu_infty = " << format_g17(res.mu_infty) << "\n"
        << "residual = " << format_g17(res.residual) << "\n"
        << "steady_residual = " << format_g17(defect) << "\n"
        << "iterations = " << res.iterations << "\n"
        << "energy = " << format_g17(energy) << "\n"
        << "separation = " << format_g17(separation_delta(g, res.phi)) << "\n"
        << "mean = " << format_g17(generalized_mean(g, res.phi)) << "\n";
  }
  return 0;
}

int cmd_report(const std::string& dir) {
  std::ifstream csv(dir + "/trajectory.csv");
  if (!csv)
    throw ConfigError("no trajectory.csv under '" + dir + "'");
  std::string line;
  if (!std::getline(csv, line))
    throw ConfigError("trajectory.csv is empty");

  std::vector<double> t, e, sep, vel;
  while (std::getline(csv, line)) {
    const auto cells = split_csv(line);
    if (cells.size() < 9)
      throw ParseError("trajectory.csv row with fewer than 9 columns");
    t.push_back(std::stod(cells[0]));
    e.push_back(std::stod(cells[1]));
    vel.push_back(std::stod(cells[4]));
    sep.push_back(std::stod(cells[5]));
  }
  if (t.empty()) throw ConfigError("trajectory.csv has no data rows");

  double max_inc = 0.0, min_sep = sep.front();
  for (std::size_t i = 0; i + 1 < e.size(); ++i)
    max_inc = std::max(max_inc, e[i + 1] - e[i]);
  for (double v : sep) min_sep = std::min(min_sep, v);

  std::ostringstream rep;
  rep << "rows = " << t.size() << "\n"
      << "t_first = " << format_g17(t.front()) << "\n"
      << "t_last = " << format_g17(t.back()) << "\n"
      << "energy_first = " << format_g17(e.front()) << "\n"
      << "energy_last = " << format_g17(e.back()) << "\n"
      << "max_energy_increase_sampled = " << format_g17(max_inc) << "\n"
      << "min_separation_sampled = " << format_g17(min_sep) << "\n"
      << "final_velocity = " << format_g17(vel.back()) << "\n";
  std::cout << rep.str();
  std::ofstream out(dir + "/report.txt", std::ios::trunc);
  out << rep.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale simulator for coupled bulk/boundary phase "
               "separation with singular potentials"};
  app.require_subcommand(1);

  std::string config_path, out_dir, axis, values_csv, report_dir;
  int jobs = 1;
  bool quiet = false;
  std::uint64_t seed = 0;

  CLI::App* run = app.add_subcommand("run", "advance one trajectory");
  run->add_option("--config", config_path, "configuration file")->required();
  run->add_option("--out", out_dir, "output directory");
  CLI::Option* run_seed =
      run->add_option("--seed", seed, "override the init section seed");
  run->add_flag("--quiet", quiet, "suppress progress on stderr");

  CLI::App* sweep =
      app.add_subcommand("sweep", "rerun a config across one axis");
  sweep->add_option("--config", config_path, "configuration file")->required();
  sweep->add_option("--axis", axis, "L, sigma, tau, epsilon, mean, or grid")
      ->required();
  sweep->add_option("--values", values_csv, "comma separated values")
      ->required();
  sweep->add_option("--out", out_dir, "output directory");
  sweep->add_option("--jobs", jobs, "parallel runs");
  CLI::Option* sweep_seed =
      sweep->add_option("--seed", seed, "override the init section seed");
  sweep->add_flag("--quiet", quiet, "suppress progress on stderr");

  CLI::App* check =
      app.add_subcommand("check", "audit the potential and the operators");
  check->add_option("--config", config_path, "configuration file")->required();

  CLI::App* steady =
      app.add_subcommand("steady", "solve for a steady profile");
  steady->add_option("--config", config_path, "configuration file")
      ->required();
  steady->add_option("--out", out_dir, "output directory");

  CLI::App* report =
      app.add_subcommand("report", "summarize a finished run directory");
  report->add_option("--dir", report_dir, "run output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed())
      return cmd_run(config_path, out_dir, quiet,
                     run_seed->count() ? &seed : nullptr);
    if (sweep->parsed())
      return cmd_sweep(config_path, axis, values_csv, out_dir, jobs, quiet,
                       sweep_seed->count() ? &seed : nullptr);
    if (check->parsed()) return cmd_check(config_path);
    if (steady->parsed()) return cmd_steady(config_path, out_dir);
    if (report->parsed()) return cmd_report(report_dir);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ParamError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const RegimeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const InitError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const CheckpointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
