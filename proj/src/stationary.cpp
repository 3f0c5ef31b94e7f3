// stationary.cpp -- bordered Newton solve for steady profiles.

#include "chbs/stationary.hpp"

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "chbs/errors.hpp"
#include "chbs/potentials.hpp"

namespace chbs {

namespace {

Deriv convex_part(const ModelParams& p, Side side, double r) {
  if (p.reg == Regularization::Yosida)
    return yosida_beta(p.potential, side, r, p.yosida);
  return eval_beta(p.potential, side, r);
}

double full_derivative(const ModelParams& p, Side side, double r) {
  return convex_part(p, side, r).value + eval_pi(p.potential, side, r).value;
}

// Merged stationarity rows (length n_bulk) at profile phi and constant
// potential mu_infty.
std::vector<double> stationary_rows(const SlabGrid& g, const ModelParams& p,
                                    const BulkSurfacePair& phi,
                                    double mu_infty) {
  check_pair(g, phi, "stationary_rows");
  Field lap_phi, dn_phi, lg_psi;
  lap_bulk(g, phi.bulk, lap_phi);
  normal_derivative(g, phi.bulk, dn_phi);
  lap_surface(g, phi.surf, lg_psi);
  const double half_hy = 0.5 * g.hy;

  std::vector<double> r(static_cast<std::size_t>(g.n_bulk()));
  for (int j = 0; j < g.ny; ++j) {
    const bool bnd = g.boundary_row(j);
    for (int i = 0; i < g.nx; ++i) {
      const int k = g.idx(i, j);
      const double bulk_expr =
          -lap_phi[k] + full_derivative(p, Side::Bulk, phi.bulk[k]) - mu_infty;
      if (!bnd) {
        r[k] = bulk_expr;
        continue;
      }
      const int s = j == 0 ? i : g.nx + i;
      const double surf_expr = dn_phi[s] - lg_psi[s] +
                               full_derivative(p, Side::Boundary, phi.surf[s]) -
                               mu_infty;
      r[k] = half_hy * bulk_expr + surf_expr;
    }
  }
  return r;
}

double inf_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

double mu_infty_formula(const SlabGrid& g, const ModelParams& p,
                        const BulkSurfacePair& phi) {
  check_pair(g, phi, "mu_infty_formula");
  double num = 0.0;
  for (int j = 0; j < g.ny; ++j) {
    const double w = g.bulk_weight(j);
    double row = 0.0;
    for (int i = 0; i < g.nx; ++i)
      row += full_derivative(p, Side::Bulk, phi.bulk[g.idx(i, j)]);
    num += w * row;
  }
  double srow = 0.0;
  for (double v : phi.surf) srow += full_derivative(p, Side::Boundary, v);
  num += g.surf_weight() * srow;
  return num / (g.omega_measure() + g.gamma_measure());
}

double steady_residual(const SlabGrid& g, const ModelParams& p,
                       const BulkSurfacePair& phi) {
  return inf_norm(stationary_rows(g, p, phi, mu_infty_formula(g, p, phi)));
}

StationaryResult solve_stationary(const SlabGrid& g, const ModelParams& p,
                                  const BulkSurfacePair& guess,
                                  const StationaryConfig& cfg) {
  validate_params(p);
  check_pair(g, guess, "solve_stationary");
  const int n = g.n_bulk();
  const int m = n + 1;  // profile + the constant potential
  const double half_hy = 0.5 * g.hy;
  const double ax = 1.0 / (g.hx * g.hx);
  const double ay = 1.0 / (g.hy * g.hy);
  const double inv_hy = 1.0 / g.hy;
  const double total_w = g.omega_measure() + g.gamma_measure();
  const bool capped = p.reg == Regularization::Exact &&
                      (p.potential.bulk.singular() ||
                       p.potential.boundary.singular());

  BulkSurfacePair phi = guess;
  phi.linkage = Linkage::TraceLinked;
  sync_trace(g, phi);
  const double target = generalized_mean(g, phi);
  double mu_infty = mu_infty_formula(g, p, phi);

  auto residual = [&](const BulkSurfacePair& f, double mi) {
    std::vector<double> r = stationary_rows(g, p, f, mi);
    r.push_back(generalized_mean(g, f) - target);
    return r;
  };

  std::vector<double> res = residual(phi, mu_infty);
  double rn = inf_norm(res);

  Eigen::SparseMatrix<double> A(m, m);
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  std::vector<Eigen::Triplet<double>> trips;
  bool analyzed = false;

  for (int it = 0; it < cfg.max_iter; ++it) {
    if (rn <= cfg.tol) {
      res.pop_back();
      return {std::move(phi), mu_infty, inf_norm(res), it};
    }

    trips.clear();
    for (int j = 0; j < g.ny; ++j) {
      const bool bnd = g.boundary_row(j);
      for (int i = 0; i < g.nx; ++i) {
        const int k = g.idx(i, j);
        const int kw = g.idx((i + g.nx - 1) % g.nx, j);
        const int ke = g.idx((i + 1) % g.nx, j);
        const double dbulk =
            convex_part(p, Side::Bulk, phi.bulk[k]).deriv +
            eval_pi(p.potential, Side::Bulk, phi.bulk[k]).deriv;
        if (!bnd) {
          trips.emplace_back(k, k, 2.0 * ax + 2.0 * ay + dbulk);
          trips.emplace_back(k, kw, -ax);
          trips.emplace_back(k, ke, -ax);
          trips.emplace_back(k, g.idx(i, j - 1), -ay);
          trips.emplace_back(k, g.idx(i, j + 1), -ay);
          trips.emplace_back(k, n, -1.0);
          trips.emplace_back(n, k, g.bulk_weight(j) / total_w);
          continue;
        }
        const int s = j == 0 ? i : g.nx + i;
        const int k1 = j == 0 ? g.idx(i, 1) : g.idx(i, g.ny - 2);
        const double dsurf =
            convex_part(p, Side::Boundary, phi.surf[s]).deriv +
            eval_pi(p.potential, Side::Boundary, phi.surf[s]).deriv;
        trips.emplace_back(k, k,
                           half_hy * (2.0 * ax - ay + dbulk) + 1.5 * inv_hy +
                               2.0 * ax + dsurf);
        trips.emplace_back(k, kw, -half_hy * ax - ax);
        trips.emplace_back(k, ke, -half_hy * ax - ax);
        trips.emplace_back(k, k1, -inv_hy);
        trips.emplace_back(k, n, -(half_hy + 1.0));
        trips.emplace_back(n, k,
                           (g.bulk_weight(j) + g.surf_weight()) / total_w);
      }
    }
    A.setFromTriplets(trips.begin(), trips.end());
    A.makeCompressed();
    if (!analyzed) {
      lu.analyzePattern(A);
      analyzed = true;
    }
    lu.factorize(A);
    if (lu.info() != Eigen::Success)
      throw SolverError("stationary Jacobian factorization failed");
    Eigen::VectorXd rhs(m);
    for (int q = 0; q < m; ++q) rhs[q] = -res[static_cast<std::size_t>(q)];
    const Eigen::VectorXd d = lu.solve(rhs);
    if (lu.info() != Eigen::Success)
      throw SolverError("stationary Jacobian solve failed");

    double lam = 1.0;
    if (capped) {
      double t_hit = std::numeric_limits<double>::infinity();
      for (int k = 0; k < n; ++k) {
        const double dk = d[k];
        if (dk == 0.0) continue;
        const double room = dk > 0.0 ? cfg.phase_cap - phi.bulk[k]
                                     : phi.bulk[k] + cfg.phase_cap;
        if (room <= 0.0) {
          t_hit = 0.0;
          break;
        }
        t_hit = std::min(t_hit, room / std::abs(dk));
      }
      if (t_hit < 1.0) lam = 0.995 * t_hit;
      if (!(lam > 1e-14))
        throw ConvergenceError(
            "stationary newton pinned against the phase barrier");
    }

    bool accepted = false;
    for (int bt = 0; bt <= cfg.max_backtracks; ++bt) {
      BulkSurfacePair trial = phi;
      for (int k = 0; k < n; ++k) trial.bulk[k] += lam * d[k];
      sync_trace(g, trial);
      const double mi_trial = mu_infty + lam * d[n];
      std::vector<double> rt = residual(trial, mi_trial);
      const double rtn = inf_norm(rt);
      if (rtn <= (1.0 - 1e-4 * lam) * rn || rtn <= cfg.tol) {
        phi = std::move(trial);
        mu_infty = mi_trial;
        res = std::move(rt);
        rn = rtn;
        accepted = true;
        break;
      }
      lam *= 0.5;
    }
    if (!accepted)
      throw ConvergenceError("stationary line search stalled at residual " +
                             std::to_string(rn));
  }
  if (rn <= cfg.tol) {  // tolerance reached on the last update
    res.pop_back();
    return {std::move(phi), mu_infty, inf_norm(res), cfg.max_iter};
  }
  throw ConvergenceError("stationary newton did not converge (residual " +
                         std::to_string(rn) + ")");
}

}  // namespace chbs
