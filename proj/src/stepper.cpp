// stepper.cpp -- merged weak-form residual, analytic Jacobian, damped Newton.

#include "chbs/stepper.hpp"

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "chbs/errors.hpp"
#include "chbs/rng.hpp"

namespace chbs {

namespace {

double inf_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// Convex part of the potential derivative: exact or regularized.
Deriv convex_part(const ModelParams& p, Side side, double r) {
  if (p.reg == Regularization::Yosida)
    return yosida_beta(p.potential, side, r, p.yosida);
  return eval_beta(p.potential, side, r);
}

// Surface node owning the boundary bulk node (i, j).
int surf_of(const SlabGrid& g, int i, int j) {
  return j == 0 ? i : g.nx + i;
}

// Bulk node owning surface node s.
int bulk_of(const SlabGrid& g, int s) {
  return s < g.nx ? g.idx(s, 0) : g.idx(s - g.nx, g.ny - 1);
}

}  // namespace

int step_system_size(const SlabGrid& g, const ModelParams& p) {
  return p.L > 0.0 ? 2 * g.n_bulk() + g.n_surf() : 2 * g.n_bulk();
}

std::vector<double> pack_unknowns(const SlabGrid& g, const ModelParams& p,
                                  const StepUnknowns& u) {
  check_pair(g, u.phi, "pack_unknowns");
  check_pair(g, u.mu, "pack_unknowns");
  const int n = g.n_bulk();
  std::vector<double> x(static_cast<std::size_t>(step_system_size(g, p)));
  std::copy(u.phi.bulk.begin(), u.phi.bulk.end(), x.begin());
  std::copy(u.mu.bulk.begin(), u.mu.bulk.end(), x.begin() + n);
  if (p.L > 0.0) {
    if (static_cast<int>(u.theta.size()) != g.n_surf())
      throw ShapeError("pack_unknowns: theta extent mismatch");
    std::copy(u.theta.begin(), u.theta.end(), x.begin() + 2 * n);
  }
  return x;
}

StepUnknowns unpack_unknowns(const SlabGrid& g, const ModelParams& p,
                             const std::vector<double>& x) {
  if (static_cast<int>(x.size()) != step_system_size(g, p))
    throw ShapeError("unpack_unknowns: vector length mismatch");
  const int n = g.n_bulk();
  StepUnknowns u;
  u.phi.bulk.assign(x.begin(), x.begin() + n);
  u.phi.surf.assign(static_cast<std::size_t>(g.n_surf()), 0.0);
  u.phi.linkage = Linkage::TraceLinked;
  sync_trace(g, u.phi);
  u.mu.bulk.assign(x.begin() + n, x.begin() + 2 * n);
  u.mu.surf.assign(static_cast<std::size_t>(g.n_surf()), 0.0);
  u.mu.linkage = Linkage::TraceLinked;
  sync_trace(g, u.mu);
  if (p.L > 0.0)
    u.theta.assign(x.begin() + 2 * n, x.end());
  else
    u.theta = u.mu.surf;
  return u;
}

std::vector<double> step_residual(const SlabGrid& g, const ModelParams& p,
                                  Scheme scheme, double tau,
                                  const BulkSurfacePair& phi_old,
                                  const StepUnknowns& u) {
  check_pair(g, phi_old, "step_residual");
  check_pair(g, u.phi, "step_residual");
  check_pair(g, u.mu, "step_residual");
  const int n = g.n_bulk(), ns = g.n_surf(), nx = g.nx;
  const bool kinetic = p.L > 0.0;
  if (kinetic && static_cast<int>(u.theta.size()) != ns)
    throw ShapeError("step_residual: theta extent mismatch");
  const bool fi = scheme == Scheme::FullyImplicit;
  const double inv_tau = 1.0 / tau;
  const double half_hy = 0.5 * g.hy;
  const double two_over_hy = 2.0 / g.hy;
  const double xl = chi(p.L);

  Field lap_phi, lap_mu, dn_phi, dn_mu, lg_psi, lg_aux;
  lap_bulk(g, u.phi.bulk, lap_phi);
  lap_bulk(g, u.mu.bulk, lap_mu);
  normal_derivative(g, u.phi.bulk, dn_phi);
  normal_derivative(g, u.mu.bulk, dn_mu);
  lap_surface(g, u.phi.surf, lg_psi);
  lap_surface(g, kinetic ? u.theta : u.mu.surf, lg_aux);

  std::vector<double> r(static_cast<std::size_t>(step_system_size(g, p)));
  for (int j = 0; j < g.ny; ++j) {
    const bool bnd = g.boundary_row(j);
    for (int i = 0; i < nx; ++i) {
      const int k = g.idx(i, j);
      const double phi = u.phi.bulk[k];
      const double phi_star = fi ? phi : phi_old.bulk[k];
      const double mu_def = -lap_phi[k] + convex_part(p, Side::Bulk, phi).value +
                            eval_pi(p.potential, Side::Bulk, phi_star).value -
                            u.mu.bulk[k];
      double mass = inv_tau * (phi - phi_old.bulk[k]) - lap_mu[k];
      if (!bnd) {
        r[k] = mu_def;
        r[n + k] = mass;
        continue;
      }
      const int s = surf_of(g, i, j);
      const double psi = u.phi.surf[s];
      const double psi_star = fi ? psi : phi_old.surf[s];
      const double theta_s = kinetic ? u.theta[s] : u.mu.surf[s];
      const double surf_def =
          dn_phi[s] - lg_psi[s] + convex_part(p, Side::Boundary, psi).value +
          eval_pi(p.potential, Side::Boundary, psi_star).value - theta_s;
      r[k] = half_hy * mu_def + surf_def;
      if (kinetic) {
        mass += two_over_hy * (dn_mu[s] + xl * (u.mu.bulk[k] - theta_s));
      } else {
        mass += two_over_hy * (inv_tau * (psi - phi_old.surf[s]) + dn_mu[s] -
                               p.sigma * lg_aux[s]);
      }
      r[n + k] = mass;
    }
  }
  if (kinetic) {
    for (int s = 0; s < ns; ++s) {
      r[2 * n + s] = inv_tau * (u.phi.surf[s] - phi_old.surf[s]) -
                     p.sigma * lg_aux[s] - xl * (u.mu.surf[s] - u.theta[s]);
    }
  }
  return r;
}

namespace {

// Emit the Jacobian coefficients of step_residual at `u`.  Each (row, col)
// position is emitted exactly once, and the emission order and sparsity
// pattern are independent of the values, so a symbolic factorization can be
// reused across all steps of a trajectory.
template <typename Emit>
void emit_step_jacobian(const SlabGrid& g, const ModelParams& p, Scheme scheme,
                        double tau, const StepUnknowns& u, Emit&& put) {
  const int n = g.n_bulk(), nx = g.nx, top = g.ny - 1;
  const bool kinetic = p.L > 0.0;
  const bool fi = scheme == Scheme::FullyImplicit;
  const double inv_tau = 1.0 / tau;
  const double ax = 1.0 / (g.hx * g.hx);
  const double ay = 1.0 / (g.hy * g.hy);
  const double half_hy = 0.5 * g.hy;
  const double inv_hy = 1.0 / g.hy;
  const double xl = chi(p.L);
  auto M = [n](int k) { return n + k; };
  auto T = [n](int s) { return 2 * n + s; };

  for (int j = 0; j < g.ny; ++j) {
    const bool bnd = g.boundary_row(j);
    for (int i = 0; i < nx; ++i) {
      const int k = g.idx(i, j);
      const int kw = g.idx((i + nx - 1) % nx, j);
      const int ke = g.idx((i + 1) % nx, j);
      const double phi = u.phi.bulk[k];
      const double dconv = convex_part(p, Side::Bulk, phi).deriv +
                           (fi ? eval_pi(p.potential, Side::Bulk, phi).deriv
                               : 0.0);
      if (!bnd) {
        const int ks = g.idx(i, j - 1), kn = g.idx(i, j + 1);
        put(k, k, 2.0 * ax + 2.0 * ay + dconv);
        put(k, kw, -ax);
        put(k, ke, -ax);
        put(k, ks, -ay);
        put(k, kn, -ay);
        put(k, M(k), -1.0);
        put(M(k), k, inv_tau);
        put(M(k), M(k), 2.0 * ax + 2.0 * ay);
        put(M(k), M(kw), -ax);
        put(M(k), M(ke), -ax);
        put(M(k), M(ks), -ay);
        put(M(k), M(kn), -ay);
        continue;
      }
      const int s = surf_of(g, i, j);
      const int k1 = j == 0 ? g.idx(i, 1) : g.idx(i, top - 1);
      const double psi = u.phi.surf[s];
      const double dconv_s =
          convex_part(p, Side::Boundary, psi).deriv +
          (fi ? eval_pi(p.potential, Side::Boundary, psi).deriv : 0.0);
      // Potential row: half_hy * bulk closure + boundary closure.  The
      // coefficient two rows in cancels identically and is omitted.
      put(k, k,
          half_hy * (2.0 * ax - ay + dconv) + 1.5 * inv_hy + 2.0 * ax +
              dconv_s);
      put(k, kw, -half_hy * ax - ax);
      put(k, ke, -half_hy * ax - ax);
      put(k, k1, -inv_hy);
      put(k, M(k), kinetic ? -half_hy : -(half_hy + 1.0));
      if (kinetic) put(k, T(s), -1.0);
      // Mass row with the flux condition folded in.
      if (kinetic) {
        put(M(k), k, inv_tau);
        put(M(k), M(k), 2.0 * ax + 2.0 * ay + 2.0 * xl * inv_hy);
        put(M(k), M(kw), -ax);
        put(M(k), M(ke), -ax);
        put(M(k), M(k1), -2.0 * ay);
        put(M(k), T(s), -2.0 * xl * inv_hy);
      } else {
        const double sx = 2.0 * p.sigma * ax * inv_hy;
        put(M(k), k, (1.0 + 2.0 * inv_hy) * inv_tau);
        put(M(k), M(k), 2.0 * ax + 2.0 * ay + 2.0 * sx);
        put(M(k), M(kw), -ax - sx);
        put(M(k), M(ke), -ax - sx);
        put(M(k), M(k1), -2.0 * ay);
      }
    }
  }
  if (kinetic) {
    for (int s = 0; s < g.n_surf(); ++s) {
      const int k = bulk_of(g, s);
      const int base = s < nx ? 0 : nx;
      const int i = s - base;
      const int sw = base + (i + nx - 1) % nx;
      const int se = base + (i + 1) % nx;
      put(T(s), k, inv_tau);
      put(T(s), T(s), 2.0 * p.sigma * ax + xl);
      put(T(s), T(sw), -p.sigma * ax);
      put(T(s), T(se), -p.sigma * ax);
      put(T(s), M(k), -xl);
    }
  }
}

}  // namespace

std::vector<MatrixEntry> step_jacobian(const SlabGrid& g, const ModelParams& p,
                                       Scheme scheme, double tau,
                                       const StepUnknowns& u) {
  std::vector<MatrixEntry> out;
  emit_step_jacobian(g, p, scheme, tau, u, [&out](int r, int c, double v) {
    out.push_back(MatrixEntry{r, c, v});
  });
  return out;
}

struct Stepper::Workspace {
  Eigen::SparseMatrix<double> A;
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  std::vector<Eigen::Triplet<double>> trips;
  bool analyzed = false;

  void assemble(const SlabGrid& g, const ModelParams& p, Scheme scheme,
                double tau, const StepUnknowns& u) {
    const int m = step_system_size(g, p);
    trips.clear();
    emit_step_jacobian(g, p, scheme, tau, u,
                       [this](int r, int c, double v) {
                         trips.emplace_back(r, c, v);
                       });
    A.resize(m, m);
    A.setFromTriplets(trips.begin(), trips.end());
    A.makeCompressed();
    if (!analyzed) {
      lu.analyzePattern(A);
      analyzed = true;
    }
    lu.factorize(A);
    if (lu.info() != Eigen::Success)
      throw SolverError("step Jacobian factorization failed");
  }
};

Stepper::Stepper(SlabGrid g, ModelParams p, StepConfig c)
    : grid_(g), params_(std::move(p)), config_(c),
      ws_(std::make_unique<Workspace>()) {
  validate_params(params_);
  if (!(config_.tau > 0.0))
    throw ConfigError("step size tau must be positive");
  phi_ = constant_state(grid_, 0.0);
  mu_ = constant_state(grid_, 0.0);
  theta_.assign(static_cast<std::size_t>(grid_.n_surf()), 0.0);
}

Stepper::~Stepper() = default;
Stepper::Stepper(Stepper&&) noexcept = default;
Stepper& Stepper::operator=(Stepper&&) noexcept = default;

void Stepper::set_state(BulkSurfacePair phi, BulkSurfacePair mu, Field theta,
                        double t, std::uint64_t step) {
  check_pair(grid_, phi, "set_state");
  phi.linkage = Linkage::TraceLinked;
  sync_trace(grid_, phi);
  phi_ = std::move(phi);
  if (mu.bulk.empty()) {
    derive_potentials(grid_, params_, phi_, mu_, theta_);
  } else {
    check_pair(grid_, mu, "set_state");
    mu.linkage = Linkage::TraceLinked;
    sync_trace(grid_, mu);
    mu_ = std::move(mu);
    if (theta.empty()) {
      theta_ = mu_.surf;
    } else {
      if (static_cast<int>(theta.size()) != grid_.n_surf())
        throw ShapeError("set_state: theta extent mismatch");
      theta_ = std::move(theta);
    }
  }
  t_ = t;
  step_ = step;
  target_mean_ = generalized_mean(grid_, phi_);
}

void Stepper::set_target_mean(double m) {
  if (!(std::abs(m) < 1.0))
    throw InitError("target mean must lie in (-1,1)");
  target_mean_ = m;
}

double Stepper::dissipation() const {
  BulkSurfacePair z;
  z.bulk = mu_.bulk;
  if (params_.L > 0.0) {
    z.surf = theta_;
    z.linkage = Linkage::Independent;
  } else {
    z.surf = mu_.surf;
    z.linkage = Linkage::TraceLinked;
  }
  return bilinear_a(grid_, params_.L, params_.sigma, z, z);
}

double Stepper::energy() const {
  return params_.reg == Regularization::Yosida
             ? total_energy_regularized(grid_, params_.potential,
                                        params_.yosida, phi_)
             : total_energy(grid_, params_.potential, phi_);
}

StepUnknowns Stepper::solve_step(double tau, const BulkSurfacePair& phi_old,
                                 StepUnknowns guess, int* iters,
                                 double* defect) const {
  const int n = grid_.n_bulk();
  const bool cap_bulk =
      params_.reg == Regularization::Exact && params_.potential.bulk.singular();
  const bool cap_bnd =
      params_.reg == Regularization::Exact &&
      (params_.potential.bulk.singular() || params_.potential.boundary.singular());

  std::vector<double> x = pack_unknowns(grid_, params_, guess);
  auto project = [&](std::vector<double>& v) {
    // Uniform shift on the order parameter pinning the generalized mean.
    double mass = 0.0;
    for (int j = 0; j < grid_.ny; ++j) {
      const double w = grid_.bulk_weight(j);
      double row = 0.0;
      for (int i = 0; i < grid_.nx; ++i) row += v[grid_.idx(i, j)];
      mass += w * row;
    }
    double edge = 0.0;
    for (int i = 0; i < grid_.nx; ++i)
      edge += v[grid_.idx(i, 0)] + v[grid_.idx(i, grid_.ny - 1)];
    mass += grid_.surf_weight() * edge;
    const double shift =
        mass / (grid_.omega_measure() + grid_.gamma_measure()) - target_mean_;
    if (shift != 0.0)
      for (int k = 0; k < n; ++k) v[k] -= shift;
  };

  StepUnknowns cur = unpack_unknowns(grid_, params_, x);
  std::vector<double> res =
      step_residual(grid_, params_, config_.scheme, tau, phi_old, cur);
  double rn = inf_norm(res);

  for (int it = 0; it < config_.newton_max; ++it) {
    if (rn <= config_.newton_tol) {
      *defect = std::max(*defect, rn);
      return cur;
    }
    ws_->assemble(grid_, params_, config_.scheme, tau, cur);
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(res.size()));
    for (std::size_t q = 0; q < res.size(); ++q)
      rhs[static_cast<Eigen::Index>(q)] = -res[q];
    const Eigen::VectorXd d = ws_->lu.solve(rhs);
    if (ws_->lu.info() != Eigen::Success)
      throw SolverError("step Jacobian solve failed");

    // Fraction-to-boundary damping against the singular barrier.
    double lam = 1.0;
    if (cap_bulk || cap_bnd) {
      double t_hit = std::numeric_limits<double>::infinity();
      for (int j = 0; j < grid_.ny; ++j) {
        const bool bnd = grid_.boundary_row(j);
        if (!(bnd ? cap_bnd : cap_bulk)) continue;
        for (int i = 0; i < grid_.nx; ++i) {
          const int k = grid_.idx(i, j);
          const double dk = d[k];
          if (dk == 0.0) continue;
          const double room = dk > 0.0 ? config_.phase_cap - x[k]
                                       : x[k] + config_.phase_cap;
          if (room <= 0.0) {
            t_hit = 0.0;
            break;
          }
          t_hit = std::min(t_hit, room / std::abs(dk));
        }
      }
      if (t_hit < 1.0) lam = 0.995 * t_hit;
      if (!(lam > 1e-14))
        throw ConvergenceError("newton step pinned against the phase barrier");
    }

    bool accepted = false;
    std::vector<double> xt(x.size());
    for (int bt = 0; bt <= config_.max_backtracks; ++bt) {
      for (std::size_t q = 0; q < x.size(); ++q)
        xt[q] = x[q] + lam * d[static_cast<Eigen::Index>(q)];
      project(xt);
      StepUnknowns trial = unpack_unknowns(grid_, params_, xt);
      std::vector<double> rt =
          step_residual(grid_, params_, config_.scheme, tau, phi_old, trial);
      const double rtn = inf_norm(rt);
      if (rtn <= (1.0 - 1e-4 * lam) * rn || rtn <= config_.newton_tol) {
        x.swap(xt);
        cur = std::move(trial);
        res = std::move(rt);
        rn = rtn;
        accepted = true;
        break;
      }
      lam *= 0.5;
    }
    ++*iters;
    if (!accepted)
      throw ConvergenceError("newton line search stalled at residual " +
                             std::to_string(rn));
  }
  if (rn <= config_.newton_tol) {  // tolerance reached on the last update
    *defect = std::max(*defect, rn);
    return cur;
  }
  throw ConvergenceError("newton did not reach tolerance in " +
                         std::to_string(config_.newton_max) +
                         " iterations (residual " + std::to_string(rn) + ")");
}

StepUnknowns Stepper::advance_segment(double tau, int depth,
                                      const BulkSurfacePair& phi_old,
                                      StepUnknowns guess, int* iters,
                                      int* bisections, double* defect) const {
  try {
    return solve_step(tau, phi_old, guess, iters, defect);
  } catch (const ConvergenceError&) {
    if (depth >= config_.max_bisections) throw;
  } catch (const SolverError&) {
    if (depth >= config_.max_bisections) throw;
  }
  ++*bisections;
  StepUnknowns mid = advance_segment(0.5 * tau, depth + 1, phi_old, guess,
                                     iters, bisections, defect);
  const BulkSurfacePair mid_phi = mid.phi;
  return advance_segment(0.5 * tau, depth + 1, mid_phi, std::move(mid), iters,
                         bisections, defect);
}

StepDiagnostics Stepper::advance() {
  StepDiagnostics diag;
  int iters = 0, bisections = 0;
  double defect = 0.0;
  const BulkSurfacePair phi_old = phi_;
  StepUnknowns guess{phi_, mu_, theta_};
  StepUnknowns u = advance_segment(config_.tau, 0, phi_old, std::move(guess),
                                   &iters, &bisections, &defect);

  // One exact re-projection of the conserved mean at acceptance.
  const double shift = generalized_mean(grid_, u.phi) - target_mean_;
  if (shift != 0.0) {
    for (double& v : u.phi.bulk) v -= shift;
    sync_trace(grid_, u.phi);
  }
  phi_ = std::move(u.phi);
  mu_ = std::move(u.mu);
  theta_ = std::move(u.theta);
  t_ += config_.tau;
  step_ += 1;

  diag.newton_iters = iters;
  diag.bisections = bisections;
  diag.energy = energy();
  diag.mean = generalized_mean(grid_, phi_);
  diag.dissipation = dissipation();
  double amax = 0.0;
  for (double v : phi_.bulk) amax = std::max(amax, std::abs(v));
  diag.separation = 1.0 - amax;
  if (bisections == 0) {
    // Re-evaluate at the stored state so the mean re-projection is included.
    StepUnknowns fin{phi_, mu_, theta_};
    diag.defect = inf_norm(step_residual(grid_, params_, config_.scheme,
                                         config_.tau, phi_old, fin));
  } else {
    diag.defect = defect;  // max accepted residual over the sub-steps
  }
  return diag;
}

BulkSurfacePair constant_state(const SlabGrid& g, double mean) {
  BulkSurfacePair phi;
  phi.bulk.assign(static_cast<std::size_t>(g.n_bulk()), mean);
  phi.surf.assign(static_cast<std::size_t>(g.n_surf()), mean);
  phi.linkage = Linkage::TraceLinked;
  return phi;
}

BulkSurfacePair noisy_state(const SlabGrid& g, double mean, double amplitude,
                            std::uint64_t seed) {
  BulkSurfacePair phi = constant_state(g, mean);
  SplitMix64 rng(seed);
  for (double& v : phi.bulk) v = mean + amplitude * rng.next_symmetric();
  sync_trace(g, phi);
  const double shift = generalized_mean(g, phi) - mean;
  if (shift != 0.0) {
    for (double& v : phi.bulk) v -= shift;
    sync_trace(g, phi);
  }
  return phi;
}

void check_initial_state(const SlabGrid& g, const ModelParams& p,
                         const BulkSurfacePair& phi) {
  check_pair(g, phi, "check_initial_state");
  const double mean = generalized_mean(g, phi);
  if (!(mean > -1.0 && mean < 1.0))
    throw InitError("initial generalized mean " + std::to_string(mean) +
                    " must lie strictly inside (-1, 1)");
  if (p.reg == Regularization::Exact &&
      (p.potential.bulk.singular() || p.potential.boundary.singular())) {
    double amax = 0.0;
    for (double v : phi.bulk) amax = std::max(amax, std::abs(v));
    for (double v : phi.surf) amax = std::max(amax, std::abs(v));
    if (amax > 1.0 - 1e-6)
      throw InitError("initial state reaches " + std::to_string(amax) +
                      "; the singular potential needs max |phi| <= 1 - 1e-6");
  }
}

void derive_potentials(const SlabGrid& g, const ModelParams& p,
                       const BulkSurfacePair& phi, BulkSurfacePair& mu,
                       Field& theta) {
  check_pair(g, phi, "derive_potentials");
  Field lap_phi, dn_phi, lg_psi;
  lap_bulk(g, phi.bulk, lap_phi);
  normal_derivative(g, phi.bulk, dn_phi);
  lap_surface(g, phi.surf, lg_psi);

  mu.bulk.resize(static_cast<std::size_t>(g.n_bulk()));
  mu.surf.assign(static_cast<std::size_t>(g.n_surf()), 0.0);
  mu.linkage = Linkage::TraceLinked;
  for (int k = 0; k < g.n_bulk(); ++k) {
    const double r = phi.bulk[k];
    mu.bulk[k] = -lap_phi[k] + convex_part(p, Side::Bulk, r).value +
                 eval_pi(p.potential, Side::Bulk, r).value;
  }
  sync_trace(g, mu);

  theta.resize(static_cast<std::size_t>(g.n_surf()));
  if (p.L > 0.0) {
    for (int s = 0; s < g.n_surf(); ++s) {
      const double r = phi.surf[s];
      theta[s] = dn_phi[s] - lg_psi[s] +
                 convex_part(p, Side::Boundary, r).value +
                 eval_pi(p.potential, Side::Boundary, r).value;
    }
  } else {
    theta = mu.surf;
  }
}

}  // namespace chbs
