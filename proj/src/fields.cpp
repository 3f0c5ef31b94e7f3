// fields.cpp -- pair operations and the conjugate-gradient inverse solve.

#include "chbs/fields.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

namespace chbs {

BulkSurfacePair make_trace_linked(const SlabGrid& g, Field bulk) {
  BulkSurfacePair y;
  y.bulk = std::move(bulk);
  y.surf.assign(static_cast<std::size_t>(g.n_surf()), 0.0);
  y.linkage = Linkage::TraceLinked;
  check_pair(g, y, "make_trace_linked");
  sync_trace(g, y);
  return y;
}

void sync_trace(const SlabGrid& g, BulkSurfacePair& y) {
  const int top = g.ny - 1;
  for (int i = 0; i < g.nx; ++i) {
    y.surf[i] = y.bulk[g.idx(i, 0)];
    y.surf[g.nx + i] = y.bulk[g.idx(i, top)];
  }
}

void check_pair(const SlabGrid& g, const BulkSurfacePair& y, const char* who) {
  if (static_cast<int>(y.bulk.size()) != g.n_bulk() ||
      static_cast<int>(y.surf.size()) != g.n_surf()) {
    std::ostringstream os;
    os << who << ": pair extents (" << y.bulk.size() << ", " << y.surf.size()
       << ") do not match grid (" << g.n_bulk() << ", " << g.n_surf() << ")";
    throw ShapeError(os.str());
  }
}

double generalized_mean(const SlabGrid& g, const BulkSurfacePair& y) {
  check_pair(g, y, "generalized_mean");
  return (integrate_bulk(g, y.bulk) + integrate_surface(g, y.surf)) /
         (g.omega_measure() + g.gamma_measure());
}

void project_zero_mean(const SlabGrid& g, BulkSurfacePair& y) {
  const double m = generalized_mean(g, y);
  for (double& v : y.bulk) v -= m;
  for (double& v : y.surf) v -= m;
}

namespace {

double energy_with(const SlabGrid& g, const BulkSurfacePair& phi,
                   const std::function<double(Side, double)>& density) {
  check_pair(g, phi, "total_energy");
  double e = 0.5 * a_bulk_gradient(g, phi.bulk, phi.bulk) +
             0.5 * a_surface_gradient(g, phi.surf, phi.surf);
  for (int j = 0; j < g.ny; ++j) {
    const double w = g.bulk_weight(j);
    double row = 0.0;
    for (int i = 0; i < g.nx; ++i) row += density(Side::Bulk, phi.bulk[g.idx(i, j)]);
    e += w * row;
  }
  double srow = 0.0;
  for (double v : phi.surf) srow += density(Side::Boundary, v);
  e += g.surf_weight() * srow;
  return e;
}

}  // namespace

double total_energy(const SlabGrid& g, const PotentialSpec& spec,
                    const BulkSurfacePair& phi) {
  return energy_with(g, phi, [&](Side s, double r) {
    return eval_energy_density(spec, s, r);
  });
}

double total_energy_regularized(const SlabGrid& g, const PotentialSpec& spec,
                                const YosidaConfig& yos,
                                const BulkSurfacePair& phi) {
  return energy_with(g, phi, [&](Side s, double r) {
    return moreau_envelope(spec, s, r, yos) + eval_pi_hat(spec, s, r);
  });
}

namespace {

// Flattened operator/vector plumbing for the conjugate-gradient solve.  For
// L > 0 the unknown vector stacks bulk then surface values; for L = 0 it is
// the bulk values only (the surface is the trace).
struct EllipticSystem {
  const SlabGrid& g;
  double L, sigma;
  bool linked;  // L == 0
  int n;        // unknown count

  EllipticSystem(const SlabGrid& grid, double L_, double sigma_)
      : g(grid), L(L_), sigma(sigma_), linked(L_ == 0.0),
        n(linked ? grid.n_bulk() : grid.n_bulk() + grid.n_surf()) {}

  // out = action of the coupling form on the test basis: out_k = a(x, e_k).
  void apply(const std::vector<double>& x, std::vector<double>& out) const {
    const double cx = g.hy / g.hx;
    const double cy = g.hx / g.hy;
    const double xL = chi(L);
    const int nx = g.nx, top = g.ny - 1;
    out.assign(x.size(), 0.0);

    for (int j = 0; j < g.ny; ++j) {
      const double rw = g.boundary_row(j) ? 0.5 : 1.0;
      for (int i = 0; i < nx; ++i) {
        const int k = g.idx(i, j);
        const int iw = g.idx((i + nx - 1) % nx, j);
        const int ie = g.idx((i + 1) % nx, j);
        double v = rw * cx * (2.0 * x[k] - x[iw] - x[ie]);
        if (j > 0) v += cy * (x[k] - x[g.idx(i, j - 1)]);
        if (j < top) v += cy * (x[k] - x[g.idx(i, j + 1)]);
        out[k] += v;
      }
    }

    if (linked) {
      // sigma * surface gradient acting on the traces; output lands on the
      // boundary-row unknowns.
      if (sigma != 0.0) {
        const double sx = sigma / g.hx;
        for (int s = 0; s < 2; ++s) {
          const int j = s == 0 ? 0 : top;
          for (int i = 0; i < nx; ++i) {
            const int k = g.idx(i, j);
            const int kw = g.idx((i + nx - 1) % nx, j);
            const int ke = g.idx((i + 1) % nx, j);
            out[k] += sx * (2.0 * x[k] - x[kw] - x[ke]);
          }
        }
      }
      return;
    }

    const int nb = g.n_bulk();
    if (sigma != 0.0) {
      const double sx = sigma / g.hx;
      for (int s = 0; s < 2; ++s) {
        const int base = nb + s * nx;
        for (int i = 0; i < nx; ++i) {
          const int k = base + i;
          const int kw = base + (i + nx - 1) % nx;
          const int ke = base + (i + 1) % nx;
          out[k] += sx * (2.0 * x[k] - x[kw] - x[ke]);
        }
      }
    }
    if (xL != 0.0) {
      const double jw = xL * g.surf_weight();
      for (int i = 0; i < nx; ++i) {
        const int kb0 = g.idx(i, 0), kb1 = g.idx(i, top);
        const int ks0 = nb + i, ks1 = nb + nx + i;
        const double d0 = x[kb0] - x[ks0];
        const double d1 = x[kb1] - x[ks1];
        out[kb0] += jw * d0;
        out[ks0] -= jw * d0;
        out[kb1] += jw * d1;
        out[ks1] -= jw * d1;
      }
    }
  }

  std::vector<double> jacobi_diag() const {
    const double cx = g.hy / g.hx;
    const double cy = g.hx / g.hy;
    const double xL = chi(L);
    std::vector<double> d(static_cast<std::size_t>(n), 0.0);
    for (int j = 0; j < g.ny; ++j) {
      const double rw = g.boundary_row(j) ? 0.5 : 1.0;
      const double dy = g.boundary_row(j) ? cy : 2.0 * cy;
      for (int i = 0; i < g.nx; ++i) d[g.idx(i, j)] = 2.0 * rw * cx + dy;
    }
    if (linked) {
      if (sigma != 0.0) {
        const double sx = sigma / g.hx;
        for (int i = 0; i < g.nx; ++i) {
          d[g.idx(i, 0)] += 2.0 * sx;
          d[g.idx(i, g.ny - 1)] += 2.0 * sx;
        }
      }
      return d;
    }
    const int nb = g.n_bulk();
    for (int k = 0; k < g.n_surf(); ++k)
      d[nb + k] = sigma != 0.0 ? 2.0 * sigma / g.hx : 0.0;
    if (xL != 0.0) {
      const double jw = xL * g.surf_weight();
      for (int i = 0; i < g.nx; ++i) {
        d[g.idx(i, 0)] += jw;
        d[g.idx(i, g.ny - 1)] += jw;
        d[nb + i] += jw;
        d[nb + g.nx + i] += jw;
      }
    }
    for (double& v : d)
      if (v <= 0.0) v = 1.0;
    return d;
  }

  // Quadrature weights pairing unknowns with the measure (for means).
  std::vector<double> measure_weights() const {
    std::vector<double> w(static_cast<std::size_t>(n), 0.0);
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) w[g.idx(i, j)] = g.bulk_weight(j);
    if (linked) {
      for (int i = 0; i < g.nx; ++i) {
        w[g.idx(i, 0)] += g.surf_weight();
        w[g.idx(i, g.ny - 1)] += g.surf_weight();
      }
    } else {
      for (int k = 0; k < g.n_surf(); ++k)
        w[g.n_bulk() + k] = g.surf_weight();
    }
    return w;
  }

  // Weighted right-hand side (rhs paired with the test basis).
  std::vector<double> weighted_rhs(const BulkSurfacePair& rhs) const {
    std::vector<double> b(static_cast<std::size_t>(n), 0.0);
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i)
        b[g.idx(i, j)] = g.bulk_weight(j) * rhs.bulk[g.idx(i, j)];
    if (linked) {
      for (int i = 0; i < g.nx; ++i) {
        b[g.idx(i, 0)] += g.surf_weight() * rhs.surf[i];
        b[g.idx(i, g.ny - 1)] += g.surf_weight() * rhs.surf[g.nx + i];
      }
    } else {
      for (int k = 0; k < g.n_surf(); ++k)
        b[g.n_bulk() + k] = g.surf_weight() * rhs.surf[k];
    }
    return b;
  }

  BulkSurfacePair unflatten(const std::vector<double>& x) const {
    BulkSurfacePair y;
    y.bulk.assign(x.begin(), x.begin() + g.n_bulk());
    if (linked) {
      y.surf.assign(static_cast<std::size_t>(g.n_surf()), 0.0);
      y.linkage = Linkage::TraceLinked;
      sync_trace(g, y);
    } else {
      y.surf.assign(x.begin() + g.n_bulk(), x.end());
      y.linkage = Linkage::Independent;
    }
    return y;
  }
};

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

BulkSurfacePair hminus_solve(const SlabGrid& g, double L, double sigma,
                             const BulkSurfacePair& rhs,
                             const HminusOptions& opts) {
  check_pair(g, rhs, "hminus_solve");
  if (L > 0.0 && sigma == 0.0)
    throw RegimeError("L > 0 with sigma = 0 is outside the coupling matrix");

  double rhs_scale = 0.0;
  for (double v : rhs.bulk) rhs_scale = std::max(rhs_scale, std::abs(v));
  for (double v : rhs.surf) rhs_scale = std::max(rhs_scale, std::abs(v));
  const double mean = generalized_mean(g, rhs);
  if (std::abs(mean) > opts.mean_tol * std::max(1.0, rhs_scale))
    throw MeanError("hminus_solve rhs has generalized mean " +
                    std::to_string(mean) + ", compatibility requires zero");

  const EllipticSystem sys(g, L, sigma);
  std::vector<double> b = sys.weighted_rhs(rhs);
  std::vector<double> x(b.size(), 0.0);

  const double bnorm = std::sqrt(dot(b, b));
  if (bnorm == 0.0) return sys.unflatten(x);

  const std::vector<double> diag = sys.jacobi_diag();
  const std::vector<double> mw = sys.measure_weights();
  const double total_w = g.omega_measure() + g.gamma_measure();
  auto project = [&](std::vector<double>& v) {
    const double m = dot(mw, v) / total_w;
    for (double& c : v) c -= m;
  };

  std::vector<double> r = b, z(b.size()), p(b.size()), ap(b.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = r[i] / diag[i];
  p = z;
  double rz = dot(r, z);

  for (int it = 0; it < opts.max_iter; ++it) {
    sys.apply(p, ap);
    const double pap = dot(p, ap);
    if (!(pap > 0.0)) {
      // Direction lies in the kernel (numerically); drop its mean and redo.
      project(p);
      sys.apply(p, ap);
      if (!(dot(p, ap) > 0.0))
        throw SolverError("conjugate gradients hit a non-positive curvature "
                          "direction");
    }
    const double alpha = rz / dot(p, ap);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += alpha * p[i];
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= alpha * ap[i];
    project(x);  // keep the iterate in the zero-mean subspace

    if (std::sqrt(dot(r, r)) <= opts.tol * bnorm) {
      // Guard against recursion drift before accepting.
      sys.apply(x, ap);
      double true_sq = 0.0;
      for (std::size_t i = 0; i < b.size(); ++i) {
        const double d = b[i] - ap[i];
        true_sq += d * d;
      }
      if (std::sqrt(true_sq) <= opts.tol * bnorm) return sys.unflatten(x);
      for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - ap[i];
    }

    for (std::size_t i = 0; i < z.size(); ++i) z[i] = r[i] / diag[i];
    const double rz_next = dot(r, z);
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = z[i] + beta * p[i];
  }
  throw SolverError("conjugate gradients exhausted " +
                    std::to_string(opts.max_iter) + " iterations");
}

double hminus_norm(const SlabGrid& g, double L, double sigma,
                   const BulkSurfacePair& y, const HminusOptions& opts) {
  check_pair(g, y, "hminus_norm");
  BulkSurfacePair py = y;
  const double m = generalized_mean(g, y);
  for (double& v : py.bulk) v -= m;
  for (double& v : py.surf) v -= m;
  const BulkSurfacePair u = hminus_solve(g, L, sigma, py, opts);
  const double semi_sq = bilinear_a(g, L, sigma, u, u);
  return std::sqrt(std::max(0.0, semi_sq) + m * m);
}

void validate_params(const ModelParams& p) {
  if (!(p.L >= 0.0) || !std::isfinite(p.L))
    throw RegimeError("kinetic coefficient L must be finite and >= 0, got " +
                      std::to_string(p.L));
  if (!(p.sigma >= 0.0) || !std::isfinite(p.sigma))
    throw RegimeError("surface diffusion sigma must be finite and >= 0");
  if (p.L > 0.0 && p.sigma == 0.0)
    throw RegimeError(
        "the coupling matrix admits {L > 0, sigma > 0} or {L = 0, "
        "sigma >= 0}; got L > 0 with sigma = 0");
  if (p.reg == Regularization::Yosida &&
      !(p.yosida.epsilon > 0.0 && p.yosida.epsilon < 1.0))
    throw ParamError("yosida epsilon must lie in (0,1)");
  if (!(p.potential.rho > 0.0))
    throw ParamError("domination constant rho must be positive");
}

}  // namespace chbs
