// diagnostics.cpp -- structure checks computed from profiles and series.

#include "chbs/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "chbs/errors.hpp"

namespace chbs {

double separation_delta(const SlabGrid& g, const BulkSurfacePair& phi) {
  check_pair(g, phi, "separation_delta");
  double amax = 0.0;
  for (double v : phi.bulk) amax = std::max(amax, std::abs(v));
  for (double v : phi.surf) amax = std::max(amax, std::abs(v));
  return 1.0 - amax;
}

namespace {

template <class Pred>
double measure_where(const SlabGrid& g, const BulkSurfacePair& phi, Pred pred) {
  double m = 0.0;
  for (int j = 0; j < g.ny; ++j) {
    const double w = g.bulk_weight(j);
    for (int i = 0; i < g.nx; ++i)
      if (pred(phi.bulk[g.idx(i, j)])) m += w;
  }
  for (double v : phi.surf)
    if (pred(v)) m += g.surf_weight();
  return m;
}

}  // namespace

double measure_above(const SlabGrid& g, const BulkSurfacePair& phi,
                     double level) {
  check_pair(g, phi, "measure_above");
  return measure_where(g, phi, [&](double v) { return v >= level; });
}

double measure_below(const SlabGrid& g, const BulkSurfacePair& phi,
                     double level) {
  check_pair(g, phi, "measure_below");
  return measure_where(g, phi, [&](double v) { return v <= level; });
}

std::vector<double> level_ladder(double delta, int count) {
  if (!(delta > 0.0 && delta < 0.5))
    throw ParamError("level ladder needs delta in (0, 0.5)");
  if (count < 1) throw ParamError("level ladder needs at least one level");
  std::vector<double> k(static_cast<std::size_t>(count));
  double half = delta;
  for (int n = 0; n < count; ++n) {
    k[static_cast<std::size_t>(n)] = 1.0 - delta - half;
    half *= 0.5;
  }
  return k;
}

std::vector<double> ladder_measures(const SlabGrid& g,
                                    const BulkSurfacePair& phi,
                                    const std::vector<double>& levels) {
  std::vector<double> z;
  z.reserve(levels.size());
  for (double k : levels)
    z.push_back(measure_above(g, phi, k) + measure_below(g, phi, -k));
  return z;
}

double decay_threshold(double c_const, double b_const, double eps) {
  if (!(c_const > 0.0) || !(b_const > 1.0) || !(eps > 0.0 && eps < 1.0))
    throw ParamError("decay threshold needs C > 0, b > 1, eps in (0,1)");
  return std::pow(c_const, -1.0 / eps) * std::pow(b_const, -1.0 / (eps * eps));
}

DecayReport check_level_decay(const std::vector<double>& z, double c_const,
                              double b_const, double eps) {
  DecayReport rep;
  rep.threshold = decay_threshold(c_const, b_const, eps);
  rep.pass = true;
  const double slack = 1.0 + 1e-12;
  for (std::size_t n = 0; n < z.size(); ++n) {
    const double bound =
        rep.threshold * std::pow(b_const, -static_cast<double>(n) / eps);
    if (z[n] > bound * slack) {
      rep.pass = false;
      rep.first_violation = static_cast<int>(n);
      break;
    }
  }
  return rep;
}

DissipationTerms dissipation_terms(const SlabGrid& g, const ModelParams& p,
                                   const BulkSurfacePair& mu) {
  check_pair(g, mu, "dissipation_terms");
  DissipationTerms out;
  out.bulk_gradient = a_bulk_gradient(g, mu.bulk, mu.bulk);
  out.surface_gradient = p.sigma * a_surface_gradient(g, mu.surf, mu.surf);
  const double xl = chi(p.L);
  if (xl != 0.0) {
    double jump = 0.0;
    const int top = g.ny - 1;
    for (int i = 0; i < g.nx; ++i) {
      const double d0 = mu.bulk[g.idx(i, 0)] - mu.surf[i];
      const double d1 = mu.bulk[g.idx(i, top)] - mu.surf[g.nx + i];
      jump += d0 * d0 + d1 * d1;
    }
    out.kinetic_jump = xl * g.surf_weight() * jump;
  }
  out.total = out.bulk_gradient + out.surface_gradient + out.kinetic_jump;
  return out;
}

RateFit fit_convergence_rate(const std::vector<double>& times,
                             const std::vector<double>& dists) {
  if (times.size() != dists.size())
    throw ShapeError("rate fit needs aligned time and distance series");
  std::vector<double> xs, ys;
  int floored = 0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < 1.0) continue;
    if (!(dists[i] > 1e-13)) {
      ++floored;
      continue;
    }
    xs.push_back(std::log1p(times[i]));
    ys.push_back(std::log(dists[i]));
  }
  if (static_cast<int>(xs.size()) < 10) {
    if (floored > 0)
      throw FitError(
          "distances fall below the 1e-13 noise floor; the decay is faster "
          "than any power law");
    throw FitError("rate fit needs at least 10 samples with t >= 1");
  }

  const double n = static_cast<double>(xs.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const double det = n * sxx - sx * sx;
  if (!(std::abs(det) > 1e-14 * n * sxx))
    throw FitError("rate fit is degenerate: times do not spread");
  const double slope = (n * sxy - sx * sy) / det;
  const double inter = (sy - slope * sx) / n;

  double rss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double e = ys[i] - (inter + slope * xs[i]);
    rss += e * e;
  }
  RateFit fit;
  fit.p = -slope;
  fit.prefactor = std::exp(inter);
  fit.rms = std::sqrt(rss / n);
  fit.used = static_cast<int>(xs.size());
  if (fit.rms > 0.25)
    throw FitError("decay is not a power law (ln-space rms " +
                   std::to_string(fit.rms) + ")");
  if (!(fit.p > 0.0))
    throw FitError("fitted exponent is not positive (" +
                   std::to_string(fit.p) + ")");
  fit.theta_star = fit.p / (1.0 + 2.0 * fit.p);
  return fit;
}

double l2_distance(const SlabGrid& g, const BulkSurfacePair& a,
                   const BulkSurfacePair& b) {
  check_pair(g, a, "l2_distance");
  check_pair(g, b, "l2_distance");
  double s = 0.0;
  for (int j = 0; j < g.ny; ++j) {
    const double w = g.bulk_weight(j);
    for (int i = 0; i < g.nx; ++i) {
      const double d = a.bulk[g.idx(i, j)] - b.bulk[g.idx(i, j)];
      s += w * d * d;
    }
  }
  for (int k = 0; k < g.n_surf(); ++k) {
    const double d = a.surf[k] - b.surf[k];
    s += g.surf_weight() * d * d;
  }
  return std::sqrt(s);
}

double h1_distance(const SlabGrid& g, const BulkSurfacePair& a,
                   const BulkSurfacePair& b) {
  BulkSurfacePair d = a;
  for (int k = 0; k < g.n_bulk(); ++k) d.bulk[k] -= b.bulk[k];
  for (int k = 0; k < g.n_surf(); ++k) d.surf[k] -= b.surf[k];
  const double l2 = l2_distance(g, a, b);
  return std::sqrt(l2 * l2 + a_bulk_gradient(g, d.bulk, d.bulk) +
                   a_surface_gradient(g, d.surf, d.surf));
}

EnergyAudit energy_balance_audit(const std::vector<double>& energies,
                                 const std::vector<double>& dissipations,
                                 double tau) {
  if (energies.size() != dissipations.size())
    throw ShapeError("energy audit needs aligned series");
  EnergyAudit audit;
  audit.max_increase = -std::numeric_limits<double>::infinity();
  audit.max_balance_gap = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < energies.size(); ++i) {
    const double diff = energies[i + 1] - energies[i];
    audit.max_increase = std::max(audit.max_increase, diff);
    audit.max_balance_gap =
        std::max(audit.max_balance_gap, diff + tau * dissipations[i + 1]);
  }
  if (energies.size() < 2) {
    audit.max_increase = 0.0;
    audit.max_balance_gap = 0.0;
  }
  return audit;
}

}  // namespace chbs
