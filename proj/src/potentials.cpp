// potentials.cpp -- free-energy densities and Moreau--Yosida regularization.

#include "chbs/potentials.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace chbs {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

const PotentialSide& side_of(const PotentialSpec& spec, Side side) {
  return side == Side::Bulk ? spec.bulk : spec.boundary;
}

// Weight multiplying beta inside the resolvent equation J + c*beta(J) = r.
double resolvent_weight(const PotentialSpec& spec, Side side,
                        const YosidaConfig& cfg) {
  if (!(cfg.epsilon > 0.0 && cfg.epsilon < 1.0))
    throw ParamError("yosida epsilon must lie in (0,1), got " +
                     std::to_string(cfg.epsilon));
  double c = cfg.epsilon;
  if (side == Side::Boundary) {
    if (!(spec.rho > 0.0))
      throw ParamError("domination constant rho must be positive");
    c *= spec.rho;
  }
  return c;
}

[[noreturn]] void throw_domain(const char* what, double r) {
  std::ostringstream os;
  os << what << " undefined at r = " << r
     << " (singular nonlinearity lives on (-1,1))";
  throw DomainError(os.str());
}

double require_callable(const std::function<double(double)>& f,
                        const char* name, double r) {
  if (!f) throw ConfigError(std::string("custom potential missing ") + name);
  return f(r);
}

}  // namespace

PotentialSpec PotentialSpec::logarithmic(double theta, double theta_c) {
  if (!(theta > 0.0))
    throw ConfigError("logarithmic potential needs theta > 0, got " +
                      std::to_string(theta));
  if (theta_c < 0.0)
    throw ConfigError("logarithmic potential needs theta_c >= 0, got " +
                      std::to_string(theta_c));
  PotentialSpec spec;
  spec.bulk.kind = PotentialKind::Logarithmic;
  spec.bulk.theta = theta;
  spec.bulk.theta_c = theta_c;
  spec.boundary = spec.bulk;
  return spec;
}

PotentialSpec PotentialSpec::custom(CustomPotential c) {
  PotentialSpec spec;
  spec.bulk.kind = PotentialKind::Custom;
  spec.bulk.custom = std::move(c);
  spec.boundary = spec.bulk;
  return spec;
}

Deriv eval_beta(const PotentialSpec& spec, Side side, double r) {
  const PotentialSide& p = side_of(spec, side);
  if (p.singular() && std::abs(r) >= 1.0) throw_domain("beta", r);
  if (p.kind == PotentialKind::Logarithmic) {
    // beta = theta*atanh(r); the derivative uses the factored form to stay
    // accurate as |r| -> 1.
    return {p.theta * std::atanh(r), p.theta / ((1.0 - r) * (1.0 + r))};
  }
  return {require_callable(p.custom.beta, "beta", r),
          require_callable(p.custom.beta_prime, "beta_prime", r)};
}

Deriv eval_pi(const PotentialSpec& spec, Side side, double r) {
  const PotentialSide& p = side_of(spec, side);
  if (p.kind == PotentialKind::Logarithmic) return {-p.theta_c * r, -p.theta_c};
  return {require_callable(p.custom.pi, "pi", r),
          require_callable(p.custom.pi_prime, "pi_prime", r)};
}

double eval_beta_hat(const PotentialSpec& spec, Side side, double r) {
  const PotentialSide& p = side_of(spec, side);
  if (p.singular() && std::abs(r) > 1.0) throw_domain("beta_hat", r);
  if (p.kind == PotentialKind::Logarithmic) {
    if (r == 1.0 || r == -1.0) return p.theta * std::numbers::ln2;
    return 0.5 * p.theta *
           ((1.0 + r) * std::log1p(r) + (1.0 - r) * std::log1p(-r));
  }
  if (p.custom.singular) {
    if (r == 1.0) return p.custom.beta_hat_pos_end;
    if (r == -1.0) return p.custom.beta_hat_neg_end;
  }
  return require_callable(p.custom.beta_hat, "beta_hat", r);
}

double eval_pi_hat(const PotentialSpec& spec, Side side, double r) {
  const PotentialSide& p = side_of(spec, side);
  if (p.kind == PotentialKind::Logarithmic) return -0.5 * p.theta_c * r * r;
  return require_callable(p.custom.pi_hat, "pi_hat", r);
}

double eval_energy_density(const PotentialSpec& spec, Side side, double r) {
  return eval_beta_hat(spec, side, r) + eval_pi_hat(spec, side, r);
}

namespace {

// Logarithmic resolvent in transformed coordinates: writing J = tanh(a)
// turns J + c*theta*atanh(J) = r into tanh(a) + c*theta*a = r, which is
// well-conditioned for every r (no loss of bracket near the endpoints,
// where J itself differs from +-1 by less than one ulp).
ResolventResult resolvent_logarithmic(double theta, double c, double r,
                                      const YosidaConfig& cfg) {
  const double k = c * theta;
  double lo = (r - 1.0) / k;  // g(lo) = tanh - 1 <= 0
  double hi = (r + 1.0) / k;  // g(hi) = tanh + 1 >= 0
  double a = r / (1.0 + k);   // linearized guess tanh(a) ~ a
  a = std::clamp(a, lo, hi);

  ResolventResult out;
  double g = 0.0;
  int it = 0;
  for (; it < cfg.max_iter; ++it) {
    const double t = std::tanh(a);
    g = t + k * a - r;
    if (std::abs(g) <= cfg.newton_tol) break;
    if (g > 0.0) hi = a; else lo = a;
    const double sech2 = 1.0 - t * t;
    double step = g / (sech2 + k);
    double next = a - step;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    a = next;
  }
  if (std::abs(g) > cfg.newton_tol)
    throw ConvergenceError("resolvent iteration stalled at residual " +
                           std::to_string(std::abs(g)));

  const double cap = std::nextafter(1.0, 0.0);
  out.j = std::clamp(std::tanh(a), -cap, cap);
  out.beta_j = theta * a;
  const double sech2 = (1.0 - out.j) * (1.0 + out.j);
  out.dbeta_j = sech2 > 0.0 ? theta / sech2 : kInf;
  out.residual = std::abs(out.j + c * out.beta_j - r);
  out.iterations = it;
  return out;
}

// Generic safeguarded Newton/bisection on g(J) = J + c*beta(J) - r over a
// bracket that always contains the root.
ResolventResult resolvent_custom(const PotentialSide& p, double c, double r,
                                 const YosidaConfig& cfg) {
  const double margin = 1e-16;
  double lo, hi;
  if (p.custom.singular) {
    lo = -1.0 + margin;
    hi = 1.0 - margin;
  } else {
    lo = r - std::abs(r) - 1.0;
    hi = r + std::abs(r) + 1.0;
  }
  auto g = [&](double j) {
    return j + c * require_callable(p.custom.beta, "beta", j) - r;
  };

  ResolventResult out;
  // For singular kinds the root can sit outside double resolution next to
  // an endpoint; pin it there and report the endpoint values.
  bool pinned = false;
  if (p.custom.singular) {
    if (g(hi) <= 0.0) { out.j = hi; pinned = true; }
    else if (g(lo) >= 0.0) { out.j = lo; pinned = true; }
  }
  if (!pinned) {
    double j = std::clamp(r / (1.0 + c), lo, hi);
    double gj = 0.0;
    int it = 0;
    for (; it < cfg.max_iter; ++it) {
      gj = g(j);
      if (std::abs(gj) <= cfg.newton_tol) break;
      if (gj > 0.0) hi = j; else lo = j;
      const double slope =
          1.0 + c * require_callable(p.custom.beta_prime, "beta_prime", j);
      double next = j - gj / slope;
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      j = next;
    }
    if (std::abs(gj) > cfg.newton_tol)
      throw ConvergenceError("resolvent iteration stalled at residual " +
                             std::to_string(std::abs(gj)));
    out.j = j;
    out.iterations = it;
  }
  out.beta_j = require_callable(p.custom.beta, "beta", out.j);
  out.dbeta_j = require_callable(p.custom.beta_prime, "beta_prime", out.j);
  out.residual = std::abs(out.j + c * out.beta_j - r);
  return out;
}

}  // namespace

ResolventResult resolvent(const PotentialSpec& spec, Side side, double r,
                          const YosidaConfig& cfg) {
  const PotentialSide& p = side_of(spec, side);
  const double c = resolvent_weight(spec, side, cfg);
  if (p.kind == PotentialKind::Logarithmic)
    return resolvent_logarithmic(p.theta, c, r, cfg);
  return resolvent_custom(p, c, r, cfg);
}

Deriv yosida_beta(const PotentialSpec& spec, Side side, double r,
                  const YosidaConfig& cfg) {
  const PotentialSide& p = side_of(spec, side);
  const double c = resolvent_weight(spec, side, cfg);
  const ResolventResult res = resolvent(spec, side, r, cfg);
  Deriv out;
  // (r - J)/c equals beta(J) at the exact root; the transformed logarithmic
  // solve returns beta(J) directly, which stays accurate when J saturates.
  if (p.kind == PotentialKind::Logarithmic) out.value = res.beta_j;
  else out.value = (r - res.j) / c;
  // beta'(J)/(1 + c beta'(J)), evaluated as 1/(c + 1/beta') so a blow-up of
  // beta' degrades gracefully to the Lipschitz bound 1/c.
  if (res.dbeta_j <= 0.0) out.deriv = 0.0;
  else out.deriv = 1.0 / (c + 1.0 / res.dbeta_j);
  return out;
}

double moreau_envelope(const PotentialSpec& spec, Side side, double r,
                       const YosidaConfig& cfg) {
  const PotentialSide& p = side_of(spec, side);
  const double c = resolvent_weight(spec, side, cfg);
  const ResolventResult res = resolvent(spec, side, r, cfg);
  double quadratic;
  if (p.kind == PotentialKind::Logarithmic) {
    // r - J = c*beta(J) at the root; the right-hand form avoids cancellation.
    quadratic = 0.5 * c * res.beta_j * res.beta_j;
  } else {
    const double d = r - res.j;
    quadratic = 0.5 * d * d / c;
  }
  return quadratic + eval_beta_hat(spec, side, res.j);
}

namespace {

// Least-squares slope of y against x.
double regression_slope(const std::vector<double>& x,
                        const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) { mx += x[i]; my += y[i]; }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  return sxy / sxx;
}

std::vector<double> sample_grid(bool singular, int n) {
  // Symmetric grid covering the working range of the side; odd count so the
  // minimizer of beta' at the origin is sampled exactly.
  const double extent = singular ? 1.0 - 1e-6 : 2.0;
  std::vector<double> r(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k)
    r[static_cast<std::size_t>(k)] =
        extent * (2.0 * k / static_cast<double>(n - 1) - 1.0);
  return r;
}

struct SideAudit {
  bool monotone = true;
  bool normalized = true;
  double varpi = kInf;
  double lipschitz_pi = 0.0;
  double kappa = 0.0;
  bool kappa_ok = false;
};

SideAudit audit_side(const PotentialSpec& spec, Side side, int n) {
  const PotentialSide& p = side_of(spec, side);
  SideAudit a;
  for (double r : sample_grid(p.singular(), n)) {
    const Deriv b = eval_beta(spec, side, r);
    const Deriv q = eval_pi(spec, side, r);
    if (!(b.deriv > 0.0)) a.monotone = false;
    if (r * b.value < -1e-12) a.monotone = false;
    a.varpi = std::min(a.varpi, b.deriv);
    a.lipschitz_pi = std::max(a.lipschitz_pi, std::abs(q.deriv));
  }
  if (std::abs(eval_beta(spec, side, 0.0).value) > 1e-12) a.normalized = false;
  if (std::abs(eval_beta_hat(spec, side, 0.0)) > 1e-12) a.normalized = false;
  if (p.singular()) {
    // Growth exponent: ln beta(1-2*delta) against ln|ln delta| over
    // delta in [1e-8, 1e-2].
    const int m = 20;
    std::vector<double> xs, ys;
    bool positive = true;
    for (int k = 0; k < m; ++k) {
      const double e = -2.0 - 6.0 * k / static_cast<double>(m - 1);
      const double delta = std::pow(10.0, e);
      const double b = eval_beta(spec, side, 1.0 - 2.0 * delta).value;
      if (!(b > 0.0)) { positive = false; break; }
      xs.push_back(std::log(std::abs(std::log(delta))));
      ys.push_back(std::log(b));
    }
    if (positive) {
      a.kappa = regression_slope(xs, ys);
      a.kappa_ok = a.kappa > 0.51;
    }
  }
  return a;
}

}  // namespace

bool AssumptionReport::pass() const {
  return a1_pass && a2_pass && coercivity_pass &&
         (!a5_applicable || a5_pass);
}

std::string AssumptionReport::to_text() const {
  std::ostringstream os;
  os.precision(17);
  os << "a1_pass = " << (a1_pass ? 1 : 0) << '\n'
     << "a2_pass = " << (a2_pass ? 1 : 0) << '\n'
     << "a2_max_violation = " << a2_max_violation << '\n'
     << "varpi_bulk = " << varpi_bulk << '\n'
     << "varpi_boundary = " << varpi_boundary << '\n'
     << "lipschitz_pi_bulk = " << lipschitz_pi_bulk << '\n'
     << "lipschitz_pi_boundary = " << lipschitz_pi_boundary << '\n'
     << "a5_applicable = " << (a5_applicable ? 1 : 0) << '\n'
     << "a5_pass = " << (a5_pass ? 1 : 0) << '\n'
     << "a5_kappa_bulk = " << a5_kappa_bulk << '\n'
     << "a5_kappa_boundary = " << a5_kappa_boundary << '\n'
     << "coercivity_pass = " << (coercivity_pass ? 1 : 0) << '\n'
     << "c3 = " << c3 << '\n'
     << "c4 = " << c4 << '\n'
     << "pass = " << (pass() ? 1 : 0) << '\n';
  for (const std::string& w : warnings) os << "warning = " << w << '\n';
  return os.str();
}

AssumptionReport check_assumptions(const PotentialSpec& spec, int sample_count,
                                   double mbar0) {
  if (sample_count < 100)
    throw ParamError("assumption audit needs at least 100 samples, got " +
                     std::to_string(sample_count));
  if (!(std::abs(mbar0) < 1.0))
    throw ParamError("mean must lie in (-1,1), got " + std::to_string(mbar0));
  const int n = sample_count | 1;  // odd so r = 0 is sampled

  AssumptionReport rep;
  const SideAudit bulk = audit_side(spec, Side::Bulk, n);
  const SideAudit bnd = audit_side(spec, Side::Boundary, n);
  rep.a1_pass = bulk.monotone && bulk.normalized && bnd.monotone &&
                bnd.normalized;
  rep.varpi_bulk = bulk.varpi;
  rep.varpi_boundary = bnd.varpi;
  rep.lipschitz_pi_bulk = bulk.lipschitz_pi;
  rep.lipschitz_pi_boundary = bnd.lipschitz_pi;
  rep.a5_applicable = spec.bulk.singular() && spec.boundary.singular();
  rep.a5_kappa_bulk = bulk.kappa;
  rep.a5_kappa_boundary = bnd.kappa;
  rep.a5_pass = bulk.kappa_ok && bnd.kappa_ok;

  // Domination of the bulk derivative by the boundary one, sampled on the
  // common working range.
  const bool any_singular = spec.bulk.singular() || spec.boundary.singular();
  {
    double worst = -kInf;
    for (double r : sample_grid(any_singular, n)) {
      const double b = std::abs(eval_beta(spec, Side::Bulk, r).value);
      const double bg = std::abs(eval_beta(spec, Side::Boundary, r).value);
      worst = std::max(worst, b - (spec.rho * bg + spec.c0));
    }
    rep.a2_max_violation = std::max(worst, 0.0);
    rep.a2_pass = worst <= 1e-10;
  }

  // Coercivity against the conserved mean: fit c4 for a fixed c3 on the
  // sample grid, then validate on a grid four times finer.
  {
    rep.c3 = 0.5 * std::min(1.0 - mbar0, 1.0 + mbar0);
    auto excess = [&](Side side, double r) {
      const double b = eval_beta(spec, side, r).value;
      return rep.c3 * std::abs(b) - b * (r - mbar0);
    };
    const std::vector<double> fit = sample_grid(any_singular, 4 * n + 1);
    double c4 = 0.0;
    for (double r : fit)
      c4 = std::max({c4, excess(Side::Bulk, r), excess(Side::Boundary, r)});
    // 1% headroom so the fitted pair holds beyond the fit nodes; validate on
    // the midpoint grid, which the fit never saw.
    rep.c4 = 1.01 * c4 + 1e-12;
    bool ok = true;
    for (std::size_t k = 0; k + 1 < fit.size(); ++k) {
      const double r = 0.5 * (fit[k] + fit[k + 1]);
      if (excess(Side::Bulk, r) > rep.c4) ok = false;
      if (excess(Side::Boundary, r) > rep.c4) ok = false;
    }
    rep.coercivity_pass = ok && rep.c3 > 0.0;
  }

  auto warn_convex = [&](const PotentialSide& p, const char* which) {
    if (p.kind == PotentialKind::Logarithmic && p.theta_c <= p.theta)
      rep.warnings.push_back(std::string(which) +
                             ": no double-well (theta_c <= theta)");
  };
  warn_convex(spec.bulk, "bulk");
  warn_convex(spec.boundary, "boundary");
  return rep;
}

}  // namespace chbs
