// test_stepper.cpp -- implicit stepping: Jacobian consistency, conservation,
// energy decrease, time accuracy, restart records, determinism.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "chbs/checkpoint.hpp"
#include "chbs/diagnostics.hpp"
#include "chbs/stepper.hpp"
#include "oracles.hpp"

using namespace chbs;

namespace {

ModelParams exact_params(double L, double sigma) {
  ModelParams p;
  p.L = L;
  p.sigma = sigma;
  p.reg = Regularization::Exact;
  p.potential = PotentialSpec::logarithmic(0.3, 1.0);
  return p;
}

ModelParams yosida_params(double L, double sigma, double eps) {
  ModelParams p = exact_params(L, sigma);
  p.reg = Regularization::Yosida;
  p.yosida.epsilon = eps;
  return p;
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

bool bitwise_equal(const Field& a, const Field& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k)
    if (a[k] != b[k]) return false;
  return true;
}

}  // namespace

TEST_CASE("system size and pack/unpack round trip") {
  const SlabGrid g = build_grid(2.0, 8, 5);
  const ModelParams kin = exact_params(1.0, 1.0);
  const ModelParams inst = exact_params(0.0, 1.0);
  CHECK(step_system_size(g, kin) == 2 * 40 + 16);
  CHECK(step_system_size(g, inst) == 2 * 40);

  StepUnknowns u;
  u.phi = noisy_state(g, 0.1, 0.3, 11);
  u.mu = noisy_state(g, -0.2, 0.5, 12);
  u.theta.assign(static_cast<std::size_t>(g.n_surf()), 0.25);
  for (int s = 0; s < g.n_surf(); ++s)
    u.theta[static_cast<std::size_t>(s)] = 0.01 * s;

  for (const ModelParams& p : {kin, inst}) {
    const std::vector<double> x = pack_unknowns(g, p, u);
    CHECK(static_cast<int>(x.size()) == step_system_size(g, p));
    const StepUnknowns v = unpack_unknowns(g, p, x);
    CHECK(bitwise_equal(v.phi.bulk, u.phi.bulk));
    CHECK(bitwise_equal(v.mu.bulk, u.mu.bulk));
    // Unpack restores traces from the bulk component.
    for (int i = 0; i < g.nx; ++i) {
      CHECK(v.phi.surf[static_cast<std::size_t>(i)] ==
            v.phi.bulk[static_cast<std::size_t>(g.idx(i, 0))]);
      CHECK(v.mu.surf[static_cast<std::size_t>(g.nx + i)] ==
            v.mu.bulk[static_cast<std::size_t>(g.idx(i, g.ny - 1))]);
    }
    if (p.L > 0.0) CHECK(bitwise_equal(v.theta, u.theta));
  }
}

TEST_CASE("analytic Jacobian agrees with central differences") {
  const SlabGrid g = build_grid(2.0, 8, 5);
  const double tau = 0.05;

  for (const double L : {1.0, 0.0}) {
    const double sigma = 1.0;
    for (const Scheme scheme : {Scheme::ConvexSplit, Scheme::FullyImplicit}) {
      for (const bool yosida : {false, true}) {
        CAPTURE(L);
        CAPTURE(static_cast<int>(scheme));
        CAPTURE(yosida);
        const ModelParams p =
            yosida ? yosida_params(L, sigma, 0.1) : exact_params(L, sigma);

        StepUnknowns u;
        u.phi = noisy_state(g, 0.05, 0.6, 21);
        u.mu = noisy_state(g, 0.0, 0.8, 22);
        u.mu.linkage = Linkage::TraceLinked;
        sync_trace(g, u.mu);
        u.theta.assign(static_cast<std::size_t>(g.n_surf()), 0.0);
        {
          SplitMix64 rng(23);
          for (double& v : u.theta) v = 0.5 * rng.next_symmetric();
        }
        const BulkSurfacePair phi_old = noisy_state(g, 0.05, 0.5, 24);

        const int m = step_system_size(g, p);
        const std::vector<double> x0 = pack_unknowns(g, p, u);
        auto f = [&](const std::vector<double>& x) {
          return step_residual(g, p, scheme, tau, phi_old,
                               unpack_unknowns(g, p, x));
        };
        const Eigen::MatrixXd fd = oracle::fd_jacobian(f, x0, 1e-6);
        const Eigen::MatrixXd an =
            oracle::dense_from_entries(m, step_jacobian(g, p, scheme, tau, u));

        double worst = 0.0;
        for (int r = 0; r < m; ++r)
          for (int c = 0; c < m; ++c)
            worst = std::max(worst, std::abs(an(r, c) - fd(r, c)) /
                                        std::max(1.0, std::abs(an(r, c))));
        CHECK(worst < 1e-6);
      }
    }
  }
}

TEST_CASE("long runs conserve mass and dissipate energy") {
  const SlabGrid g = build_grid(8.0, 16, 9);
  StepConfig cfg;
  cfg.tau = 1e-2;

  for (const double L : {1.0, 0.0}) {
    for (const double sigma : {1.0, 0.0}) {
      if (L > 0.0 && sigma == 0.0) continue;
      CAPTURE(L);
      CAPTURE(sigma);
      Stepper st(g, exact_params(L, sigma), cfg);
      st.set_state(noisy_state(g, 0.0, 0.3, 7), {}, {}, 0.0, 0);
      const double m0 = st.target_mean();
      double prev_energy = st.energy();
      double max_drift = 0.0, max_rise = -1e300, min_sep = 1e300;
      for (int n = 0; n < 1000; ++n) {
        const StepDiagnostics d = st.advance();
        max_drift = std::max(max_drift, std::abs(d.mean - m0));
        max_rise = std::max(max_rise, d.energy - prev_energy);
        min_sep = std::min(min_sep, d.separation);
        prev_energy = d.energy;
        CHECK(d.defect <= cfg.newton_tol * 1.0001);
        CHECK(d.bisections == 0);
      }
      CHECK(max_drift < 1e-13);
      CHECK(max_rise <= 1e-10);
      CHECK(min_sep > 0.0);
      CHECK(st.step_count() == 1000);
      CHECK(st.time() == doctest::Approx(10.0).epsilon(1e-12));
      // Dissipation splits into its quadratic parts.
      BulkSurfacePair mu_pair;
      mu_pair.bulk = st.mu().bulk;
      mu_pair.surf = L > 0.0 ? st.theta() : st.mu().surf;
      mu_pair.linkage = Linkage::Independent;
      const DissipationTerms terms =
          dissipation_terms(g, st.params(), mu_pair);
      CHECK(st.dissipation() ==
            doctest::Approx(terms.total).epsilon(1e-12).scale(1.0));
      CHECK(terms.total >= 0.0);
    }
  }
}

TEST_CASE("fully implicit scheme also conserves and converges") {
  const SlabGrid g = build_grid(8.0, 16, 9);
  StepConfig cfg;
  cfg.tau = 5e-3;
  cfg.scheme = Scheme::FullyImplicit;
  Stepper st(g, exact_params(1.0, 1.0), cfg);
  st.set_state(noisy_state(g, 0.1, 0.25, 31), {}, {}, 0.0, 0);
  const double m0 = st.target_mean();
  for (int n = 0; n < 100; ++n) {
    const StepDiagnostics d = st.advance();
    CHECK(std::abs(d.mean - m0) < 1e-13);
    CHECK(d.defect <= cfg.newton_tol * 1.0001);
  }
}

TEST_CASE("regularized runs may leave the unit interval but stay stable") {
  const SlabGrid g = build_grid(8.0, 16, 9);
  StepConfig cfg;
  cfg.tau = 1e-2;
  Stepper st(g, yosida_params(0.0, 1.0, 0.05), cfg);
  st.set_state(noisy_state(g, 0.0, 0.4, 41), {}, {}, 0.0, 0);
  const double m0 = st.target_mean();
  double prev_energy = st.energy();
  for (int n = 0; n < 200; ++n) {
    const StepDiagnostics d = st.advance();
    CHECK(std::abs(d.mean - m0) < 1e-13);
    CHECK(d.energy <= prev_energy + 1e-10);
    prev_energy = d.energy;
  }
  CHECK(std::isfinite(st.energy()));
}

TEST_CASE("time accuracy is first order for both schemes") {
  const SlabGrid g = build_grid(8.0, 16, 9);
  const ModelParams p = exact_params(1.0, 1.0);
  const double T = 0.5;

  for (const Scheme scheme : {Scheme::ConvexSplit, Scheme::FullyImplicit}) {
    CAPTURE(static_cast<int>(scheme));
    std::vector<BulkSurfacePair> finals;
    for (const double tau : {0.025, 0.0125, 0.00625, 0.003125}) {
      StepConfig cfg;
      cfg.tau = tau;
      cfg.scheme = scheme;
      Stepper st(g, p, cfg);
      st.set_state(noisy_state(g, 0.0, 0.3, 5), {}, {}, 0.0, 0);
      const auto n_steps = static_cast<int>(std::llround(T / tau));
      for (int n = 0; n < n_steps; ++n) st.advance();
      finals.push_back(st.phi());
    }
    // Successive-halving differences: e_k ~ C tau_k for a first-order
    // scheme, so consecutive ratios sit near 2.
    std::vector<double> errs;
    for (std::size_t k = 0; k + 1 < finals.size(); ++k)
      errs.push_back(l2_distance(g, finals[k], finals[k + 1]));
    for (std::size_t k = 0; k + 1 < errs.size(); ++k) {
      const double order = std::log2(errs[k] / errs[k + 1]);
      CHECK(order > 0.9);
      CHECK(order < 1.3);
    }
  }
}

TEST_CASE("step halving ladder recovers from a starved Newton budget") {
  // Near-saturated data and a large step: the barrier damping slows Newton
  // enough that three iterations cannot finish the full step, while each
  // half-sized segment stays within budget.
  const SlabGrid g = build_grid(8.0, 16, 9);
  StepConfig cfg;
  cfg.tau = 2.0;
  cfg.newton_max = 3;

  Stepper st(g, exact_params(1.0, 1.0), cfg);
  st.set_state(noisy_state(g, 0.0, 0.97, 51), {}, {}, 0.0, 0);
  const double m0 = st.target_mean();
  const StepDiagnostics d = st.advance();
  CHECK(d.bisections > 0);
  CHECK(std::abs(d.mean - m0) < 1e-13);
  CHECK(st.time() == doctest::Approx(2.0));

  // With the ladder disabled the same step fails outright.
  StepConfig hard = cfg;
  hard.max_bisections = 0;
  Stepper st2(g, exact_params(1.0, 1.0), hard);
  st2.set_state(noisy_state(g, 0.0, 0.97, 51), {}, {}, 0.0, 0);
  CHECK_THROWS_AS(st2.advance(), ConvergenceError);
}

TEST_CASE("initial states: construction, validation, determinism") {
  const SlabGrid g = build_grid(2.0, 8, 5);

  SUBCASE("constant and noisy means are exact") {
    const BulkSurfacePair c = constant_state(g, 0.3);
    CHECK(generalized_mean(g, c) == doctest::Approx(0.3).epsilon(1e-15));
    const BulkSurfacePair n = noisy_state(g, -0.2, 0.05, 99);
    CHECK(generalized_mean(g, n) == doctest::Approx(-0.2).epsilon(1e-13));
    for (double v : n.bulk) CHECK(std::abs(v + 0.2) < 0.06);
  }

  SUBCASE("same seed reproduces, different seed differs") {
    const BulkSurfacePair a = noisy_state(g, 0.0, 0.1, 7);
    const BulkSurfacePair b = noisy_state(g, 0.0, 0.1, 7);
    const BulkSurfacePair c = noisy_state(g, 0.0, 0.1, 8);
    CHECK(bitwise_equal(a.bulk, b.bulk));
    CHECK_FALSE(bitwise_equal(a.bulk, c.bulk));
  }

  SUBCASE("validation") {
    const ModelParams p = exact_params(1.0, 1.0);
    CHECK_NOTHROW(check_initial_state(g, p, noisy_state(g, 0.0, 0.3, 1)));
    CHECK_THROWS_AS(check_initial_state(g, p, constant_state(g, 1.5)),
                    InitError);
    BulkSurfacePair sat = constant_state(g, 0.0);
    sat.bulk[5] = 1.0 - 1e-9;  // too close to saturation for exact mode
    sync_trace(g, sat);
    CHECK_THROWS_AS(check_initial_state(g, p, sat), InitError);
    // The regularized nonlinearity tolerates it.
    CHECK_NOTHROW(check_initial_state(g, yosida_params(1.0, 1.0, 0.1), sat));
  }
}

TEST_CASE("restart records round trip exactly") {
  const SlabGrid g = build_grid(2.0, 8, 5);
  const std::string path = temp_path("chbs_test_roundtrip.ckpt");

  Checkpoint c;
  c.lx = g.lx;
  c.nx = g.nx;
  c.ny = g.ny;
  c.params_hash = 0xabcdef0123456789ULL;
  c.t = 0.7300000000000001;
  c.step = 73;
  c.stationary = true;
  c.mu_infty = -0.012345678901234567;
  c.mean_target = 0.10000000000000003;
  c.phi = noisy_state(g, 0.1, 0.3, 61);
  c.mu = noisy_state(g, -0.1, 0.4, 62);
  c.mu.linkage = Linkage::Independent;
  c.theta.assign(static_cast<std::size_t>(g.n_surf()), 0.0);
  for (int s = 0; s < g.n_surf(); ++s)
    c.theta[static_cast<std::size_t>(s)] = std::sin(1.0 + s);

  save_checkpoint(path, c);
  const Checkpoint r = load_checkpoint(path);
  CHECK(r.lx == c.lx);
  CHECK(r.nx == c.nx);
  CHECK(r.ny == c.ny);
  CHECK(r.params_hash == c.params_hash);
  CHECK(r.t == c.t);
  CHECK(r.step == c.step);
  CHECK(r.stationary == c.stationary);
  CHECK(r.mu_infty == c.mu_infty);
  CHECK(r.mean_target == c.mean_target);
  CHECK(bitwise_equal(r.phi.bulk, c.phi.bulk));
  CHECK(bitwise_equal(r.phi.surf, c.phi.surf));
  CHECK(bitwise_equal(r.mu.bulk, c.mu.bulk));
  CHECK(bitwise_equal(r.theta, c.theta));
  CHECK(r.mu.linkage == Linkage::Independent);

  CHECK_NOTHROW(require_compatible(r, g, c.params_hash));
  CHECK_THROWS_AS(require_compatible(r, g, c.params_hash + 1),
                  CheckpointError);
  const SlabGrid other = build_grid(2.0, 8, 7);
  CHECK_THROWS_AS(require_compatible(r, other, c.params_hash),
                  CheckpointError);

  // Corruption: truncate, then scribble on the magic.
  {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << "NOPE this is not a restart record";
  }
  CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
  CHECK_THROWS_AS(load_checkpoint(temp_path("chbs_missing.ckpt")),
                  CheckpointError);
  std::remove(path.c_str());
}

TEST_CASE("resume continues the trajectory bit for bit") {
  const SlabGrid g = build_grid(8.0, 16, 9);
  const ModelParams p = exact_params(1.0, 1.0);
  StepConfig cfg;
  cfg.tau = 1e-2;

  // Uninterrupted reference: 20 steps.
  Stepper ref(g, p, cfg);
  ref.set_state(noisy_state(g, 0.0, 0.3, 71), {}, {}, 0.0, 0);
  for (int n = 0; n < 20; ++n) ref.advance();

  // Interrupted: 10 steps, snapshot, fresh stepper, 10 more.
  Stepper a(g, p, cfg);
  a.set_state(noisy_state(g, 0.0, 0.3, 71), {}, {}, 0.0, 0);
  for (int n = 0; n < 10; ++n) a.advance();

  Checkpoint c;
  c.lx = g.lx;
  c.nx = g.nx;
  c.ny = g.ny;
  c.t = a.time();
  c.step = a.step_count();
  c.mean_target = a.target_mean();
  c.phi = a.phi();
  c.mu = a.mu();
  c.theta = a.theta();
  const std::string path = temp_path("chbs_test_resume.ckpt");
  save_checkpoint(path, c);
  const Checkpoint r = load_checkpoint(path);
  std::remove(path.c_str());

  Stepper b(g, p, cfg);
  b.set_state(r.phi, r.mu, r.theta, r.t, r.step);
  b.set_target_mean(r.mean_target);
  for (int n = 0; n < 10; ++n) b.advance();

  CHECK(b.step_count() == ref.step_count());
  CHECK(b.time() == ref.time());
  CHECK(bitwise_equal(b.phi().bulk, ref.phi().bulk));
  CHECK(bitwise_equal(b.phi().surf, ref.phi().surf));
  CHECK(bitwise_equal(b.mu().bulk, ref.mu().bulk));
  CHECK(bitwise_equal(b.theta(), ref.theta()));
}

TEST_CASE("identical configurations evolve identically") {
  const SlabGrid g = build_grid(8.0, 16, 9);
  StepConfig cfg;
  cfg.tau = 1e-2;
  Stepper a(g, exact_params(0.0, 1.0), cfg);
  Stepper b(g, exact_params(0.0, 1.0), cfg);
  a.set_state(noisy_state(g, 0.05, 0.3, 81), {}, {}, 0.0, 0);
  b.set_state(noisy_state(g, 0.05, 0.3, 81), {}, {}, 0.0, 0);
  for (int n = 0; n < 25; ++n) {
    a.advance();
    b.advance();
  }
  CHECK(bitwise_equal(a.phi().bulk, b.phi().bulk));
  CHECK(bitwise_equal(a.mu().bulk, b.mu().bulk));
}

TEST_CASE("golden micro trajectory") {
  // Tiny frozen regression so numerical drift in any operator shows up
  // immediately; values recorded from this implementation.
  const SlabGrid g = build_grid(8.0, 16, 9);
  StepConfig cfg;
  cfg.tau = 1e-2;
  Stepper st(g, exact_params(1.0, 1.0), cfg);
  st.set_state(noisy_state(g, 0.0, 0.2, 3), {}, {}, 0.0, 0);
  StepDiagnostics d{};
  for (int n = 0; n < 50; ++n) d = st.advance();
  // Values recorded from this configuration; any drift signals a change in
  // the discrete operators, the nonlinearity, or the solve path.
  CHECK(d.energy == doctest::Approx(0.0029652781940628717).epsilon(1e-9));
  CHECK(st.phi().bulk[37] ==
        doctest::Approx(-0.0056934224118568768).epsilon(1e-9));
  CHECK(st.mu().bulk[100] ==
        doctest::Approx(0.007568528792591408).epsilon(1e-9));
}
