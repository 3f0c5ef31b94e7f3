// config.cpp -- parser, serializer, and sweep overrides for run configs.

#include "chbs/config.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

#include "chbs/checkpoint.hpp"
#include "chbs/errors.hpp"

namespace chbs {

namespace {

std::string g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const char* ws = " \t\r\n";
  const auto a = s.find_first_not_of(ws);
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(ws);
  return s.substr(a, b - a + 1);
}

struct Issues {
  std::vector<std::string> syntax;
  std::vector<std::string> semantic;
  std::string origin;

  void bad_line(int no, const std::string& what) {
    syntax.push_back(origin + ":" + std::to_string(no) + ": " + what);
  }
  void invalid(const std::string& what) { semantic.push_back(what); }

  void raise_if_any() const {
    if (!syntax.empty()) {
      std::string all = "configuration has syntax problems:";
      for (const auto& s : syntax) all += "\n  " + s;
      throw ParseError(all);
    }
    if (!semantic.empty()) {
      std::string all = "configuration is invalid:";
      for (const auto& s : semantic) all += "\n  " + s;
      throw ValidationError(all);
    }
  }
};

bool parse_double(const std::string& v, double* out) {
  errno = 0;
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (end != v.c_str() + v.size() || v.empty() || errno == ERANGE) return false;
  *out = x;
  return true;
}

bool parse_ll(const std::string& v, long long* out) {
  errno = 0;
  char* end = nullptr;
  const long long x = std::strtoll(v.c_str(), &end, 10);
  if (end != v.c_str() + v.size() || v.empty() || errno == ERANGE) return false;
  *out = x;
  return true;
}

bool parse_u64(const std::string& v, std::uint64_t* out) {
  errno = 0;
  char* end = nullptr;
  const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
  if (end != v.c_str() + v.size() || v.empty() || errno == ERANGE) return false;
  *out = x;
  return true;
}

bool parse_bool(const std::string& v, bool* out) {
  if (v == "true") {
    *out = true;
    return true;
  }
  if (v == "false") {
    *out = false;
    return true;
  }
  return false;
}

}  // namespace

RunConfig parse_config_text(const std::string& text,
                            const std::string& origin) {
  RunConfig cfg;
  Issues iss;
  iss.origin = origin;

  // Sides of the potential default to shared temperatures; explicit boundary
  // keys override.  Collected into locals and assembled after the loop.
  double theta = 1.0, theta_c = 0.0;
  double b_theta = 0.0, b_theta_c = 0.0;
  double rho = 1.0, c0 = 0.0;
  bool b_theta_set = false, b_theta_c_set = false;

  std::istringstream in(text);
  std::string line, section;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        iss.bad_line(no, "malformed section header '" + line + "'");
        continue;
      }
      section = trim(line.substr(1, line.size() - 2));
      if (section != "grid" && section != "params" && section != "step" &&
          section != "init" && section != "run")
        iss.bad_line(no, "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      iss.bad_line(no, "expected 'key = value', got '" + line + "'");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty() || val.empty()) {
      iss.bad_line(no, "empty key or value");
      continue;
    }

    auto want_double = [&](double* slot) {
      if (!parse_double(val, slot))
        iss.bad_line(no, "'" + key + "' needs a number, got '" + val + "'");
    };
    auto want_int = [&](int* slot) {
      long long x;
      if (!parse_ll(val, &x) || x < -(1ll << 31) || x > (1ll << 31))
        iss.bad_line(no, "'" + key + "' needs an integer, got '" + val + "'");
      else
        *slot = static_cast<int>(x);
    };

    if (section == "grid") {
      if (key == "lx") want_double(&cfg.grid.lx);
      else if (key == "nx") want_int(&cfg.grid.nx);
      else if (key == "ny") want_int(&cfg.grid.ny);
      else iss.bad_line(no, "unknown key '" + key + "' in [grid]");
    } else if (section == "params") {
      if (key == "L") want_double(&cfg.params.L);
      else if (key == "sigma") want_double(&cfg.params.sigma);
      else if (key == "regularization") {
        if (val == "exact") cfg.params.reg = Regularization::Exact;
        else if (val == "yosida") cfg.params.reg = Regularization::Yosida;
        else iss.bad_line(no, "regularization must be exact or yosida");
      } else if (key == "yosida_epsilon") {
        want_double(&cfg.params.yosida.epsilon);
      } else if (key == "potential") {
        if (val != "logarithmic")
          iss.bad_line(no, "only the logarithmic potential is configurable");
      } else if (key == "theta") want_double(&theta);
      else if (key == "theta_c") want_double(&theta_c);
      else if (key == "boundary_theta") {
        want_double(&b_theta);
        b_theta_set = true;
      } else if (key == "boundary_theta_c") {
        want_double(&b_theta_c);
        b_theta_c_set = true;
      } else if (key == "rho") want_double(&rho);
      else if (key == "c0") want_double(&c0);
      else iss.bad_line(no, "unknown key '" + key + "' in [params]");
    } else if (section == "step") {
      if (key == "tau") want_double(&cfg.step.tau);
      else if (key == "scheme") {
        if (val == "convex_split") cfg.step.scheme = Scheme::ConvexSplit;
        else if (val == "fully_implicit")
          cfg.step.scheme = Scheme::FullyImplicit;
        else iss.bad_line(no, "scheme must be convex_split or fully_implicit");
      } else if (key == "newton_tol") want_double(&cfg.step.newton_tol);
      else if (key == "newton_max") want_int(&cfg.step.newton_max);
      else if (key == "max_backtracks") want_int(&cfg.step.max_backtracks);
      else if (key == "max_bisections") want_int(&cfg.step.max_bisections);
      else iss.bad_line(no, "unknown key '" + key + "' in [step]");
    } else if (section == "init") {
      if (key == "kind") {
        if (val == "constant") cfg.init.kind = InitKind::Constant;
        else if (val == "noise") cfg.init.kind = InitKind::Noise;
        else if (val == "checkpoint") cfg.init.kind = InitKind::Checkpoint;
        else iss.bad_line(no, "kind must be constant, noise, or checkpoint");
      } else if (key == "mean") want_double(&cfg.init.mean);
      else if (key == "amplitude") want_double(&cfg.init.amplitude);
      else if (key == "seed") {
        if (!parse_u64(val, &cfg.init.seed))
          iss.bad_line(no, "'seed' needs an unsigned integer");
      } else if (key == "checkpoint") cfg.init.checkpoint = val;
      else iss.bad_line(no, "unknown key '" + key + "' in [init]");
    } else if (section == "run") {
      if (key == "t_end") want_double(&cfg.run.t_end);
      else if (key == "max_steps") {
        if (!parse_ll(val, &cfg.run.max_steps))
          iss.bad_line(no, "'max_steps' needs an integer");
      } else if (key == "sample_every") want_int(&cfg.run.sample_every);
      else if (key == "checkpoint_every") want_int(&cfg.run.checkpoint_every);
      else if (key == "checkpoint_out") cfg.run.checkpoint_out = val;
      else if (key == "stop_when_steady") {
        if (!parse_bool(val, &cfg.run.stop_when_steady))
          iss.bad_line(no, "'stop_when_steady' needs true or false");
      } else if (key == "steady_tol") want_double(&cfg.run.steady_tol);
      else iss.bad_line(no, "unknown key '" + key + "' in [run]");
    } else {
      iss.bad_line(no, "key '" + key + "' appears before any section");
    }
  }

  cfg.params.potential = PotentialSpec::logarithmic(theta, theta_c);
  cfg.params.potential.rho = rho;
  cfg.params.potential.c0 = c0;
  if (b_theta_set) cfg.params.potential.boundary.theta = b_theta;
  if (b_theta_c_set) cfg.params.potential.boundary.theta_c = b_theta_c;

  // Semantic validation, aggregated.
  if (!(cfg.grid.lx > 0.0)) iss.invalid("grid.lx must be positive");
  if (cfg.grid.nx < 4 || cfg.grid.nx % 2 != 0)
    iss.invalid("grid.nx must be even and at least 4");
  if (cfg.grid.ny < 3) iss.invalid("grid.ny must be at least 3");
  try {
    validate_params(cfg.params);
  } catch (const Error& e) {
    iss.invalid(e.what());
  }
  if (cfg.params.potential.bulk.theta <= 0.0)
    iss.invalid("params.theta must be positive");
  if (cfg.params.potential.boundary.theta <= 0.0)
    iss.invalid("params.boundary_theta must be positive");
  if (!(cfg.step.tau > 0.0)) iss.invalid("step.tau must be positive");
  if (!(cfg.step.newton_tol > 0.0))
    iss.invalid("step.newton_tol must be positive");
  if (cfg.step.newton_max < 1) iss.invalid("step.newton_max must be >= 1");
  if (cfg.step.max_backtracks < 0)
    iss.invalid("step.max_backtracks must be >= 0");
  if (cfg.step.max_bisections < 0)
    iss.invalid("step.max_bisections must be >= 0");
  if (cfg.init.kind != InitKind::Checkpoint) {
    if (!(cfg.init.mean > -1.0 && cfg.init.mean < 1.0))
      iss.invalid("init.mean must lie strictly inside (-1, 1)");
    if (cfg.init.amplitude < 0.0)
      iss.invalid("init.amplitude must be nonnegative");
  } else if (cfg.init.checkpoint.empty()) {
    iss.invalid("init.kind = checkpoint needs init.checkpoint = <path>");
  }
  if (cfg.run.max_steps < 0 && !(cfg.run.t_end > 0.0))
    iss.invalid("run needs t_end > 0 or max_steps >= 0");
  if (cfg.run.sample_every < 1) iss.invalid("run.sample_every must be >= 1");
  if (cfg.run.checkpoint_every < 0)
    iss.invalid("run.checkpoint_every must be >= 0");
  if (cfg.run.checkpoint_every > 0 && cfg.run.checkpoint_out.empty())
    iss.invalid("run.checkpoint_every needs run.checkpoint_out = <path>");
  if (!(cfg.run.steady_tol > 0.0)) iss.invalid("run.steady_tol must be positive");

  iss.raise_if_any();
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open configuration '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

std::string canonical_config(const RunConfig& cfg) {
  std::ostringstream os;
  os << "[grid]\n"
     << "lx = " << g17(cfg.grid.lx) << "\n"
     << "nx = " << cfg.grid.nx << "\n"
     << "ny = " << cfg.grid.ny << "\n"
     << "[params]\n"
     << "L = " << g17(cfg.params.L) << "\n"
     << "sigma = " << g17(cfg.params.sigma) << "\n"
     << "regularization = "
     << (cfg.params.reg == Regularization::Yosida ? "yosida" : "exact") << "\n"
     << "yosida_epsilon = " << g17(cfg.params.yosida.epsilon) << "\n"
     << "potential = logarithmic\n"
     << "theta = " << g17(cfg.params.potential.bulk.theta) << "\n"
     << "theta_c = " << g17(cfg.params.potential.bulk.theta_c) << "\n"
     << "boundary_theta = " << g17(cfg.params.potential.boundary.theta) << "\n"
     << "boundary_theta_c = " << g17(cfg.params.potential.boundary.theta_c)
     << "\n"
     << "rho = " << g17(cfg.params.potential.rho) << "\n"
     << "c0 = " << g17(cfg.params.potential.c0) << "\n"
     << "[step]\n"
     << "tau = " << g17(cfg.step.tau) << "\n"
     << "scheme = "
     << (cfg.step.scheme == Scheme::FullyImplicit ? "fully_implicit"
                                                  : "convex_split")
     << "\n"
     << "newton_tol = " << g17(cfg.step.newton_tol) << "\n"
     << "newton_max = " << cfg.step.newton_max << "\n"
     << "max_backtracks = " << cfg.step.max_backtracks << "\n"
     << "max_bisections = " << cfg.step.max_bisections << "\n";
  return os.str();
}

std::string serialize_config(const RunConfig& cfg) {
  std::ostringstream os;
  os << canonical_config(cfg) << "[init]\n"
     << "kind = "
     << (cfg.init.kind == InitKind::Constant
             ? "constant"
             : cfg.init.kind == InitKind::Noise ? "noise" : "checkpoint")
     << "\n"
     << "mean = " << g17(cfg.init.mean) << "\n"
     << "amplitude = " << g17(cfg.init.amplitude) << "\n"
     << "seed = " << cfg.init.seed << "\n";
  if (!cfg.init.checkpoint.empty())
    os << "checkpoint = " << cfg.init.checkpoint << "\n";
  os << "[run]\n"
     << "t_end = " << g17(cfg.run.t_end) << "\n"
     << "max_steps = " << cfg.run.max_steps << "\n"
     << "sample_every = " << cfg.run.sample_every << "\n"
     << "checkpoint_every = " << cfg.run.checkpoint_every << "\n";
  if (!cfg.run.checkpoint_out.empty())
    os << "checkpoint_out = " << cfg.run.checkpoint_out << "\n";
  os << "stop_when_steady = " << (cfg.run.stop_when_steady ? "true" : "false")
     << "\n"
     << "steady_tol = " << g17(cfg.run.steady_tol) << "\n";
  return os.str();
}

std::uint64_t config_hash(const RunConfig& cfg) {
  return fnv1a(canonical_config(cfg));
}

void apply_axis(RunConfig& cfg, const std::string& axis,
                const std::string& value) {
  double x = 0.0;
  if (axis == "grid") {
    long long f = 0;
    if (!parse_ll(value, &f) || f < 1 || (f & (f - 1)) != 0)
      throw ConfigError("grid sweep values must be power-of-two refinement "
                        "factors, got '" + value + "'");
    cfg.grid.nx = static_cast<int>(cfg.grid.nx * f);
    cfg.grid.ny = static_cast<int>((cfg.grid.ny - 1) * f + 1);
    return;
  }
  if (!parse_double(value, &x))
    throw ConfigError("sweep value '" + value + "' is not a number");
  if (axis == "L") cfg.params.L = x;
  else if (axis == "sigma") cfg.params.sigma = x;
  else if (axis == "tau") cfg.step.tau = x;
  else if (axis == "mean") cfg.init.mean = x;
  else if (axis == "epsilon") {
    if (cfg.params.reg != Regularization::Yosida)
      throw ConfigError("the epsilon axis needs regularization = yosida");
    cfg.params.yosida.epsilon = x;
  } else {
    throw ConfigError("unknown sweep axis '" + axis +
                      "' (expected L, sigma, tau, epsilon, mean, or grid)");
  }
}

}  // namespace chbs
