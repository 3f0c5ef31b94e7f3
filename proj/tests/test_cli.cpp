// test_cli.cpp -- drives the installed binary end to end: exit codes, output
// files, determinism, seed overrides, sweeps, and the audit subcommands.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "chbs/config.hpp"
#include "chbs/errors.hpp"

namespace fs = std::filesystem;

namespace {

struct CmdResult {
  int status = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Fresh scratch directory per call; doctest runs cases sequentially.
fs::path scratch_dir() {
  static int counter = 0;
  const fs::path d =
      fs::temp_directory_path() / ("chbs_cli_" + std::to_string(counter++));
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

CmdResult run_cli(const fs::path& dir, const std::string& args) {
  const fs::path out = dir / "stdout.txt";
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = std::string(CHBS_BIN) + " " + args + " > " +
                          out.string() + " 2> " + err.string();
  const int raw = std::system(cmd.c_str());
  CmdResult r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::trunc);
  out << text;
}

// key = value lookup in the tool's stdout / summary format.
std::string get_value(const std::string& text, const std::string& key) {
  const std::string needle = key + " = ";
  const auto pos = text.find(needle);
  if (pos == std::string::npos) return "";
  const auto end = text.find('\n', pos);
  return text.substr(pos + needle.size(), end - pos - needle.size());
}

std::string base_config(const std::string& extra_init = "",
                        const std::string& extra_step = "") {
  return "[grid]\n"
         "lx = 8\nnx = 16\nny = 9\n"
         "[params]\n"
         "L = 1\nsigma = 1\npotential = logarithmic\n"
         "theta = 0.3\ntheta_c = 1\n"
         "[step]\n"
         "tau = 0.01\n" +
         extra_step +
         "[init]\n"
         "kind = noise\nmean = 0\namplitude = 0.3\nseed = 5\n" +
         extra_init +
         "[run]\n"
         "t_end = 0.1\nsample_every = 5\nstop_when_steady = false\n";
}

int count_lines(const std::string& text) {
  int n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

}  // namespace

TEST_CASE("run: happy path writes the trajectory and reports a summary") {
  const fs::path dir = scratch_dir();
  write_file(dir / "run.cfg", base_config());
  const CmdResult r = run_cli(
      dir, "run --config " + (dir / "run.cfg").string() + " --out " +
               (dir / "out").string() + " --quiet");
  CHECK(r.status == 0);
  CHECK(get_value(r.out, "steps") == "10");
  CHECK(std::stod(get_value(r.out, "t_final")) == doctest::Approx(0.1));
  CHECK(get_value(r.out, "converged") == "false");
  CHECK(std::stod(get_value(r.out, "max_mass_drift")) < 1e-13);

  CHECK(fs::exists(dir / "out" / "trajectory.csv"));
  CHECK(fs::exists(dir / "out" / "summary.txt"));
  const std::string csv = slurp(dir / "out" / "trajectory.csv");
  CHECK(csv.rfind("t,energy,mean,", 0) == 0);
  CHECK(count_lines(csv) == 4);  // header + t=0 + samples at steps 5 and 10

  const std::string summary = slurp(dir / "out" / "summary.txt");
  CHECK(get_value(summary, "steps") == "10");
  CHECK(get_value(summary, "energy_final") == get_value(r.out, "energy_final"));
}

TEST_CASE("run: identical configs give byte-identical outputs") {
  const fs::path dir = scratch_dir();
  write_file(dir / "run.cfg", base_config());
  const std::string cfg = (dir / "run.cfg").string();
  const CmdResult a = run_cli(
      dir, "run --config " + cfg + " --out " + (dir / "a").string() + " --quiet");
  const CmdResult b = run_cli(
      dir, "run --config " + cfg + " --out " + (dir / "b").string() + " --quiet");
  CHECK(a.status == 0);
  CHECK(b.status == 0);
  CHECK(a.out == b.out);
  CHECK(slurp(dir / "a" / "trajectory.csv") ==
        slurp(dir / "b" / "trajectory.csv"));
  CHECK(slurp(dir / "a" / "summary.txt") == slurp(dir / "b" / "summary.txt"));
}

TEST_CASE("run: --seed overrides the config seed exactly") {
  const fs::path dir = scratch_dir();
  write_file(dir / "seed5.cfg", base_config());
  std::string cfg6 = base_config();
  const auto pos = cfg6.find("seed = 5");
  cfg6.replace(pos, 8, "seed = 6");
  write_file(dir / "seed6.cfg", cfg6);

  const CmdResult base = run_cli(dir, "run --config " +
                                          (dir / "seed5.cfg").string() +
                                          " --out " + (dir / "s5").string() +
                                          " --quiet");
  const CmdResult forced = run_cli(
      dir, "run --config " + (dir / "seed5.cfg").string() + " --seed 6 --out " +
               (dir / "s5f").string() + " --quiet");
  const CmdResult edited = run_cli(dir, "run --config " +
                                            (dir / "seed6.cfg").string() +
                                            " --out " + (dir / "s6").string() +
                                            " --quiet");
  CHECK(base.status == 0);
  CHECK(forced.status == 0);
  CHECK(edited.status == 0);
  // The override reproduces the edited config bit for bit and differs from
  // the original seed.
  CHECK(slurp(dir / "s5f" / "trajectory.csv") ==
        slurp(dir / "s6" / "trajectory.csv"));
  CHECK(slurp(dir / "s5f" / "trajectory.csv") !=
        slurp(dir / "s5" / "trajectory.csv"));
}

TEST_CASE("run: --quiet controls the progress stream") {
  const fs::path dir = scratch_dir();
  write_file(dir / "run.cfg", base_config());
  const std::string cfg = (dir / "run.cfg").string();
  const CmdResult loud = run_cli(dir, "run --config " + cfg);
  CHECK(loud.status == 0);
  CHECK(loud.err.find("wall time") != std::string::npos);
  const CmdResult quiet = run_cli(dir, "run --config " + cfg + " --quiet");
  CHECK(quiet.status == 0);
  CHECK(quiet.err.empty());
}

TEST_CASE("configuration problems exit with code 2") {
  const fs::path dir = scratch_dir();

  SUBCASE("missing file") {
    const CmdResult r =
        run_cli(dir, "run --config " + (dir / "absent.cfg").string());
    CHECK(r.status == 2);
    CHECK(r.err.find("cannot open") != std::string::npos);
  }

  SUBCASE("syntax problems are aggregated") {
    write_file(dir / "bad.cfg",
               "[grid]\nlx == 8\nnx = sixteen\nwhat\n" + base_config());
    const CmdResult r =
        run_cli(dir, "run --config " + (dir / "bad.cfg").string());
    CHECK(r.status == 2);
    CHECK(r.err.find("syntax problems") != std::string::npos);
    CHECK(r.err.find("bad.cfg:2") != std::string::npos);
    CHECK(r.err.find("bad.cfg:3") != std::string::npos);
    CHECK(r.err.find("bad.cfg:4") != std::string::npos);
  }

  SUBCASE("unknown keys are syntax problems") {
    write_file(dir / "unk.cfg", base_config() + "wibble = 3\n");
    const CmdResult r =
        run_cli(dir, "run --config " + (dir / "unk.cfg").string());
    CHECK(r.status == 2);
    CHECK(r.err.find("unknown key") != std::string::npos);
  }

  SUBCASE("a relaxation rate without surface diffusion is rejected") {
    std::string cfg = base_config();
    cfg.replace(cfg.find("sigma = 1"), 9, "sigma = 0");
    write_file(dir / "regime.cfg", cfg);
    const CmdResult r =
        run_cli(dir, "run --config " + (dir / "regime.cfg").string());
    CHECK(r.status == 2);
    CHECK(r.err.find("configuration is invalid") != std::string::npos);
  }

  SUBCASE("a saturated mean is rejected") {
    std::string cfg = base_config();
    cfg.replace(cfg.find("mean = 0"), 8, "mean = 1");
    write_file(dir / "mean.cfg", cfg);
    const CmdResult r =
        run_cli(dir, "run --config " + (dir / "mean.cfg").string());
    CHECK(r.status == 2);
    CHECK(r.err.find("init.mean") != std::string::npos);
  }

  SUBCASE("missing required flags are a usage error") {
    const CmdResult r = run_cli(dir, "run");
    CHECK(r.status != 0);
    CHECK(r.status != 3);
  }
}

TEST_CASE("solver failures exit with code 3") {
  const fs::path dir = scratch_dir();
  // One Newton update from rough data cannot reach tolerance, and with the
  // step halving ladder disabled the failure must surface.
  const std::string cfg =
      base_config("", "newton_max = 1\nmax_bisections = 0\n");
  write_file(dir / "hard.cfg", cfg);
  const CmdResult r =
      run_cli(dir, "run --config " + (dir / "hard.cfg").string() + " --quiet");
  CHECK(r.status == 3);
  CHECK(r.err.find("error:") != std::string::npos);
}

TEST_CASE("check: stock setup passes both audits") {
  const fs::path dir = scratch_dir();
  write_file(dir / "run.cfg", base_config());
  const CmdResult r =
      run_cli(dir, "check --config " + (dir / "run.cfg").string());
  CHECK(r.status == 0);
  CHECK(r.out.find("check = pass") != std::string::npos);
  CHECK(r.out.find("FAIL") == std::string::npos);
}

TEST_CASE("steady: small-domain profile lands on the constant state") {
  const fs::path dir = scratch_dir();
  write_file(dir / "steady.cfg",
             "[grid]\nlx = 2\nnx = 8\nny = 5\n"
             "[params]\nL = 1\nsigma = 1\npotential = logarithmic\n"
             "theta = 0.3\ntheta_c = 1\n"
             "[step]\ntau = 0.01\n"
             "[init]\nkind = noise\nmean = 0.1\namplitude = 0.05\nseed = 12\n"
             "[run]\nt_end = 0.1\n");
  const CmdResult r = run_cli(
      dir, "steady --config " + (dir / "steady.cfg").string() + " --out " +
               (dir / "out").string());
  CHECK(r.status == 0);
  const double mu = std::stod(get_value(r.out, "mu_infty"));
  const double expected = 0.3 * std::atanh(0.1) - 0.1;
  CHECK(mu == doctest::Approx(expected).epsilon(1e-10));
  CHECK(std::stod(get_value(r.out, "steady_residual")) < 1e-12);
  CHECK(fs::exists(dir / "out" / "steady_profile.csv"));
  const std::string summary = slurp(dir / "out" / "steady_summary.txt");
  CHECK(std::stod(get_value(summary, "mean")) == doctest::Approx(0.1));
}

TEST_CASE("report: digests a finished run directory") {
  const fs::path dir = scratch_dir();
  write_file(dir / "run.cfg", base_config());
  const CmdResult run = run_cli(
      dir, "run --config " + (dir / "run.cfg").string() + " --out " +
               (dir / "out").string() + " --quiet");
  REQUIRE(run.status == 0);

  const CmdResult rep = run_cli(dir, "report --dir " + (dir / "out").string());
  CHECK(rep.status == 0);
  CHECK(get_value(rep.out, "rows") == "3");
  CHECK(std::stod(get_value(rep.out, "t_last")) == doctest::Approx(0.1));
  CHECK(fs::exists(dir / "out" / "report.txt"));
  CHECK(slurp(dir / "out" / "report.txt") == rep.out);

  const CmdResult missing =
      run_cli(dir, "report --dir " + (dir / "nowhere").string());
  CHECK(missing.status == 2);
}

TEST_CASE("sweep: one axis, run directories, and the combined table") {
  const fs::path dir = scratch_dir();
  write_file(dir / "run.cfg", base_config());
  const std::string cfg = (dir / "run.cfg").string();

  SUBCASE("time step axis") {
    const CmdResult r = run_cli(
        dir, "sweep --config " + cfg + " --axis tau --values 0.01,0.005" +
                 " --out " + (dir / "sw").string() + " --quiet");
    CHECK(r.status == 0);
    CHECK(r.out.find("tau = 0.01 ") != std::string::npos);
    CHECK(r.out.find("tau = 0.005 ") != std::string::npos);
    CHECK(fs::exists(dir / "sw" / "tau=0.01" / "trajectory.csv"));
    CHECK(fs::exists(dir / "sw" / "tau=0.005" / "trajectory.csv"));
    const std::string table = slurp(dir / "sw" / "sweep.csv");
    CHECK(count_lines(table) == 3);  // header + one row per value
    CHECK(table.rfind("tau,", 0) == 0);
  }

  SUBCASE("composition axis") {
    const CmdResult r = run_cli(
        dir, "sweep --config " + cfg + " --axis mean --values 0.1,-0.1" +
                 " --out " + (dir / "swm").string() + " --quiet");
    CHECK(r.status == 0);
    CHECK(fs::exists(dir / "swm" / "mean=0.1" / "summary.txt"));
    const std::string s = slurp(dir / "swm" / "mean=0.1" / "summary.txt");
    CHECK(std::stod(get_value(s, "mean_target")) == doctest::Approx(0.1));
  }

  SUBCASE("parallel jobs reproduce the serial table") {
    const CmdResult one = run_cli(
        dir, "sweep --config " + cfg + " --axis L --values 1,0.5,0 --out " +
                 (dir / "j1").string() + " --jobs 1 --quiet");
    const CmdResult two = run_cli(
        dir, "sweep --config " + cfg + " --axis L --values 1,0.5,0 --out " +
                 (dir / "j2").string() + " --jobs 3 --quiet");
    CHECK(one.status == 0);
    CHECK(two.status == 0);
    CHECK(one.out == two.out);
    CHECK(slurp(dir / "j1" / "sweep.csv") == slurp(dir / "j2" / "sweep.csv"));
  }

  SUBCASE("unknown axis exits with code 2") {
    const CmdResult r =
        run_cli(dir, "sweep --config " + cfg + " --axis wavelength --values 1");
    CHECK(r.status == 2);
    CHECK(r.err.find("axis") != std::string::npos);
  }

  SUBCASE("a sweep value breaking admissibility exits with code 2") {
    const CmdResult r = run_cli(
        dir, "sweep --config " + cfg + " --axis sigma --values 1,0");
    CHECK(r.status == 2);  // L = 1 with sigma = 0 is not admissible
  }
}

TEST_CASE("config text round-trips through the serializer") {
  using namespace chbs;
  const std::string text = base_config();
  const RunConfig a = parse_config_text(text, "inline");
  const RunConfig b = parse_config_text(serialize_config(a), "roundtrip");
  CHECK(canonical_config(a) == canonical_config(b));
  CHECK(serialize_config(a) == serialize_config(b));
  CHECK(config_hash(a) == config_hash(b));

  RunConfig c = a;
  c.step.tau *= 0.5;
  CHECK(config_hash(c) != config_hash(a));
  // Init and run sections do not define the trajectory identity.
  RunConfig d = a;
  d.init.seed = 999;
  d.run.t_end = 50.0;
  CHECK(config_hash(d) == config_hash(a));
}
