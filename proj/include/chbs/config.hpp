// config.hpp -- sectioned key=value run configuration and its canonical form.

#pragma once

#include <cstdint>
#include <string>

#include "chbs/params.hpp"
#include "chbs/stepper.hpp"

namespace chbs {

enum class InitKind { Constant, Noise, Checkpoint };

struct GridSection {
  double lx = 2.0;
  int nx = 64;
  int ny = 33;
};

struct InitSection {
  InitKind kind = InitKind::Noise;
  double mean = 0.0;
  double amplitude = 0.05;
  std::uint64_t seed = 1;
  std::string checkpoint;  // restart record path (kind = checkpoint)
};

struct RunSection {
  double t_end = 1.0;
  long long max_steps = -1;  // cap on steps; -1 means t_end decides
  int sample_every = 10;     // row cadence in steps
  int checkpoint_every = 0;  // 0 = only the final record
  std::string checkpoint_out;
  bool stop_when_steady = true;
  double steady_tol = 1e-9;  // velocity norm threshold
};

struct RunConfig {
  GridSection grid;
  ModelParams params;
  StepConfig step;
  InitSection init;
  RunSection run;
};

// Parse the sectioned text.  Syntax problems (malformed lines, unknown keys,
// bad numbers) throw ParseError listing every offending line; semantic
// problems (invalid parameter combinations) throw ValidationError listing
// every violation.  `origin` names the source in messages.
RunConfig parse_config_text(const std::string& text, const std::string& origin);
RunConfig parse_config_file(const std::string& path);

// Full round-trippable serialization (all sections, %.17g precision).
std::string serialize_config(const RunConfig& cfg);

// Canonical serialization of the trajectory-defining sections only
// (grid, params, step) -- the input of config_hash, so restart records
// refuse to resume under a different model.
std::string canonical_config(const RunConfig& cfg);
std::uint64_t config_hash(const RunConfig& cfg);

// Replace one swept quantity ("L", "sigma", "tau", "epsilon", or "grid" for
// a power-of-two refinement factor).  Throws ConfigError for unknown axes or
// unusable values.
void apply_axis(RunConfig& cfg, const std::string& axis,
                const std::string& value);

}  // namespace chbs
