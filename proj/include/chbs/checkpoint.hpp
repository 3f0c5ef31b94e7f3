// checkpoint.hpp -- binary snapshots of the evolving state, for exact resume.

#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "chbs/grid.hpp"
#include "chbs/pair.hpp"

namespace chbs {

// A full restart record.  `theta` carries the boundary chemical potential
// (2*nx values, lower row first); for the instantaneous-relaxation regime it
// duplicates the trace of `mu` and is kept for layout uniformity.
struct Checkpoint {
  double lx = 0.0;
  int nx = 0, ny = 0;
  std::uint64_t params_hash = 0;
  double t = 0.0;
  std::uint64_t step = 0;
  bool stationary = false;
  double mu_infty = 0.0;
  // Conserved generalized mean of the trajectory.  Resuming re-installs this
  // exact value rather than recomputing it from phi, so a resumed run
  // projects onto bit-identical means and continues bit for bit.
  double mean_target = 0.0;
  BulkSurfacePair phi, mu;
  Field theta;
};

// FNV-1a over a canonical parameter string; resumes refuse to run when the
// stored hash disagrees with the live configuration.
std::uint64_t fnv1a(std::string_view s);

// Write/read the record with a fixed little-endian layout, independent of the
// host.  Loading performs structural validation only (magic, version, vector
// extents); throws CheckpointError on any defect.
void save_checkpoint(const std::string& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::string& path);

// Throws CheckpointError unless the record matches the live grid and hash.
void require_compatible(const Checkpoint& c, const SlabGrid& g,
                        std::uint64_t params_hash);

}  // namespace chbs
