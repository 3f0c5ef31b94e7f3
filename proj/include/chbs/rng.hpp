// rng.hpp -- named deterministic PRNG used for all seeded noise.
//
// splitmix64: tiny, well-studied, identical output on every platform.  The
// standard-library distributions are implementation-defined, so uniform
// variates are mapped explicitly here to keep trajectories byte-reproducible.
#pragma once

#include <cstdint>

namespace chbs {

struct SplitMix64 {
  std::uint64_t state;

  explicit SplitMix64(std::uint64_t seed) : state(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1): top 53 bits scaled by 2^-53.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in [-1, 1).
  double next_symmetric() { return 2.0 * next_unit() - 1.0; }
};

}  // namespace chbs
