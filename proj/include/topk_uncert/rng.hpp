#pragma once

#include <cstdint>
#include <random>

namespace topk_uncert::rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Counter-based stream derivation: sample j gets an independent engine seeded
// from (master_seed, j), so per-sample work can run on any number of workers
// without changing the output.
inline std::mt19937_64 derive_stream(std::uint64_t master_seed, std::uint64_t index) {
  const std::uint64_t mixed = splitmix64(master_seed ^ (0x9E3779B97F4A7C15ULL * (index + 1)));
  return std::mt19937_64(splitmix64(mixed));
}

// Uniform in [0, 1) from the engine's raw bits; avoids the
// implementation-defined std::uniform_real_distribution.
inline double uniform01(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

}  // namespace topk_uncert::rng
