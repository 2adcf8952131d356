#pragma once

#include <cstdint>
#include <random>

namespace cusplab {

/// SplitMix64 finalizer; used to derive independent per-index seeds.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed for ensemble member `index` of an experiment seeded with `seed`.
/// Depends only on (seed, index), never on scheduling.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return mix64(seed ^ mix64(index + 0x632be59bd9b4e019ULL));
}

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed) { return Engine(mix64(seed)); }

/// Uniform on [0, 1) with 53 random bits.
inline double uniform01(Engine& eng) { return static_cast<double>(eng() >> 11) * 0x1.0p-53; }

/// Uniform on (0, 1].
inline double uniform_open0(Engine& eng) { return (static_cast<double>(eng() >> 11) + 1.0) * 0x1.0p-53; }

}  // namespace cusplab
