// random.hpp
// Seeded random streams. Draws are built from raw engine output so a given
// (seed, stream) pair yields the same sequence on every platform.

#pragma once

#include <cstdint>
#include <random>

namespace mmes {

using Rng = std::mt19937_64;

/// Independent stream `index` derived from a base seed.
inline Rng make_stream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace mmes
