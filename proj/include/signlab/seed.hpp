#pragma once

#include <cstdint>
#include <random>

namespace signlab {

using Rng = std::mt19937_64;

// Bijective 64-bit finalizer (splitmix64).
std::uint64_t mix64(std::uint64_t x);

// Run seed for run `run_index` under `base_seed`. For a fixed base this is
// injective in the index; the result depends on nothing else.
std::uint64_t seed_spawn(std::uint64_t base_seed, std::uint64_t run_index);

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

}  // namespace signlab
