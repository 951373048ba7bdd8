#pragma once

#include <cstdint>

namespace mbt {

// splitmix64-style mixer: derives an independent, reproducible RNG stream
// from a base seed and a salt (epoch index, mosaic index, ...)
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace mbt
