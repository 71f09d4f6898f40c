#pragma once

// Distribution helpers on top of std::mt19937_64. The engine's output
// sequence is fixed by the standard but the std:: distributions are not, so
// seeded results here are reproducible across standard libraries.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace ram {

using Rng = std::mt19937_64;

/// Uniform integer in [0, n), rejection-sampled to avoid modulo bias.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    // 2^64 mod n; values below it would over-represent small residues.
    const std::uint64_t threshold = (std::uint64_t{0} - n) % n;
    std::uint64_t x = rng();
    while (x < threshold) x = rng();
    return x % n;
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

/// Standard normal via Box-Muller (one draw per call, second value dropped).
inline double standard_normal(Rng& rng) {
    double u1 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace ram
