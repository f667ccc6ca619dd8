#pragma once

#include <cmath>
#include <cstdint>
#include <random>

// Deterministic random number streams. Every stochastic routine in the
// library takes (seed, stream) pairs so that results are reproducible
// bit-for-bit across runs and across worker decompositions.

namespace affest {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Engine for logical stream `stream` under master seed `seed`. Distinct
// stream ids give decorrelated sequences; same inputs give the same engine.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t s = seed;
    std::uint64_t a = splitmix64(s);
    s ^= stream * 0xD1B54A32D192ED03ull + 0x8CB92BA72F3D8DD7ull;
    std::uint64_t b = splitmix64(s);
    return std::mt19937_64(a ^ b);
}

// Uniform on (0, 1]; never returns 0, so log(u) is always finite.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>((rng() >> 11) + 1) * 0x1.0p-53;
}

// Standard normal via Box-Muller. Uses the cosine branch only so that the
// stream consumption is fixed at two draws per variate.
inline double normal01(std::mt19937_64& rng) {
    constexpr double two_pi = 6.283185307179586476925286766559;
    const double u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

}  // namespace affest
