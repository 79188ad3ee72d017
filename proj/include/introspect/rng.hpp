#pragma once

#include <cmath>
#include <cstdint>

namespace introspect {

// Counter-based RNG. Every draw is a pure function of (seed, purpose, i0, i1, i2),
// so parallel and serial execution produce identical streams and no generator
// state is carried between calls.

enum class rng_purpose : std::uint64_t {
    weights      = 1, // bundle synthesis
    trace_noise  = 2, // embedding corruption
    test_data    = 3, // property-test generators
};

namespace detail {

// SplitMix64 finalizer, applied round-robin over the key words.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_key(std::uint64_t seed, std::uint64_t purpose,
                              std::uint64_t i0, std::uint64_t i1, std::uint64_t i2) {
    std::uint64_t h = mix64(seed ^ 0x6a09e667f3bcc908ULL);
    h = mix64(h ^ purpose);
    h = mix64(h ^ i0);
    h = mix64(h ^ i1);
    h = mix64(h ^ i2);
    return h;
}

} // namespace detail

// Uniform in (0, 1); never returns 0 so it is safe inside log().
inline double rng_uniform(std::uint64_t seed, rng_purpose purpose,
                          std::uint64_t i0, std::uint64_t i1 = 0, std::uint64_t i2 = 0) {
    const std::uint64_t h =
        detail::hash_key(seed, static_cast<std::uint64_t>(purpose), i0, i1, i2);
    return (static_cast<double>(h >> 11) + 1.0) * 0x1.0p-53;
}

// Standard normal via Box-Muller on two independent uniform draws.
inline double rng_normal(std::uint64_t seed, rng_purpose purpose,
                         std::uint64_t i0, std::uint64_t i1 = 0, std::uint64_t i2 = 0) {
    const double u1 = rng_uniform(seed, purpose, i0, i1, i2 * 2);
    const double u2 = rng_uniform(seed, purpose, i0, i1, i2 * 2 + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

} // namespace introspect
