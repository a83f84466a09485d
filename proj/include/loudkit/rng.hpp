#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace loudkit {

/// Deterministic random source. mt19937_64 is fully specified by the
/// standard, and all value transforms below are written out explicitly,
/// so a seed produces the same draw sequence on every platform (the
/// std::*_distribution classes make no such promise).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + uniform01() * (hi - lo); }

    /// Box-Muller transform; consumes exactly two engine outputs per call.
    double normal(double mu, double sigma) {
        const double u1 = 1.0 - uniform01(); // (0, 1], keeps log finite
        const double u2 = uniform01();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        return mu + sigma * radius * std::cos(2.0 * std::numbers::pi * u2);
    }

    bool bernoulli(double p) { return uniform01() < p; }

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t uniform_index(std::uint64_t n) {
        const auto idx = static_cast<std::uint64_t>(uniform01() * static_cast<double>(n));
        return idx < n ? idx : n - 1;
    }

private:
    std::mt19937_64 engine_;
};

/// Mix two 64-bit values into a fresh seed (splitmix64 finalizer).
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

} // namespace loudkit
