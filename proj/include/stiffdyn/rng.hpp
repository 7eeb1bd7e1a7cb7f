#pragma once

// Deterministic randomness. Every consumer derives its own stream from a root
// seed plus a path of counters (stiffness index, trajectory index, epoch, ...),
// so runs reproduce bit-identically regardless of scheduling and re-running a
// subset of the pipeline reuses the same draws.

#include <cstdint>
#include <random>

namespace stiffdyn {

// SplitMix64 finalizer, used to mix (seed, counter...) paths into engine seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

    // Derive an independent stream from this seed and a counter path.
    template <typename... Counters>
    static Rng stream(std::uint64_t seed, Counters... counters) {
        std::uint64_t s = mix64(seed);
        ((s = mix64(s ^ static_cast<std::uint64_t>(counters))), ...);
        Rng r(0);
        r.engine_.seed(s);
        return r;
    }

    // Uniform in [0, 1). 53-bit mantissa from the raw engine word; the mapping
    // is fixed here rather than via std::uniform_real_distribution so that
    // draws are identical across standard library implementations.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Symmetric uniform on [-a, a].
    double symmetric(double a) { return uniform(-a, a); }

    // Standard normal via Box-Muller (fresh pair each call, second value
    // discarded: simpler statelessness beats the factor-of-two saving here).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // Rejection sampling to avoid modulo bias.
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t v = engine_();
        while (v >= limit) v = engine_();
        return v % n;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace stiffdyn
