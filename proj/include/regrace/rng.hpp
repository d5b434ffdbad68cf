#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace regrace {

/// splitmix64 step; used to derive independent seed streams from one master seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t s = master ^ (0xA0761D6478BD642FULL * (stream + 1));
    return splitmix64(s);
}

/// Deterministic RNG with hand-rolled distributions so results do not depend
/// on the standard library's unspecified distribution algorithms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) {
        // modulo bias is negligible for n << 2^64 and irrelevant here;
        // what matters is determinism.
        return n == 0 ? 0 : engine_() % n;
    }

    /// Standard normal via Box-Muller (deterministic, no cached spare).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

private:
    std::mt19937_64 engine_;
};

}  // namespace regrace
