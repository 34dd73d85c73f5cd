#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace lre {

// Deterministic generator used wherever randomness is needed. splitmix64
// core, so streams are bit-identical across platforms and standard-library
// versions (std::uniform_*_distribution is implementation-defined and
// therefore avoided everywhere).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    /// Unbiased uniform integer in [0, n); n must be > 0.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t r;
        do { r = next_u64(); } while (r >= limit);
        return r % n;
    }

    /// Standard normal via Box-Muller; one value of each pair is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1;
        do { u1 = next_double(); } while (u1 <= 0.0);
        const double u2 = next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// FNV-1a over a byte string, folded into an existing hash state.
inline std::uint64_t hash_mix(std::uint64_t h, std::string_view bytes) {
    for (const char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Per-pair seed derivation: verification of (a, b) must never depend on
/// evaluation order or thread count, so each pair gets its own stream.
inline std::uint64_t pair_seed(std::uint64_t seed, std::string_view a, std::string_view b) {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ (seed * 0x9e3779b97f4a7c15ULL);
    h = hash_mix(h, a);
    h = hash_mix(h, std::string_view("\x1f", 1));
    h = hash_mix(h, b);
    return h;
}

} // namespace lre
