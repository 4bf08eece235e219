#pragma once

#include <cmath>
#include <cstdint>

namespace litecan {

// SplitMix64: a seedable counter-based 64-bit generator. Every stochastic
// routine in the library takes one of these explicitly; nothing draws from
// hidden global state, so a run is a pure function of its seeds.
class SplitMix64 {
public:
    explicit SplitMix64(uint64_t seed) : state_(seed) {}

    uint64_t next() {
        uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform double in [0, 1), 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform_range(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, bound), bound > 0. Multiply-shift reduction.
    uint64_t uniform_int(uint64_t bound) {
        return static_cast<uint64_t>(
            (static_cast<__uint128_t>(next()) * static_cast<__uint128_t>(bound)) >> 64);
    }

    // Standard normal via Box-Muller; caches the second value of each pair.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(t);
        has_spare_ = true;
        return r * std::cos(t);
    }

private:
    uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

inline uint64_t mix64(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Derives an independent stream seed from a base seed and up to three
// stream coordinates (e.g. purpose tag, federation round, client index).
inline uint64_t mix_seed(uint64_t base, uint64_t a, uint64_t b = 0, uint64_t c = 0) {
    uint64_t h = base;
    h = mix64(h + 0x9E3779B97F4A7C15ull * (a + 1));
    h = mix64(h + 0x9E3779B97F4A7C15ull * (b + 1));
    h = mix64(h + 0x9E3779B97F4A7C15ull * (c + 1));
    return h;
}

// Stream tags used with mix_seed so distinct consumers never share a stream.
namespace seed_stream {
constexpr uint64_t kInit = 1;   // parameter initialization
constexpr uint64_t kTrain = 2;  // shuffling + dropout, per (round, client)
constexpr uint64_t kSynth = 3;  // synthetic traffic generation
constexpr uint64_t kBench = 4;  // benchmark input data
}  // namespace seed_stream

}  // namespace litecan
