#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace qdlab {

// SplitMix64 finalizer. Used both as a standalone mixer for deriving
// per-candidate / per-stream seeds and to expand a single u64 seed into
// engine state.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Derives an independent stream seed from (seed, stream). Streams are
// labeled by small integers or FNV-hashed tags at call sites.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t s = seed ^ (stream * 0x9e3779b97f4a7c15ULL);
    return splitmix64(s);
}

inline std::uint64_t hash_tag(const char* tag) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char* p = tag; *p; ++p) h = (h ^ static_cast<std::uint8_t>(*p)) * 0x100000001b3ULL;
    return h;
}

// mt19937_64 output is fully specified by the standard; the distributions
// below are hand-rolled so sequences are bit-identical across platforms
// and library versions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal, Box-Muller (cached spare)
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

    // uniform integer in [0, n)
    std::uint64_t below(std::uint64_t n) {
        // multiply-shift; bias is negligible for n << 2^64 and the result
        // is deterministic, which is what matters here
        return static_cast<std::uint64_t>((static_cast<__uint128_t>(engine_()) * n) >> 64);
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace qdlab
