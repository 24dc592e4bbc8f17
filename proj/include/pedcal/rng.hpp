#pragma once

#include <cstdint>
#include <random>

#include "pedcal/vec2.hpp"

namespace pedcal {

// splitmix64; used only to derive independent sub-seeds from the single
// user-facing seed so that e.g. scenario initialization and batch sampling
// do not share a stream.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Sub-seed for a named purpose: hash the stream id into the seed.
// Documented contract: stream 0 = scenario init, 1 = batch sampling,
// 2 = instance generation in checks.
inline std::uint64_t derive_subseed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t s = seed ^ (0xd1b54a32d192ed03ULL * (stream + 1));
    return splitmix64(s);
}

// Deterministic across platforms: mt19937_64 has a fixed sequence by the
// standard, and the uniform mapping below avoids std::uniform_real_distribution
// (whose output is implementation-defined).
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    std::uint64_t below(std::uint64_t n) {
        // rejection to keep the draw unbiased
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = eng_();
        } while (x >= limit);
        return x % n;
    }

    bool coin() { return (eng_() & 1ULL) != 0; }

    Vec2 in_rect(double xmin, double xmax, double ymin, double ymax) {
        // fixed evaluation order; do not fold into a braced initializer
        const double x = uniform(xmin, xmax);
        const double y = uniform(ymin, ymax);
        return {x, y};
    }

  private:
    std::mt19937_64 eng_;
};

}  // namespace pedcal
