#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace sdg {

// Counter-based random streams.
//
// Every variate is a pure function of (seed, path, step, slot), so a batch
// of simulated paths decorrelates by construction and the draw for a given
// path/step never depends on scheduling, thread count, or how many other
// strategies share the seed. That property is what makes common-random-
// number comparisons between strategy pairs exact.

namespace detail {

// SplitMix64 finalizer. Good avalanche, cheap, and stable across platforms.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace detail

// Deterministic 64-bit word for a (seed, a, b, c) counter tuple.
inline std::uint64_t counter_word(std::uint64_t seed, std::uint64_t a,
                                  std::uint64_t b, std::uint64_t c) {
    std::uint64_t h = detail::mix64(seed);
    h = detail::mix64(h ^ a);
    h = detail::mix64(h ^ b);
    h = detail::mix64(h ^ c);
    return h;
}

// Uniform draw in (0, 1]. The +1 keeps log() safe at the low end.
inline double counter_u01(std::uint64_t word) {
    return static_cast<double>((word >> 11) + 1) * 0x1.0p-53;
}

// Standard normal via Box-Muller (cosine branch). Two counter words per
// variate; slot k consumes words 2k and 2k+1 of the (seed, path, step)
// stream.
inline double counter_normal(std::uint64_t seed, std::uint64_t path,
                             std::uint64_t step, std::uint64_t slot) {
    const double u1 = counter_u01(counter_word(seed, path, step, 2 * slot));
    const double u2 = counter_u01(counter_word(seed, path, step, 2 * slot + 1));
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
}

// Small sequential generator over the same counter stream, for places that
// just need a reproducible sequence (sampling audits, random strategy
// families, test data). Not for path noise; paths use the keyed form above.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
        : seed_(seed), stream_(stream) {}

    std::uint64_t next_word() { return counter_word(seed_, stream_, n_++, 0); }

    double uniform01() { return counter_u01(next_word()); }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * (uniform01() - 0x1.0p-53);
    }

    double normal() {
        const double u1 = uniform01();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

    // Uniform index in [0, n).
    std::size_t index(std::size_t n) {
        return static_cast<std::size_t>(
            std::min<double>(static_cast<double>(n) * uniform01(),
                             static_cast<double>(n - 1)));
    }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t n_ = 0;
};

}  // namespace sdg
