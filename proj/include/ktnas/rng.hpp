#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "ktnas/errors.hpp"

namespace ktnas {

// splitmix64 finalizer; used to derive independent stream seeds from one run seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// All randomness goes through this wrapper instead of <random> distributions,
// whose output is implementation-defined. Trace reproducibility requires the
// draw sequence itself to be portable, not just the raw engine.
class Rng {
   public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next() { return gen_(); }

    // Uniform on [0, n). Modulo bias is ~n/2^64, irrelevant at our n.
    std::size_t uniform_index(std::size_t n) {
        if (n == 0) throw ContractError("uniform_index: empty range");
        return static_cast<std::size_t>(next() % n);
    }

    // Uniform on [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform01() < p; }

    // Box-Muller, no caching; the spare cosine partner is discarded.
    double normal() {
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

   private:
    std::mt19937_64 gen_;
};

}  // namespace ktnas
