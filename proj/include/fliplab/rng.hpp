#pragma once

#include <cstdint>

namespace flip {

// splitmix64. Fully specified arithmetic, so streams are byte-identical
// across platforms; std::uniform_real_distribution is not and must not be
// used anywhere reproducibility is asserted.
struct Rng {
    std::uint64_t state;

    explicit Rng(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0,1)
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    // uniform integer in [0, n)
    std::uint64_t uniform_int(std::uint64_t n) { return next() % n; }

    int sign() { return (next() & 1) ? 1 : -1; }
};

// Deterministic child seed for stratum/row `index` of a master seed.
inline std::uint64_t child_seed(std::uint64_t master, std::uint64_t index) {
    Rng r(master ^ (0x632be59bd9b4e019ULL * (index + 1)));
    return r.next();
}

}  // namespace flip
