#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace toricdm {

// splitmix64, used to derive independent seed streams from a master seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derive a child seed from (seed, salt_0, salt_1, ...). Every stochastic
// stage salts with a fixed tag plus its loop indices so that streams are
// reproducible and independent of evaluation order.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> salts) {
    std::uint64_t s = splitmix64(seed);
    for (std::uint64_t v : salts) s = splitmix64(s ^ (v + 0x9e3779b97f4a7c15ULL));
    return s;
}

struct Rng {
    std::mt19937_64 eng;

    explicit Rng(std::uint64_t seed) : eng(seed) {}

    double uniform01() {
        return std::uniform_real_distribution<double>(0.0, 1.0)(eng);
    }
    double uniform(double a, double b) {
        return std::uniform_real_distribution<double>(a, b)(eng);
    }
    // uniform integer in [0, n)
    int uniform_int(int n) {
        return std::uniform_int_distribution<int>(0, n - 1)(eng);
    }
};

}  // namespace toricdm
