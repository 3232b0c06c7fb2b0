#pragma once

#include <cstdint>
#include <random>

#include "bubblab/geometry.hpp"

namespace bubblab {

// splitmix64 step; used to whiten user seeds and to derive independent
// substream seeds (seed, stream) -> engine without correlated low bits.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream = 0) {
    std::uint64_t s = seed ^ (0xa5a5a5a5a5a5a5a5ULL + stream * 0x9e3779b97f4a7c15ULL);
    const std::uint64_t a = splitmix64(s);
    const std::uint64_t b = splitmix64(s);
    const std::uint64_t c = splitmix64(s);
    std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                      static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)};
    return std::mt19937_64(seq);
}

// Uniform direction on the unit sphere of R^dim.
inline vec unit_sphere_dir(std::mt19937_64& eng, int dim) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    vec d(static_cast<std::size_t>(dim));
    double m = 0.0;
    do {
        for (auto& x : d) x = gauss(eng);
        m = norm(d);
    } while (m == 0.0);
    for (auto& x : d) x /= m;
    return d;
}

inline double sample_beta(std::mt19937_64& eng, double a, double b) {
    std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
    const double x = ga(eng);
    const double y = gb(eng);
    return x / (x + y);
}

}  // namespace bubblab
