#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace bubblab {

inline double log_beta(double a, double b) {
    if (a <= 0.0 || b <= 0.0) throw std::invalid_argument("log_beta: arguments must be positive");
    return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

inline double beta_function(double a, double b) { return std::exp(log_beta(a, b)); }

// Surface measure of the unit sphere S^{dim-1} in R^dim: 2 pi^{dim/2} / Gamma(dim/2).
inline double unit_sphere_measure(int dim) {
    if (dim < 1) throw std::invalid_argument("unit_sphere_measure: dim must be >= 1");
    const double half = 0.5 * static_cast<double>(dim);
    return 2.0 * std::exp(half * std::log(std::numbers::pi) - std::lgamma(half));
}

// Total mass of the unit profile (1 + |Y|^2)^{-dim} over R^dim. The profile is
// scale invariant, so this also normalises every rescaled copy.
inline double unit_profile_mass(int dim) {
    if (dim < 1) throw std::invalid_argument("unit_profile_mass: dim must be >= 1");
    return unit_sphere_measure(dim) * 0.5 * beta_function(0.5 * dim, 0.5 * dim);
}

}  // namespace bubblab
