#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace bubblab {

using vec = std::vector<double>;

inline double dot(const vec& a, const vec& b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm_sq(const vec& a) { return dot(a, a); }

inline double norm(const vec& a) { return std::sqrt(norm_sq(a)); }

inline double dist_sq(const vec& a, const vec& b) {
    if (a.size() != b.size()) throw std::invalid_argument("dist_sq: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline double dist(const vec& a, const vec& b) { return std::sqrt(dist_sq(a, b)); }

inline vec sub(const vec& a, const vec& b) {
    if (a.size() != b.size()) throw std::invalid_argument("sub: dimension mismatch");
    vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

inline vec add(const vec& a, const vec& b) {
    if (a.size() != b.size()) throw std::invalid_argument("add: dimension mismatch");
    vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
    return r;
}

inline vec scaled(const vec& a, double c) {
    vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = c * a[i];
    return r;
}

// Unit vector a/|a|; the zero vector has no direction.
inline vec unit(const vec& a) {
    const double m = norm(a);
    if (m == 0.0) throw std::invalid_argument("unit: zero vector");
    return scaled(a, 1.0 / m);
}

inline vec axis_vector(std::size_t dim, std::size_t axis, double value = 1.0) {
    if (axis >= dim) throw std::invalid_argument("axis_vector: axis out of range");
    vec r(dim, 0.0);
    r[axis] = value;
    return r;
}

}  // namespace bubblab
