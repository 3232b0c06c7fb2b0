#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "bubblab/config.hpp"
#include "bubblab/geometry.hpp"

namespace bubblab {

// Standard bubble profile (lambda / (lambda^2 + |y - xi|^2))^{(n-2)/2}, the
// positive entire solution of Delta u + n(n-2) u^{(n+2)/(n-2)} = 0 that
// concentrates at xi on scale lambda. Templated on the scalar type so probes
// that difference it twice can run in extended precision.
template <typename Real>
Real bubble_eval_t(Real lambda, const std::vector<Real>& xi, const std::vector<Real>& y) {
    if (xi.size() != y.size()) throw std::invalid_argument("bubble_eval: dimension mismatch");
    if (!(lambda > Real(0))) throw std::invalid_argument("bubble_eval: lambda must be positive");
    const int n = static_cast<int>(xi.size());
    Real r2 = Real(0);
    for (std::size_t i = 0; i < xi.size(); ++i) {
        const Real d = y[i] - xi[i];
        r2 += d * d;
    }
    const Real base = lambda / (lambda * lambda + r2);
    return std::pow(base, Real(n - 2) / Real(2));
}

inline double bubble_eval(const BubbleParams& b, const vec& y) { return bubble_eval_t<double>(b.lambda, b.xi, y); }

struct BubbleGrad {
    double lambda_component = 0.0;  // lambda * d/d lambda
    vec xi_components;              // lambda * d/d xi_j, one entry per coordinate
};

// Scale-coupled gradient (lambda d_lambda V, lambda d_xi V) in closed form:
//   lambda d_lambda V = ((n-2)/2) V (r^2 - lambda^2) / (lambda^2 + r^2)
//   lambda d_xi_j  V = (n-2) (lambda / (lambda^2 + r^2))^{n/2} (y_j - xi_j).
inline BubbleGrad bubble_grad_qh(const BubbleParams& b, const vec& y) {
    if (b.xi.size() != y.size()) throw std::invalid_argument("bubble_grad_qh: dimension mismatch");
    if (!(b.lambda > 0.0)) throw std::invalid_argument("bubble_grad_qh: lambda must be positive");
    const int n = static_cast<int>(y.size());
    const double r2 = dist_sq(y, b.xi);
    const double denom = b.lambda * b.lambda + r2;
    const double v = std::pow(b.lambda / denom, 0.5 * (n - 2));
    BubbleGrad g;
    g.lambda_component = 0.5 * (n - 2) * v * (r2 - b.lambda * b.lambda) / denom;
    const double kernel = (n - 2.0) * std::pow(b.lambda / denom, 0.5 * n);
    g.xi_components.resize(y.size());
    for (std::size_t j = 0; j < y.size(); ++j) g.xi_components[j] = kernel * (y[j] - b.xi[j]);
    return g;
}

inline double plantation_eval(const std::vector<BubbleParams>& bubbles, const vec& y) {
    if (bubbles.empty()) throw std::invalid_argument("plantation_eval: no bubbles");
    double s = 0.0;
    for (const auto& b : bubbles) s += bubble_eval(b, y);
    return s;
}

inline double plantation_eval(const Configuration& cfg, const vec& y) { return plantation_eval(cfg.bubbles, y); }

// Same configuration expressed in units of lambda_bar: scales become
// lambda_l / lambda_bar and centres xi_l / lambda_bar. Cluster-size
// quantities (for example the plantation sup) are scale-free in these
// variables.
inline Configuration rescale_configuration(const Configuration& cfg) {
    const double lb = lambda_bar(cfg);
    Configuration out = cfg;
    for (auto& b : out.bubbles) {
        b.lambda /= lb;
        b.xi = scaled(b.xi, 1.0 / lb);
    }
    out.box.lo /= lb;
    out.box.hi /= lb;
    out.model.reset();  // the model's H does not rescale with the cluster
    return out;
}

enum class NormKind { star, star_star };

// Grid-sup lower bound of the weighted norm: max over samples of
// |f(y)| / sum_l (1 + |y - xi_l|)^{-p}, with p = (n-2)/2 + tau for the star
// norm and p = (n-2)/2 + 2 + tau for the double-star norm. Refining the
// sample set can only raise the value.
inline double weighted_norm(const std::vector<std::pair<vec, double>>& field, const Configuration& cfg, NormKind kind,
                            double tau_override = -1.0) {
    if (field.empty()) throw std::invalid_argument("weighted_norm: empty sample set");
    const double tau = tau_override > 0.0 ? tau_override : cfg.regime.tau_gt1;
    if (!(tau > 1.0)) throw std::invalid_argument("weighted_norm: tau must exceed 1");
    const double p = 0.5 * (cfg.n - 2) + (kind == NormKind::star ? 0.0 : 2.0) + tau;
    double sup = 0.0;
    for (const auto& [y, value] : field) {
        if (static_cast<int>(y.size()) != cfg.n) throw std::invalid_argument("weighted_norm: sample dimension mismatch");
        double w = 0.0;
        for (const auto& b : cfg.bubbles) w += std::pow(1.0 + dist(y, b.xi), -p);
        sup = std::max(sup, std::abs(value) / w);
    }
    return sup;
}

// Finite-difference residual of the bubble equation at y:
//   Delta_h V + n(n-2) V^{(n+2)/(n-2)},
// with the 2nd-order central Laplacian stencil of step h. Converges to zero
// at rate h^2 wherever V is smooth. Real = long double keeps the h^-2
// round-off amplification below the h^2 signal for steps down to 1e-4.
template <typename Real>
Real pde_residual_fd(Real lambda, const std::vector<Real>& xi, const std::vector<Real>& y, Real h) {
    if (!(h > Real(0))) throw std::invalid_argument("pde_residual_fd: h must be positive");
    const int n = static_cast<int>(xi.size());
    const Real center = bubble_eval_t<Real>(lambda, xi, y);
    Real lap = Real(0);
    std::vector<Real> probe = y;
    for (int j = 0; j < n; ++j) {
        probe[j] = y[j] + h;
        const Real up = bubble_eval_t<Real>(lambda, xi, probe);
        probe[j] = y[j] - h;
        const Real down = bubble_eval_t<Real>(lambda, xi, probe);
        probe[j] = y[j];
        lap += (up - Real(2) * center + down) / (h * h);
    }
    const Real power = Real(n + 2) / Real(n - 2);
    return lap + Real(n * (n - 2)) * std::pow(center, power);
}

}  // namespace bubblab
