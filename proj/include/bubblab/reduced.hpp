#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "bubblab/config.hpp"
#include "bubblab/constants.hpp"
#include "bubblab/functionals.hpp"
#include "bubblab/geometry.hpp"
#include "bubblab/parallel.hpp"
#include "bubblab/quadrature.hpp"

namespace bubblab {

// Thrown when measured data cannot support the power-law comparison a fit
// family promises: non-positive values, a non-monotone trend, or samples that
// do not span the required range.
struct fit_rejected_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void require_model_triple(const Configuration& cfg, const CurvatureModel& model, const ConstantTable& table) {
    model.validate();
    if (cfg.n != model.n) throw std::invalid_argument("model functional: configuration and model dimensions differ");
    if (table.n != cfg.n) throw std::invalid_argument("model functional: constant table built for a different dimension");
    if (static_cast<double>(table.ell) != model.ell)
        throw std::invalid_argument("model functional: constant table built for a different flatness order");
    if (cfg.bubbles.empty()) throw std::invalid_argument("model functional: configuration has no bubbles");
    for (const auto& b : cfg.bubbles) {
        if (static_cast<int>(b.xi.size()) != cfg.n)
            throw std::invalid_argument("model functional: bubble centre dimension mismatch");
        if (!(b.lambda > 0.0) || !std::isfinite(b.lambda))
            throw std::invalid_argument("model functional: concentration scales must be positive and finite");
    }
}

// (lambda_l lambda_k)^{(n-2)/2} |xi_l - xi_k|^{-(n-2)}, the pair term of the
// model energy. Coincident centres are a structural error.
inline double pair_interaction(const BubbleParams& a, const BubbleParams& b, int n) {
    const double d2 = dist_sq(a.xi, b.xi);
    if (d2 == 0.0) throw std::invalid_argument("model functional: coincident bubble centres");
    const double half = 0.5 * (n - 2.0);
    return std::pow(a.lambda * b.lambda, half) * std::pow(d2, -half);
}

// Parameter-dependent part of the reduced energy: the curvature penalty
// C(p_l) lambda^ell per bubble, minus the pairwise attraction over ordered
// pairs, plus the offset penalty C(p_l) lambda^{ell-2} eta^2. Kept separate
// from the constant self-energy bulk so finite-difference probes can
// difference a quantity of the gradient's own magnitude: adding the bulk
// first would round the small terms against it.
inline double model_energy_varying(const Configuration& cfg, const CurvatureModel& model, const ConstantTable& table) {
    const int n = cfg.n;
    const std::size_t flat = cfg.bubbles.size();
    double f = 0.0;
    for (const auto& b : cfg.bubbles) {
        const double c = model.amplitude_at(project_to_H(b.xi, model));
        const OffsetFrame frame = offset_frame(b.xi, model);
        f += table.c01 * c * std::pow(b.lambda, model.ell);
        f += table.c03 * c * std::pow(b.lambda, model.ell - 2.0) * frame.eta * frame.eta;
    }
    for (std::size_t l = 0; l < flat; ++l)
        for (std::size_t k = 0; k < flat; ++k)
            if (k != l) f -= table.c02 * pair_interaction(cfg.bubbles[l], cfg.bubbles[k], n);
    return f;
}

}  // namespace detail

// Leading-order reduced energy of a configuration: flat self-energy per
// bubble plus the parameter-dependent terms above. The ordered-pair
// convention (no 1/2) is what makes the scaled gradients below exact
// derivatives of this expression.
inline double model_energy_F(const Configuration& cfg, const CurvatureModel& model, const ConstantTable& table) {
    detail::require_model_triple(cfg, model, table);
    const double bulk = (cfg.n - 2.0) * table.v_n * static_cast<double>(cfg.bubbles.size());
    return bulk + detail::model_energy_varying(cfg, model, table);
}

// Scale component of the scaled gradient: G_l = lambda_l dF/dlambda_l. The
// closed form below agrees with that derivative exactly because the table
// satisfies c11 = ell c01, c12 = (n-2) c02, c13 = (ell-2) c03.
inline double model_grad_lambda_G(const Configuration& cfg, const CurvatureModel& model, const ConstantTable& table,
                                  std::size_t l) {
    detail::require_model_triple(cfg, model, table);
    if (l >= cfg.bubbles.size()) throw std::out_of_range("model_grad_lambda_G: bubble index out of range");
    const auto& b = cfg.bubbles[l];
    const double c = model.amplitude_at(project_to_H(b.xi, model));
    const OffsetFrame frame = offset_frame(b.xi, model);
    double g = table.c11 * c * std::pow(b.lambda, model.ell);
    g += table.c13 * c * std::pow(b.lambda, model.ell - 2.0) * frame.eta * frame.eta;
    for (std::size_t k = 0; k < cfg.bubbles.size(); ++k)
        if (k != l) g -= table.c12 * detail::pair_interaction(b, cfg.bubbles[k], cfg.n);
    return g;
}

// Centre component of the scaled gradient: H_l = lambda_l grad_{xi_l} F. The
// repulsion points from xi_k toward xi_l; the offset term pushes along the
// outward offset normal and vanishes continuously on H (zero normal there).
// Exactness needs c22 = 2 (n-2) c02 and c23 = 2 c03 from the table.
inline vec model_grad_xi_H(const Configuration& cfg, const CurvatureModel& model, const ConstantTable& table,
                           std::size_t l) {
    detail::require_model_triple(cfg, model, table);
    if (l >= cfg.bubbles.size()) throw std::out_of_range("model_grad_xi_H: bubble index out of range");
    const int n = cfg.n;
    const auto& b = cfg.bubbles[l];
    vec h(b.xi.size(), 0.0);
    for (std::size_t k = 0; k < cfg.bubbles.size(); ++k) {
        if (k == l) continue;
        const auto& other = cfg.bubbles[k];
        const double d = std::sqrt(dist_sq(b.xi, other.xi));
        if (d == 0.0) throw std::invalid_argument("model functional: coincident bubble centres");
        const double w = table.c22 * std::pow(std::sqrt(b.lambda * other.lambda) / d, static_cast<double>(n)) / other.lambda;
        for (std::size_t i = 0; i < h.size(); ++i) h[i] += w * (b.xi[i] - other.xi[i]);
    }
    const double c = model.amplitude_at(project_to_H(b.xi, model));
    const OffsetFrame frame = offset_frame(b.xi, model);
    const double w = table.c23 * c * std::pow(b.lambda, model.ell - 1.0) * frame.eta;
    for (std::size_t i = 0; i < h.size(); ++i) h[i] += w * frame.normal[i];
    return h;
}

// All scaled-gradient components in one vector: G_1..G_flat followed by the
// flat centre gradients H_1..H_flat (n entries each). This is the residual the
// critical-point solver drives to zero.
inline std::vector<double> model_gradient_stack(const Configuration& cfg, const CurvatureModel& model,
                                                const ConstantTable& table) {
    detail::require_model_triple(cfg, model, table);
    const std::size_t flat = cfg.bubbles.size();
    std::vector<double> stack;
    stack.reserve(flat * (1 + static_cast<std::size_t>(cfg.n)));
    for (std::size_t l = 0; l < flat; ++l) stack.push_back(model_grad_lambda_G(cfg, model, table, l));
    for (std::size_t l = 0; l < flat; ++l) {
        const vec h = model_grad_xi_H(cfg, model, table, l);
        stack.insert(stack.end(), h.begin(), h.end());
    }
    return stack;
}

struct GradientConsistencyReport {
    double h = 1e-3;
    double gradient_norm = 0.0;    // sup norm of the stacked closed-form gradient
    double max_deviation = 0.0;    // sup-norm deviation of the FD gradient, relative to gradient_norm
    double tolerance = 1e-6;
    bool pass = false;
    std::vector<double> bubble_deviation;  // worst relative deviation per bubble
    std::vector<std::string> notes;
};

// Finite-difference check that (G_l, H_l) really is the lambda_l-scaled
// gradient of model_energy_F, using the five-point central stencil: the pair
// terms d^{-(n-2)} make the O(h^2) three-point truncation comparable to the
// 1e-6 gate at realistic separations. Deviations are measured against the sup
// norm of the whole stacked gradient: per-component relative error is
// meaningless for components that honestly vanish (symmetric configurations).
inline GradientConsistencyReport verify_gradient_consistency(const Configuration& cfg, const CurvatureModel& model,
                                                             const ConstantTable& table, double h = 1e-3) {
    detail::require_model_triple(cfg, model, table);
    if (!(h > 0.0) || !(h < 0.1))
        throw std::invalid_argument("verify_gradient_consistency: step must lie in (0, 0.1)");
    if (model.amplitude_fn)
        throw std::invalid_argument(
            "verify_gradient_consistency: the gradient identity holds for a position-independent amplitude; a varying "
            "amplitude adds a transport term the closed form does not carry");

    GradientConsistencyReport report;
    report.h = h;
    const std::size_t flat = cfg.bubbles.size();
    const std::vector<double> analytic = model_gradient_stack(cfg, model, table);
    for (double a : analytic) report.gradient_norm = std::max(report.gradient_norm, std::abs(a));
    const double norm = std::max(report.gradient_norm, 1e-300);

    Configuration work = cfg;
    // f'(0) ~ [f(-2s) - 8f(-s) + 8f(s) - f(2s)] / 12s on the given setter.
    // Differencing the varying part alone is exact (the self-energy bulk is
    // constant in every probed direction) and keeps round-off at the scale of
    // the gradient instead of the scale of the total energy.
    const auto stencil = [&](auto&& set, double step) {
        set(-2.0 * step);
        double acc = detail::model_energy_varying(work, model, table);
        set(-step);
        acc -= 8.0 * detail::model_energy_varying(work, model, table);
        set(step);
        acc += 8.0 * detail::model_energy_varying(work, model, table);
        set(2.0 * step);
        acc -= detail::model_energy_varying(work, model, table);
        set(0.0);
        return acc / (12.0 * step);
    };
    report.bubble_deviation.assign(flat, 0.0);
    for (std::size_t l = 0; l < flat; ++l) {
        // lambda direction: the step is proportional to lambda_l, so the
        // widest stencil point stays positive for any h < 1/2.
        const double lambda0 = cfg.bubbles[l].lambda;
        const double fd_g =
            lambda0 * stencil([&](double d) { work.bubbles[l].lambda = lambda0 + d; }, h * lambda0);
        double dev = std::abs(fd_g - analytic[l]) / norm;
        report.bubble_deviation[l] = dev;

        const double step_x = h * std::max(1.0, bubblab::norm(cfg.bubbles[l].xi));
        for (std::size_t i = 0; i < cfg.bubbles[l].xi.size(); ++i) {
            const double xi0 = cfg.bubbles[l].xi[i];
            const double fd_h =
                lambda0 * stencil([&](double d) { work.bubbles[l].xi[i] = xi0 + d; }, step_x);
            const double analytic_h = analytic[flat + l * cfg.bubbles[l].xi.size() + i];
            dev = std::abs(fd_h - analytic_h) / norm;
            report.bubble_deviation[l] = std::max(report.bubble_deviation[l], dev);
        }
        report.max_deviation = std::max(report.max_deviation, report.bubble_deviation[l]);
    }
    report.pass = report.max_deviation <= report.tolerance;
    return report;
}

enum class ExpansionFamily { interaction_vs_distance, curvature_vs_lambda, curvature_vs_eta };

inline std::string to_string(ExpansionFamily f) {
    switch (f) {
        case ExpansionFamily::interaction_vs_distance: return "interaction-vs-d";
        case ExpansionFamily::curvature_vs_lambda: return "curvature-vs-lambda";
        default: return "curvature-vs-eta";
    }
}

inline ExpansionFamily expansion_family_from_string(const std::string& s) {
    if (s == "interaction-vs-d") return ExpansionFamily::interaction_vs_distance;
    if (s == "curvature-vs-lambda") return ExpansionFamily::curvature_vs_lambda;
    if (s == "curvature-vs-eta") return ExpansionFamily::curvature_vs_eta;
    throw std::invalid_argument("unknown expansion family: " + s);
}

// Fixed parameters of a fit family; the sample points supply the one variable
// being swept (distance, scale, or offset).
struct ExpansionParams {
    int n = 6;
    int ell = 2;
    double lambda1 = 1e-2;       // interaction family: first scale
    double lambda2 = 1e-2;       // interaction family: second scale
    double lambda = 1e-3;        // curvature families: concentration scale
    double amplitude = 1.0;      // curvature families: flatness coefficient C
    double rho_exponent = 0.6;   // curvature integrals run over the ball of radius lambda^rho_exponent
    double exponent_tol = 0.02;
    double coefficient_tol = 0.01;
};

struct ExpansionFit {
    ExpansionFamily family = ExpansionFamily::interaction_vs_distance;
    double fitted_coefficient = 0.0;
    double fitted_exponent = 0.0;
    double predicted_coefficient = 0.0;
    double predicted_exponent = 0.0;
    std::vector<double> sample_points;
    std::vector<double> values;
    std::vector<double> residuals;  // per-sample relative deviation from the fitted power law
    double exponent_tol = 0.02;
    double coefficient_tol = 0.01;
    bool passes = false;
};

// Measures one integral family over the given sample points, fits a power law
// by log-log least squares, and compares it with the closed-form prediction.
// The coefficient is read off at the most asymptotic sample (largest distance,
// or smallest scale / offset) using the predicted exponent, where the
// subleading corrections are smallest; the fitted exponent carries the shape
// information independently.
inline ExpansionFit fit_expansion(ExpansionFamily family, const std::vector<double>& sample_points,
                                  const QuadratureSpec& spec = {}, const ExpansionParams& params = {}) {
    spec.validate();
    if (params.n < 3) throw std::invalid_argument("fit_expansion: n must be >= 3");
    if (params.ell < 2 || params.ell >= params.n - 2)
        throw std::invalid_argument("fit_expansion: ell must lie in [2, n-2)");
    if (sample_points.size() < 4) throw fit_rejected_error("fit rejected: need at least 4 sample points");
    std::vector<double> x = sample_points;
    std::sort(x.begin(), x.end());
    if (!(x.front() > 0.0)) throw fit_rejected_error("fit rejected: sample points must be positive");
    if (std::adjacent_find(x.begin(), x.end()) != x.end())
        throw fit_rejected_error("fit rejected: sample points must be distinct");
    if (!(x.back() >= 10.0 * x.front())) throw fit_rejected_error("fit rejected: sample points must span a decade");

    const int n = params.n;
    const double m = n - 2.0;
    ExpansionFit fit;
    fit.family = family;
    fit.sample_points = x;
    fit.exponent_tol = params.exponent_tol;
    fit.coefficient_tol = params.coefficient_tol;

    std::size_t finest = 0;  // index of the most asymptotic sample
    std::function<double(std::size_t)> measure;
    switch (family) {
        case ExpansionFamily::interaction_vs_distance: {
            fit.predicted_exponent = -m;
            fit.predicted_coefficient =
                (unit_sphere_measure(n) / n) * std::pow(params.lambda1 * params.lambda2, 0.5 * m);
            finest = x.size() - 1;
            measure = [&, x](std::size_t i) {
                BubbleParams a{params.lambda1, vec(static_cast<std::size_t>(n), 0.0)};
                BubbleParams b{params.lambda2, vec(static_cast<std::size_t>(n), 0.0)};
                b.xi[0] = x[i];
                return interaction_integral(a, b, n, spec).value;
            };
            break;
        }
        case ExpansionFamily::curvature_vs_lambda: {
            fit.predicted_exponent = static_cast<double>(params.ell);
            fit.predicted_coefficient = (2.0 * n / m) * params.amplitude * constant("c01", n, params.ell, spec);
            finest = 0;
            measure = [&, x](std::size_t i) {
                CurvatureModel model;
                model.n = n;
                model.ell = static_cast<double>(params.ell);
                model.amplitude = params.amplitude;
                BubbleParams b{x[i], vec(static_cast<std::size_t>(n), 0.0)};
                return curvature_integral(b, model, std::pow(x[i], params.rho_exponent), spec).value;
            };
            break;
        }
        case ExpansionFamily::curvature_vs_eta: {
            fit.predicted_exponent = 2.0;
            fit.predicted_coefficient = (2.0 * n / m) * params.amplitude *
                                        constant("c03", n, params.ell, spec) *
                                        std::pow(params.lambda, params.ell - 2.0);
            finest = 0;
            CurvatureModel model;
            model.n = n;
            model.ell = static_cast<double>(params.ell);
            model.amplitude = params.amplitude;
            const double radius = std::pow(params.lambda, params.rho_exponent);
            BubbleParams base{params.lambda, vec(static_cast<std::size_t>(n), 0.0)};
            const double at_zero = curvature_integral(base, model, radius, spec).value;
            measure = [&, x, model, radius, at_zero](std::size_t i) {
                BubbleParams b{params.lambda, vec(static_cast<std::size_t>(n), 0.0)};
                b.xi[b.xi.size() - 1] = x[i];
                return curvature_integral(b, model, radius, spec).value - at_zero;
            };
            break;
        }
    }

    fit.values = run_indexed<double>(x.size(), measure);

    for (double y : fit.values)
        if (!(y > 0.0) || !std::isfinite(y))
            throw fit_rejected_error("fit rejected: family values must be positive and finite");
    const bool increasing = fit.values.back() > fit.values.front();
    for (std::size_t i = 0; i + 1 < fit.values.size(); ++i) {
        const bool step_up = fit.values[i + 1] > fit.values[i];
        if (step_up != increasing) throw fit_rejected_error("fit rejected: family values are not monotone in the sample");
    }

    // Log-log least squares for the exponent.
    const std::size_t count = x.size();
    double mean_lx = 0.0;
    double mean_ly = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        mean_lx += std::log(x[i]);
        mean_ly += std::log(fit.values[i]);
    }
    mean_lx /= static_cast<double>(count);
    mean_ly /= static_cast<double>(count);
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        const double dx = std::log(x[i]) - mean_lx;
        sxx += dx * dx;
        sxy += dx * (std::log(fit.values[i]) - mean_ly);
    }
    fit.fitted_exponent = sxy / sxx;
    fit.fitted_coefficient = fit.values[finest] / std::pow(x[finest], fit.predicted_exponent);

    const double log_amp = mean_ly - fit.fitted_exponent * mean_lx;
    fit.residuals.resize(count);
    for (std::size_t i = 0; i < count; ++i)
        fit.residuals[i] = fit.values[i] / std::exp(log_amp + fit.fitted_exponent * std::log(x[i])) - 1.0;

    fit.passes = std::abs(fit.fitted_exponent - fit.predicted_exponent) <= fit.exponent_tol &&
                 std::abs(fit.fitted_coefficient / fit.predicted_coefficient - 1.0) <= fit.coefficient_tol;
    return fit;
}

}  // namespace bubblab
