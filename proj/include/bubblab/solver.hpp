#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "bubblab/config.hpp"
#include "bubblab/constants.hpp"
#include "bubblab/geometry.hpp"
#include "bubblab/reduced.hpp"

namespace bubblab {

// none: all flat*(1+n) parameters move freely.
// ring: circle-symmetric quotient, two unknowns (common log lambda, ring radius).
// ring_fixed_eta: ring quotient with the radius pinned, one unknown.
enum class SymmetryMode { none, ring, ring_fixed_eta };

inline std::string to_string(SymmetryMode m) {
    switch (m) {
        case SymmetryMode::none: return "none";
        case SymmetryMode::ring: return "ring";
        default: return "ring-fixed-eta";
    }
}

inline SymmetryMode symmetry_mode_from_string(const std::string& s) {
    if (s == "none") return SymmetryMode::none;
    if (s == "ring") return SymmetryMode::ring;
    if (s == "ring-fixed-eta") return SymmetryMode::ring_fixed_eta;
    throw std::invalid_argument("unknown symmetry mode: " + s);
}

struct SolveOptions {
    double tol = 1e-12;          // convergence gate on the full stacked gradient norm
    int max_iter = 50;
    double damping = 1.0;        // initial fraction of the Newton step
    SymmetryMode symmetry = SymmetryMode::none;
};

struct TraceRow {
    int iteration = 0;
    double residual = 0.0;    // full stacked norm before the iteration's step
    double step_scale = 0.0;  // accepted backtracking fraction of the Newton step
};

struct CriticalPointResult {
    Configuration configuration;
    double residual_norm = 0.0;  // recomputed on the returned configuration
    int iterations = 0;
    bool converged = false;
    std::vector<TraceRow> trace;
    std::vector<std::string> notes;
};

// lambda* for flat equally spaced bubbles on a circle of the given radius:
// the scale at which the curvature push C11 C lambda^ell balances the mutual
// attraction C12 sum_k |xi_l - xi_k|^{-(n-2)} lambda^{n-2} common to every
// ring site. Requires n - 2 > ell, otherwise no balance exists.
inline double balance_scale(int flat, const CurvatureModel& model, const ConstantTable& table, double radius = 1.0) {
    model.validate();
    if (flat < 2) throw std::invalid_argument("balance_scale: need at least two bubbles");
    if (!(radius > 0.0)) throw std::invalid_argument("balance_scale: radius must be positive");
    if (table.n != model.n) throw std::invalid_argument("balance_scale: table and model dimensions differ");
    if (static_cast<double>(table.ell) != model.ell)
        throw std::invalid_argument("balance_scale: table built for a different flatness order");
    const double m = model.n - 2.0;
    if (!(m > model.ell)) throw std::invalid_argument("balance_scale: need n - 2 > ell for a balance scale");
    // The amplitude is read at a representative ring point, projected onto H.
    vec p(static_cast<std::size_t>(model.n), 0.0);
    p[0] = radius;
    const double c = model.amplitude_at(project_to_H(p, model));
    double s = 0.0;
    for (int k = 1; k < flat; ++k) {
        const double chord = 2.0 * radius * std::sin(std::numbers::pi * k / flat);
        s += std::pow(chord, -m);
    }
    return std::pow(table.c11 * c / (table.c12 * s), 1.0 / (m - model.ell));
}

namespace detail {

// Variable layout shared by find_critical's modes: pack/unpack between the
// unknown vector and a configuration, the quotient residual for the Newton
// step, and the norm convergence is measured in. Free modes measure the full
// stacked gradient, so a quotient iteration cannot report convergence its
// symmetry class does not actually achieve; the fixed-offset ring measures
// the stacked norm of the constrained system (the radial directions are held
// by the constraint, not equilibrated).
struct SolverChart {
    std::size_t unknowns = 0;
    std::function<Eigen::VectorXd(const Configuration&)> pack;
    std::function<void(const Eigen::VectorXd&, Configuration&)> unpack;
    std::function<Eigen::VectorXd(const Configuration&)> residual;
    std::function<double(const Configuration&)> measure;
};

inline SolverChart make_chart(const Configuration& cfg0, const CurvatureModel& model, const ConstantTable& table,
                              SymmetryMode mode) {
    SolverChart chart;
    const std::size_t flat = cfg0.bubbles.size();
    const std::size_t n = static_cast<std::size_t>(cfg0.n);
    if (mode == SymmetryMode::none) {
        chart.unknowns = flat * (1 + n);
        chart.pack = [flat, n](const Configuration& cfg) {
            Eigen::VectorXd u(static_cast<Eigen::Index>(flat * (1 + n)));
            for (std::size_t l = 0; l < flat; ++l) {
                u[static_cast<Eigen::Index>(l)] = std::log(cfg.bubbles[l].lambda);
                for (std::size_t i = 0; i < n; ++i)
                    u[static_cast<Eigen::Index>(flat + l * n + i)] = cfg.bubbles[l].xi[i];
            }
            return u;
        };
        chart.unpack = [flat, n](const Eigen::VectorXd& u, Configuration& cfg) {
            for (std::size_t l = 0; l < flat; ++l) {
                cfg.bubbles[l].lambda = std::exp(u[static_cast<Eigen::Index>(l)]);
                for (std::size_t i = 0; i < n; ++i)
                    cfg.bubbles[l].xi[i] = u[static_cast<Eigen::Index>(flat + l * n + i)];
            }
        };
        chart.residual = [&model, &table](const Configuration& cfg) {
            const std::vector<double> stack = model_gradient_stack(cfg, model, table);
            return Eigen::Map<const Eigen::VectorXd>(stack.data(), static_cast<Eigen::Index>(stack.size())).eval();
        };
        chart.measure = [&model, &table](const Configuration& cfg) {
            const std::vector<double> stack = model_gradient_stack(cfg, model, table);
            double acc = 0.0;
            for (double v : stack) acc += v * v;
            return std::sqrt(acc);
        };
        return chart;
    }

    // Ring quotient: every bubble keeps its initial direction from the origin,
    // sharing one scale and one radius. The input must already be a ring.
    const double radius0 = norm(cfg0.bubbles.front().xi);
    if (!(radius0 > 0.0)) throw std::invalid_argument("find_critical: ring modes need centres away from the origin");
    std::vector<vec> directions;
    for (const auto& b : cfg0.bubbles) {
        const double r = norm(b.xi);
        if (std::abs(r - radius0) > 1e-9 * radius0)
            throw std::invalid_argument("find_critical: ring modes need a common centre radius");
        if (std::abs(b.lambda - cfg0.bubbles.front().lambda) > 1e-9 * cfg0.bubbles.front().lambda)
            throw std::invalid_argument("find_critical: ring modes need a common concentration scale");
        directions.push_back(scaled(b.xi, 1.0 / r));
    }
    const bool fixed_eta = mode == SymmetryMode::ring_fixed_eta;
    chart.unknowns = fixed_eta ? 1 : 2;
    chart.pack = [fixed_eta](const Configuration& cfg) {
        Eigen::VectorXd u(fixed_eta ? 1 : 2);
        u[0] = std::log(cfg.bubbles.front().lambda);
        if (!fixed_eta) u[1] = norm(cfg.bubbles.front().xi);
        return u;
    };
    chart.unpack = [flat, n, directions, fixed_eta, radius0](const Eigen::VectorXd& u, Configuration& cfg) {
        const double lambda = std::exp(u[0]);
        const double radius = fixed_eta ? radius0 : u[1];
        for (std::size_t l = 0; l < flat; ++l) {
            cfg.bubbles[l].lambda = lambda;
            for (std::size_t i = 0; i < n; ++i) cfg.bubbles[l].xi[i] = radius * directions[l][i];
        }
    };
    chart.residual = [&model, &table, directions, fixed_eta](const Configuration& cfg) {
        Eigen::VectorXd r(fixed_eta ? 1 : 2);
        r[0] = model_grad_lambda_G(cfg, model, table, 0);
        if (!fixed_eta) {
            const vec h = model_grad_xi_H(cfg, model, table, 0);
            r[1] = dot(h, directions.front());
        }
        return r;
    };
    if (fixed_eta) {
        chart.measure = [&model, &table, flat](const Configuration& cfg) {
            double acc = 0.0;
            for (std::size_t l = 0; l < flat; ++l) {
                const double g = model_grad_lambda_G(cfg, model, table, l);
                acc += g * g;
            }
            return std::sqrt(acc);
        };
    } else {
        chart.measure = [&model, &table](const Configuration& cfg) {
            const std::vector<double> stack = model_gradient_stack(cfg, model, table);
            double acc = 0.0;
            for (double v : stack) acc += v * v;
            return std::sqrt(acc);
        };
    }
    return chart;
}

}  // namespace detail

// Damped Newton iteration on the scaled gradient (G_1..G_flat, H_1..H_flat),
// optionally in a symmetry quotient. The Jacobian is formed by central
// differences; a singular or useless factorization falls back to Levenberg
// regularization before the solve admits failure. Iterates that leave the
// configuration box are projected back and noted.
inline CriticalPointResult find_critical(const Configuration& cfg0, const CurvatureModel& model,
                                         const ConstantTable& table, const SolveOptions& opts = {}) {
    detail::require_model_triple(cfg0, model, table);
    if (!(opts.tol > 0.0)) throw std::invalid_argument("find_critical: tolerance must be positive");
    if (opts.max_iter < 0) throw std::invalid_argument("find_critical: max_iter must be non-negative");
    if (!(opts.damping > 0.0 && opts.damping <= 1.0))
        throw std::invalid_argument("find_critical: damping must lie in (0, 1]");

    const detail::SolverChart chart = detail::make_chart(cfg0, model, table, opts.symmetry);
    CriticalPointResult result;
    result.configuration = cfg0;

    Configuration work = cfg0;
    if (opts.symmetry == SymmetryMode::ring_fixed_eta)
        result.notes.push_back("fixed-offset ring: residual covers the scale equations; radial balance is constrained away");
    const auto project_into_box = [&](Eigen::VectorXd& u) {
        bool clipped = false;
        chart.unpack(u, work);
        for (auto& b : work.bubbles)
            for (auto& c : b.xi) {
                if (c < work.box.lo) c = work.box.lo, clipped = true;
                if (c > work.box.hi) c = work.box.hi, clipped = true;
            }
        if (clipped) u = chart.pack(work);
        return clipped;
    };

    Eigen::VectorXd u = chart.pack(work);
    double norm_now = chart.measure(work);
    bool box_warned = false;
    int iter = 0;
    for (; iter < opts.max_iter && norm_now > opts.tol; ++iter) {
        const Eigen::VectorXd r = chart.residual(work);
        const Eigen::Index m = static_cast<Eigen::Index>(chart.unknowns);

        Eigen::MatrixXd jac(m, m);
        for (Eigen::Index j = 0; j < m; ++j) {
            const double step = 1e-6 * std::max(1.0, std::abs(u[j]));
            Eigen::VectorXd up = u, dn = u;
            up[j] += step;
            dn[j] -= step;
            chart.unpack(up, work);
            const Eigen::VectorXd rp = chart.residual(work);
            chart.unpack(dn, work);
            const Eigen::VectorXd rm = chart.residual(work);
            jac.col(j) = (rp - rm) / (2.0 * step);
        }
        chart.unpack(u, work);

        Eigen::VectorXd delta = Eigen::PartialPivLU<Eigen::MatrixXd>(jac).solve(-r);
        bool usable = delta.allFinite() && (jac * delta + r).norm() <= 1e-6 * r.norm() + 1e-300;
        if (!usable) {
            // Levenberg ladder: regularize the normal equations until the
            // step becomes finite and consistent.
            const double base = std::max(1e-300, jac.squaredNorm() / static_cast<double>(m));
            for (double mu : {1e-12, 1e-9, 1e-6, 1e-3}) {
                const Eigen::MatrixXd reg = jac.transpose() * jac + mu * base * Eigen::MatrixXd::Identity(m, m);
                delta = Eigen::LDLT<Eigen::MatrixXd>(reg).solve(-jac.transpose() * r);
                if (delta.allFinite() && delta.norm() > 0.0) {
                    usable = true;
                    result.notes.push_back("singular Jacobian at iteration " + std::to_string(iter) +
                                           "; Levenberg step with mu = " + std::to_string(mu));
                    break;
                }
            }
        }
        if (!usable) {
            result.notes.push_back("singular Jacobian at iteration " + std::to_string(iter) +
                                   "; no usable damped step, stopping");
            break;
        }

        double scale = opts.damping;
        double norm_next = 0.0;
        bool improved = false;
        Eigen::VectorXd u_next;
        for (int halving = 0; halving <= 30; ++halving) {
            u_next = u + scale * delta;
            if (project_into_box(u_next) && !box_warned) {
                result.notes.push_back("iterate left the configuration box and was projected back");
                box_warned = true;
            }
            chart.unpack(u_next, work);
            norm_next = chart.measure(work);
            if (norm_next < norm_now) {
                improved = true;
                break;
            }
            scale *= 0.5;
        }
        result.trace.push_back({iter, norm_now, improved ? scale : 0.0});
        if (!improved) {
            result.notes.push_back("backtracking found no descent after 30 halvings, stopping at the best iterate");
            break;
        }
        u = u_next;
        chart.unpack(u, work);
        norm_now = norm_next;
    }

    chart.unpack(u, work);
    result.configuration = work;
    result.residual_norm = chart.measure(result.configuration);
    result.iterations = iter;
    result.converged = result.residual_norm <= opts.tol;
    if (!result.converged && iter == opts.max_iter)
        result.notes.push_back("iteration budget exhausted before reaching tolerance");
    return result;
}

}  // namespace bubblab
