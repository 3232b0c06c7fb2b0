// End-to-end gate for the laboratory: one criterion per numerically checkable
// claim of the reduced-functional machinery, one PASS/FAIL line each, nonzero
// exit if anything fails. Every criterion pairs a library computation with an
// oracle that does not share its code path: Gamma closed forms, independent
// finite differences, a brute-force grid scan, or seeded Monte Carlo.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "bubblab/bubbles.hpp"
#include "bubblab/constants.hpp"
#include "bubblab/functionals.hpp"
#include "bubblab/reduced.hpp"
#include "bubblab/rng.hpp"
#include "bubblab/solver.hpp"
#include "oracles.hpp"

using namespace bubblab;

namespace {

const QuadratureSpec spec{};
int failures = 0;

std::string str(const char* format, ...) {
    char buf[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof(buf), format, args);
    va_end(args);
    return buf;
}

template <typename Body>
void criterion(int index, const char* name, Body&& body) {
    const auto start = std::chrono::steady_clock::now();
    bool pass = false;
    std::string detail;
    try {
        pass = body(detail);
    } catch (const std::exception& e) {
        pass = false;
        detail = str("exception: %s", e.what());
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %2d %-44s %s [%.1fs]\n", pass ? "PASS" : "FAIL", index, name, detail.c_str(), seconds);
    std::fflush(stdout);
    if (!pass) ++failures;
}

// Least-squares slope of log|r| against log h.
double loglog_slope(const std::vector<double>& h, const std::vector<double>& r) {
    double mx = 0.0, my = 0.0;
    const auto count = static_cast<double>(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) {
        mx += std::log(h[i]);
        my += std::log(std::abs(r[i]));
    }
    mx /= count;
    my /= count;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        const double dx = std::log(h[i]) - mx;
        sxy += dx * (std::log(std::abs(r[i])) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

// Random admissible cluster in the distribution the gradient probe is
// specified over: rings of 2..6 bubbles, ell in {2, 3}, scales across a
// decade, small offsets, both model kinds, amplitudes away from 1.
Configuration random_probe_config(std::mt19937_64& eng, int trial, double& ell_out) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int flat = 2 + static_cast<int>(u(eng) * 5.0);
    const double ell = (trial % 2 == 0) ? 2.0 : 3.0;
    const double lambda = 2e-3 + 3e-2 * u(eng);
    const double eta = 2e-3 * u(eng);
    AsymptoticRegime regime;
    regime.ell = ell;
    Configuration cfg = gen_circle_configuration(flat, lambda, eta, 0, 6, regime);
    cfg.model->amplitude = 0.3 + 2.0 * u(eng);
    if (trial % 3 == 2) {
        cfg.model->kind = CurvatureKind::hyperplane;
        for (auto& b : cfg.bubbles) b.xi[5] = eta * u(eng);
    }
    ell_out = ell;
    return cfg;
}

// Deterministic probe set for the sup of a rescaled plantation: the centres
// themselves, coordinate offsets at several radii, adjacent midpoints, the
// arc through the centres, and the origin.
double plantation_grid_sup(const Configuration& cfg) {
    double sup = 0.0;
    const auto consider = [&](const vec& y) { sup = std::max(sup, plantation_eval(cfg, y)); };
    const std::size_t flat = cfg.bubbles.size();
    const std::size_t n = static_cast<std::size_t>(cfg.n);
    for (std::size_t l = 0; l < flat; ++l) {
        const vec& c = cfg.bubbles[l].xi;
        consider(c);
        for (double r : {0.3, 1.0, 3.0, 10.0})
            for (std::size_t i = 0; i < n; ++i) {
                consider(add(c, axis_vector(n, i, r)));
                consider(add(c, axis_vector(n, i, -r)));
            }
        if (flat > 1) consider(scaled(add(c, cfg.bubbles[(l + 1) % flat].xi), 0.5));
    }
    const double ring_radius = norm(cfg.bubbles.front().xi);
    for (std::size_t s = 0; s < 8 * flat; ++s) {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(s) / static_cast<double>(8 * flat);
        vec y(n, 0.0);
        y[0] = ring_radius * std::cos(angle);
        y[1] = ring_radius * std::sin(angle);
        consider(y);
    }
    consider(vec(n, 0.0));
    return sup;
}

}  // namespace

int main() {
    criterion(1, "constant identity web, 6 <= n <= 10", [](std::string& d) {
        double web = 0.0;        // quadrature-backed relations, gate 1e-8
        double degenerate = 0.0; // |c13| at ell = 2, gate 1e-10
        double closed = 0.0;     // closed-form pair, gate 1e-14
        for (int n = 6; n <= 10; ++n)
            for (int ell = 2; ell <= n - 3; ++ell) {
                const ConstantTable t = make_constant_table(n, static_cast<double>(ell), spec);
                web = std::max(web, std::abs(t.c11 - ell * t.c01) / t.c01);
                web = std::max(web, std::abs(t.c23 - 2.0 * t.c03) / t.c03);
                web = std::max(web, std::abs(t.c13 - (ell - 2.0) * t.c03) / t.c03);
                if (ell == 2) degenerate = std::max(degenerate, std::abs(t.c13));
                closed = std::max(closed, std::abs(t.c12 - (n - 2.0) * t.c02) / t.c02);
                closed = std::max(closed, std::abs(t.c22 - 2.0 * (n - 2.0) * t.c02) / t.c02);
                if (!check_identities(t).pass) web = std::max(web, 1.0);
            }
        d = str("web dev %.1e (tol 1e-8), c13@ell=2 %.1e (tol 1e-10), closed pair %.1e (tol 1e-14)", web,
                degenerate, closed);
        return web <= 1e-8 && degenerate <= 1e-10 && closed <= 1e-14;
    });

    criterion(2, "profile mass and sphere area anchors", [](std::string& d) {
        // Quadrature values against the Gamma oracle, at n = 6 where both
        // collapse to rational multiples of pi^3.
        const double mass_quad =
            integrate_radial([](double r) { return std::pow(1.0 + r * r, -6.0); }, 6, spec).value;
        const double mass_dev = std::abs(mass_quad - oracles::pi_cubed / 60.0) / (oracles::pi_cubed / 60.0);

        double area_quad = 2.0 * std::numbers::pi;
        for (int k = 1; k <= 4; ++k)
            area_quad *=
                integrate_interval([k](double phi) { return std::pow(std::sin(phi), static_cast<double>(k)); }, 0.0,
                                   std::numbers::pi, spec)
                    .value;
        const double area_dev = std::abs(area_quad - oracles::pi_cubed) / oracles::pi_cubed;

        const ConstantTable t = make_constant_table(6, 2.0, spec);
        const double table_dev = std::max(std::abs(t.v_n - oracles::pi_cubed / 60.0) / (oracles::pi_cubed / 60.0),
                                          std::abs(t.omega_n - oracles::pi_cubed) / oracles::pi_cubed);

        d = str("V(6) dev %.1e, omega_6 dev %.1e, table dev %.1e (tol 1e-10)", mass_dev, area_dev, table_dev);
        return mass_dev <= 1e-10 && area_dev <= 1e-10 && table_dev <= 1e-10;
    });

    criterion(3, "bubble equation finite-difference order", [](std::string& d) {
        auto eng = make_engine(2026, 3);
        std::uniform_real_distribution<double> u(-2.0, 2.0);
        const std::vector<double> hs = {1e-2, 1e-3, 1e-4};
        const std::vector<long double> xi(6, 0.0L);
        std::vector<std::vector<long double>> points(100, std::vector<long double>(6));
        for (auto& y : points)
            for (auto& c : y) c = static_cast<long double>(u(eng));
        // Residual norm over the sample per step size: the aggregate slope is
        // what measures the discretisation order, because isolated points
        // where the leading h^2 coefficient happens to be small see the h^4
        // correction instead.
        std::vector<double> rms;
        for (double h : hs) {
            long double acc = 0.0L;
            for (const auto& y : points) {
                const long double r = pde_residual_fd<long double>(1.0L, xi, y, static_cast<long double>(h));
                acc += r * r;
            }
            rms.push_back(std::sqrt(static_cast<double>(acc) / static_cast<double>(points.size())));
        }
        const double slope = loglog_slope(hs, rms);
        d = str("rms residual slope %.4f over 100 points (gate 2.0 +- 0.1), rms at h=1e-2: %.2e", slope, rms[0]);
        return std::abs(slope - 2.0) <= 0.1;
    });

    criterion(4, "pair interaction asymptotics", [](std::string& d) {
        const double lambda = 1e-2;
        const double pred_front = (unit_sphere_measure(6) / 6.0) * std::pow(lambda * lambda, 2.0);
        double ratio_dev = 0.0;
        for (double de : {10.0, 20.0, 30.0}) {  // scale-free separations 1e3 .. 3e3
            BubbleParams a{lambda, vec(6, 0.0)};
            BubbleParams b{lambda, vec(6, 0.0)};
            b.xi[0] = de;
            const double value = interaction_integral(a, b, 6, spec).value;
            ratio_dev = std::max(ratio_dev, std::abs(value / (pred_front * std::pow(de, -4.0)) - 1.0));
        }
        const ExpansionFit fit =
            fit_expansion(ExpansionFamily::interaction_vs_distance, {100.0, 300.0, 1000.0, 3000.0}, spec);
        d = str("ratio dev %.2e (tol 5e-3), exponent %.4f (gate -4 +- 0.02)", ratio_dev, fit.fitted_exponent);
        return ratio_dev <= 5e-3 && std::abs(fit.fitted_exponent + 4.0) <= 0.02 && fit.passes;
    });

    criterion(5, "curvature well asymptotics", [](std::string& d) {
        double exp_dev = 0.0, coeff_dev = 0.0;
        bool all_pass = true;
        for (int ell : {2, 3}) {
            ExpansionParams p;
            p.ell = ell;
            const ExpansionFit fit =
                fit_expansion(ExpansionFamily::curvature_vs_lambda, {3e-4, 6e-4, 1.5e-3, 3e-3}, spec, p);
            exp_dev = std::max(exp_dev, std::abs(fit.fitted_exponent - ell));
            coeff_dev = std::max(coeff_dev, std::abs(fit.fitted_coefficient / fit.predicted_coefficient - 1.0));
            all_pass = all_pass && fit.passes;
        }
        ExpansionParams p;
        p.ell = 3;
        p.lambda = 1e-3;
        p.coefficient_tol = 0.02;
        const ExpansionFit eta_fit = fit_expansion(
            ExpansionFamily::curvature_vs_eta,
            {p.lambda / 40.0, p.lambda / 20.0, p.lambda / 10.0, p.lambda / 4.0}, spec, p);
        const double eta_dev = std::abs(eta_fit.fitted_coefficient / eta_fit.predicted_coefficient - 1.0);
        d = str("exponent dev %.2e (tol 0.02), coeff dev %.2e (tol 0.01), eta^2 coeff dev %.2e (tol 0.02)",
                exp_dev, coeff_dev, eta_dev);
        return all_pass && exp_dev <= 0.02 && coeff_dev <= 0.01 && eta_fit.passes && eta_dev <= 0.02;
    });

    criterion(6, "closed-form gradient vs finite differences", [](std::string& d) {
        const ConstantTable t2 = make_constant_table(6, 2.0, spec);
        const ConstantTable t3 = make_constant_table(6, 3.0, spec);
        auto eng = make_engine(777, 0);
        double worst = 0.0;
        bool all_pass = true;
        for (int trial = 0; trial < 20; ++trial) {
            double ell = 0.0;
            const Configuration cfg = random_probe_config(eng, trial, ell);
            const GradientConsistencyReport r =
                verify_gradient_consistency(cfg, *cfg.model, ell == 2.0 ? t2 : t3);
            worst = std::max(worst, r.max_deviation);
            all_pass = all_pass && r.pass;
        }
        d = str("worst relative deviation %.2e over 20 clusters (tol 1e-6)", worst);
        return all_pass && worst <= 1e-6;
    });

    criterion(7, "odd moment cancellation", [](std::string& d) {
        const auto profile = [](double r) { return std::pow(1.0 + r * r, -6.0); };
        const double mass = integrate_radial(profile, 6, spec).value;
        double worst = 0.0;
        for (const std::vector<int>& alpha :
             {std::vector<int>{1, 0, 0, 0, 0, 0}, std::vector<int>{0, 0, 3, 0, 0, 0},
              std::vector<int>{1, 2, 0, 0, 0, 0}, std::vector<int>{1, 1, 1, 0, 0, 2},
              std::vector<int>{3, 0, 1, 0, 2, 0}, std::vector<int>{0, 5, 0, 0, 0, 0},
              std::vector<int>{1, 1, 1, 1, 1, 1}})
            worst = std::max(worst, std::abs(odd_moment_integral(alpha, profile, 10.0, 6, spec)));
        d = str("worst |moment| %.2e against mass %.4f (tol 1e-12 * mass)", worst, mass);
        return worst <= 1e-12 * mass;
    });

    criterion(8, "ring critical points vs oracles", [](std::string& d) {
        const ConstantTable table = make_constant_table(6, 2.0, spec);
        const Configuration cfg0 = gen_circle_configuration(2, 0.1, 0.0, 0);

        SolveOptions fixed;
        fixed.symmetry = SymmetryMode::ring_fixed_eta;
        const CriticalPointResult pair = find_critical(cfg0, *cfg0.model, table, fixed);
        const double closed_dev = std::abs(pair.configuration.bubbles[0].lambda - 1.0 / std::sqrt(180.0));
        const bool pair_ok = pair.converged && closed_dev <= 1e-8;

        // Free-radius root against a brute-force residual scan on the
        // 200 x 200 grid covering it.
        SolveOptions ring;
        ring.symmetry = SymmetryMode::ring;
        const CriticalPointResult free_root = find_critical(cfg0, *cfg0.model, table, ring);
        const double ls = free_root.configuration.bubbles[0].lambda;
        const double rs = norm(free_root.configuration.bubbles[0].xi);
        const double dl = 1.5e-4, dr = 1e-4;
        double best = 1e300, lg = 0.0, rg = 0.0;
        for (int i = 0; i < 200; ++i)
            for (int j = 0; j < 200; ++j) {
                const double lam = 0.06 + (i + 0.5) * dl;
                const double rho = 0.99 + (j + 0.5) * dr;
                const Configuration cell = gen_circle_configuration(2, lam, rho - 1.0, 0);
                const double g = model_grad_lambda_G(cell, *cell.model, table, 0);
                const vec h = model_grad_xi_H(cell, *cell.model, table, 0);
                const double hr = dot(h, scaled(cell.bubbles[0].xi, 1.0 / rho));
                const double r2 = g * g + hr * hr;
                if (r2 < best) best = r2, lg = lam, rg = rho;
            }
        const bool grid_ok =
            free_root.converged && std::abs(ls - lg) <= dl && std::abs(rs - rg) <= dr;

        // Larger rings: tight residuals and strictly shrinking balance scale.
        bool ladder_ok = true;
        double prev = pair.configuration.bubbles[0].lambda;
        for (int flat = 3; flat <= 6; ++flat) {
            const Configuration start = gen_circle_configuration(flat, 0.1, 0.0, 0);
            const CriticalPointResult r = find_critical(start, *start.model, table, fixed);
            const double lam = r.configuration.bubbles[0].lambda;
            ladder_ok = ladder_ok && r.converged && r.residual_norm <= 1e-10 && lam < prev &&
                        std::abs(lam - balance_scale(flat, *start.model, table)) <= 1e-8;
            prev = lam;
        }
        d = str("pair dev %.1e (tol 1e-8); scan cell (%.6f, %.6f) vs root (%.6f, %.6f); ladder %s", closed_dev,
                lg, rg, ls, rs, ladder_ok ? "monotone" : "broken");
        return pair_ok && grid_ok && ladder_ok;
    });

    criterion(9, "uniform plantation sup across cluster sizes", [](std::string& d) {
        const AsymptoticRegime regime{};
        double sup_min = 1e300, sup_max = 0.0;
        bool admissible = true;
        for (int flat : {2, 4, 8, 16, 32, 64}) {
            double inv_chord_sum = 0.0;
            for (int k = 1; k < flat; ++k)
                inv_chord_sum += 1.0 / (2.0 * std::sin(std::numbers::pi * k / flat));
            const double lam = 0.5 * std::min(std::pow(static_cast<double>(flat), -1.0 / regime.sigma),
                                              std::pow(inv_chord_sum, -1.0 / (1.0 - regime.gamma)));
            const Configuration cfg = gen_circle_configuration(flat, lam, 0.0, 0);
            admissible = admissible && validate_configuration(cfg).pass;
            const double sup = plantation_grid_sup(rescale_configuration(cfg));
            sup_min = std::min(sup_min, sup);
            sup_max = std::max(sup_max, sup);
        }
        d = str("sups in [%.6f, %.6f], ratio %.4f (gate 3), admissible %s", sup_min, sup_max, sup_max / sup_min,
                admissible ? "yes" : "no");
        return admissible && sup_max / sup_min <= 3.0;
    });

    criterion(10, "tail lemma ratio suites", [](std::string& d) {
        const std::size_t samples = 10000;
        bool ok = true;
        double largest = 0.0;
        const auto run = [&](LemmaKind kind, const LemmaParams& p) {
            const LemmaReport r = lemma_suite(kind, p, samples, 5, spec);
            ok = ok && r.finite && r.non_increasing && r.rows.size() == 3;
            largest = std::max(largest, r.fitted_constant);
        };
        for (auto [sigma, alpha, beta] : {std::array<double, 3>{2.0, 2.0, 2.0},
                                          std::array<double, 3>{1.5, 2.0, 3.0},
                                          std::array<double, 3>{1.0, 1.0, 2.0}}) {
            LemmaParams p;
            p.sigma = sigma, p.alpha = alpha, p.beta = beta;
            run(LemmaKind::separation, p);
        }
        for (double varsigma : {3.0, 4.0, 5.0}) {
            LemmaParams p;
            p.varsigma = varsigma;
            run(LemmaKind::condensation, p);
        }
        for (auto [flat, kappa, theta] : {std::array<double, 3>{2, 1.0, 0.1},
                                          std::array<double, 3>{3, 0.8, 0.3},
                                          std::array<double, 3>{4, 1.2, 0.2}}) {
            LemmaParams p;
            p.flat = static_cast<int>(flat), p.kappa = kappa, p.theta = theta;
            run(LemmaKind::downgrade, p);
        }
        d = str("9 suites finite and non-increasing, largest sup ratio %.3f", largest);
        return ok;
    });

    criterion(11, "single-bubble energy oracle", [](std::string& d) {
        Configuration cfg = gen_circle_configuration(1, 0.05, 0.0, 0);
        cfg.model.reset();  // flat curvature: the energy collapses to (n-2) V(n)
        QuadratureSpec mc;
        mc.seed = 20260818;
        mc.mc_samples = 1000000;
        const IntegralReport r = energy(cfg, mc);
        const double target = 4.0 * oracles::pi_cubed / 60.0;
        const double sigma_gap = std::abs(r.value - target) / r.error_estimate;
        d = str("%.5f +- %.5f vs %.5f (gap %.2f sigma, stderr %.2f%% of target)", r.value, r.error_estimate,
                target, sigma_gap, 100.0 * r.error_estimate / target);
        return sigma_gap <= 3.0 && r.error_estimate <= 0.01 * target;
    });

    if (failures == 0) std::printf("all acceptance criteria passed\n");
    else std::printf("%d acceptance criteria FAILED\n", failures);
    return failures == 0 ? 0 : 1;
}
