#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <numbers>

#include "bubblab/quadrature.hpp"
#include "oracles.hpp"

using namespace bubblab;

namespace {
QuadratureSpec tight() {
    QuadratureSpec s;
    s.rel_tol = 1e-11;
    return s;
}
}  // namespace

TEST_CASE("interval rule reproduces polynomial and trigonometric integrals") {
    QuadratureSpec s = tight();
    const auto cube = integrate_interval([](double x) { return x * x; }, 0.0, 1.0, s);
    CHECK(std::abs(cube.value - 1.0 / 3.0) < 1e-14);

    s.abs_tol = 1e-14;
    const auto full_period = integrate_interval([](double x) { return std::cos(x); }, 0.0, 2.0 * std::numbers::pi, s);
    CHECK(std::abs(full_period.value) < 1e-13);
}

TEST_CASE("radial profile mass matches the Beta closed form") {
    const QuadratureSpec s = tight();
    for (int n : {4, 6, 9}) {
        const auto got = integrate_radial([n](double r) { return std::pow(1.0 + r * r, -static_cast<double>(n)); }, n, s);
        const double want = oracles::profile_mass(n);
        CAPTURE(n);
        CHECK(std::abs(got.value - want) < 1e-10 * want);
        CHECK(got.evaluations > 0);
    }
    // n = 6 pins the explicit constant pi^3 / 60.
    const auto v6 = integrate_radial([](double r) { return std::pow(1.0 + r * r, -6.0); }, 6, s);
    CHECK(std::abs(v6.value - oracles::pi_cubed / 60.0) < 1e-10);
}

TEST_CASE("finite upper limit integrates a ball volume") {
    const QuadratureSpec s = tight();
    const auto got = integrate_radial([](double) { return 1.0; }, 6, s, 0.0, 1.0);
    CHECK(std::abs(got.value - oracles::pi_cubed / 6.0) < 1e-10);
}

TEST_CASE("radial integration is linear in the integrand") {
    const QuadratureSpec s = tight();
    const auto f = [](double r) { return std::pow(1.0 + r * r, -6.0); };
    const auto g = [](double r) { return std::exp(-r * r); };
    const auto fa = integrate_radial(f, 6, s).value;
    const auto ga = integrate_radial(g, 6, s).value;
    const auto combo = integrate_radial([&](double r) { return 2.5 * f(r) - 0.75 * g(r); }, 6, s).value;
    CHECK(std::abs(combo - (2.5 * fa - 0.75 * ga)) < 1e-9 * (std::abs(fa) + std::abs(ga)));
}

TEST_CASE("truncation error halves when the truncation radius doubles on a critical-decay tail") {
    const QuadratureSpec s = tight();
    const int n = 6;
    // g ~ r^{-(n+1)} at infinity, so the mass beyond R scales like 1/R.
    const auto g = [n](double r) { return std::pow(1.0 + r * r, -0.5 * (n + 1)); };
    const double full = integrate_radial(g, n, s).value;
    const double err_r = full - integrate_radial(g, n, s, 0.0, 100.0).value;
    const double err_2r = full - integrate_radial(g, n, s, 0.0, 200.0).value;
    CHECK(err_r > 0.0);
    CHECK(std::abs(err_2r / err_r - 0.5) < 0.01);
}

TEST_CASE("axisymmetric reduction agrees with the radial one on isotropic integrands") {
    QuadratureSpec s = tight();
    s.rel_tol = 1e-10;
    const auto got = integrate_axisym([](double r, double) { return std::pow(1.0 + r * r, -6.0); }, 6, s);
    CHECK(std::abs(got.value - oracles::pi_cubed / 60.0) < 1e-9);
}

TEST_CASE("axisymmetric reduction resolves axial moments") {
    QuadratureSpec s = tight();
    s.rel_tol = 1e-10;
    const auto got = integrate_axisym(
        [](double r, double theta) {
            const double yn = r * std::cos(theta);
            return yn * yn * std::pow(1.0 + r * r, -6.0);
        },
        6, s);
    const double want = oracles::axial_moment(2.0, 6.0, 6);
    CHECK(std::abs(got.value - want) < 1e-9 * want);
    CHECK(std::abs(want - oracles::pi_cubed / 240.0) < 1e-14);
}

TEST_CASE("non-integrable tails raise a diagnostic error with a partial value") {
    QuadratureSpec s;
    s.rel_tol = 1e-8;
    s.max_subdivisions = 200;
    bool threw = false;
    try {
        integrate_radial([](double r) { return 1.0 / (1.0 + r * r); }, 6, s);
    } catch (const quadrature_error& e) {
        threw = true;
        CHECK(std::string(e.what()).size() > 0);
    }
    CHECK(threw);
}

TEST_CASE("invalid specs are rejected") {
    QuadratureSpec s;
    s.mc_samples = 999;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    QuadratureSpec t;
    t.rel_tol = 0.0;
    t.abs_tol = 0.0;
    CHECK_THROWS_AS(t.validate(), std::invalid_argument);
    QuadratureSpec u;
    u.max_subdivisions = 0;
    CHECK_THROWS_AS(u.validate(), std::invalid_argument);
}

TEST_CASE("Monte Carlo integrates a Gaussian against a broad component") {
    QuadratureSpec s;
    s.mc_samples = 400000;
    s.seed = 20260818;
    ImportanceMixture mix;
    mix.dim = 6;
    mix.components.push_back({vec(6, 0.0), 2.0, 1.0});
    const auto got = integrate_mc([](const vec& y) { return std::exp(-norm_sq(y)); }, 6, s, mix);
    const double want = std::pow(std::numbers::pi, 3.0);
    CHECK(got.std_error > 0.0);
    CHECK(std::abs(got.value - want) < 4.0 * got.std_error);
}

TEST_CASE("Monte Carlo with a matched component has near-zero variance") {
    QuadratureSpec s;
    s.mc_samples = 100000;
    s.seed = 7;
    vec center(6, 0.0);
    center[0] = 1.5;
    const double scale = 0.05;
    const auto mix = ImportanceMixture::bubbles_with_broad({center}, {scale}, 0.1);
    const auto profile = [&](const vec& y) {
        const double d2 = dist_sq(y, center);
        return std::pow(scale / (scale * scale + d2), 6.0);
    };
    const auto got = integrate_mc(profile, 6, s, mix);
    const double want = oracles::profile_mass(6);
    CHECK(std::abs(got.value - want) < 4.0 * got.std_error + 1e-12);
    CHECK(got.std_error < 0.01 * want);
}

TEST_CASE("Monte Carlo results are bit-identical for equal seeds and differ across seeds") {
    QuadratureSpec s;
    s.mc_samples = 50000;
    s.seed = 42;
    ImportanceMixture mix;
    mix.dim = 3;
    mix.components.push_back({vec(3, 0.0), 1.0, 1.0});
    const auto f = [](const vec& y) { return std::exp(-norm_sq(y)); };
    const auto a = integrate_mc(f, 3, s, mix);
    const auto b = integrate_mc(f, 3, s, mix);
    CHECK(a.value == b.value);
    CHECK(a.std_error == b.std_error);
    s.seed = 43;
    const auto c = integrate_mc(f, 3, s, mix);
    CHECK(a.value != c.value);
}

TEST_CASE("Monte Carlo reduction order is independent of the thread budget") {
    QuadratureSpec s;
    s.mc_samples = 200000;  // spans several batches
    s.seed = 99;
    ImportanceMixture mix;
    mix.dim = 4;
    mix.components.push_back({vec(4, 0.0), 1.0, 1.0});
    const auto f = [](const vec& y) { return 1.0 / (1.0 + norm_sq(y)); };
    ::setenv("BRL_THREADS", "1", 1);
    const auto serial = integrate_mc(f, 4, s, mix);
    ::setenv("BRL_THREADS", "3", 1);
    const auto threaded = integrate_mc(f, 4, s, mix);
    ::unsetenv("BRL_THREADS");
    CHECK(serial.value == threaded.value);
    CHECK(serial.std_error == threaded.std_error);
}

TEST_CASE("degenerate mixtures surface as errors") {
    QuadratureSpec s;
    s.mc_samples = 1000;
    s.seed = 1;
    ImportanceMixture mix;
    mix.dim = 6;
    // A scale this large overflows s^2 + d^2 and collapses the density to zero.
    mix.components.push_back({vec(6, 0.0), 1e200, 1.0});
    CHECK_THROWS_AS(integrate_mc([](const vec&) { return 1.0; }, 6, s, mix), quadrature_error);

    ImportanceMixture bad_weights;
    bad_weights.dim = 2;
    bad_weights.components.push_back({vec(2, 0.0), 1.0, 0.5});
    CHECK_THROWS_AS(bad_weights.validate(), std::invalid_argument);
}
