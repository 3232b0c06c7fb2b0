#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>

#include "bubblab/config.hpp"

using namespace bubblab;

namespace {
CurvatureModel sphere_model(int n = 6, double ell = 2.0) {
    CurvatureModel m;
    m.kind = CurvatureKind::sphere;
    m.n = n;
    m.ell = ell;
    return m;
}
}  // namespace

TEST_CASE("hyperplane projection and distance pick out the last coordinate") {
    CurvatureModel m;  // hyperplane by default
    vec y = {0.3, -1.2, 0.0, 2.0, 1.0, -0.4};
    CHECK(dist_to_H(y, m) == 0.4);
    const vec p = project_to_H(y, m);
    CHECK(p[5] == 0.0);
    for (std::size_t i = 0; i + 1 < y.size(); ++i) CHECK(p[i] == y[i]);
}

TEST_CASE("sphere projection normalises and the origin is rejected") {
    const CurvatureModel m = sphere_model();
    vec y = {3.0, 0.0, 0.0, 0.0, 0.0, 4.0};  // norm 5
    CHECK(dist_to_H(y, m) == 4.0);
    const vec p = project_to_H(y, m);
    CHECK(std::abs(norm(p) - 1.0) < 1e-15);
    CHECK(p[0] == Catch::Approx(0.6));

    const vec origin(6, 0.0);
    CHECK_THROWS_AS(project_to_H(origin, m), std::domain_error);
    CHECK_THROWS_AS(offset_frame(origin, m), std::domain_error);
}

TEST_CASE("offset frame is zero on H and a unit outward direction off it") {
    const CurvatureModel m = sphere_model();
    vec on = {1.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    const OffsetFrame f0 = offset_frame(on, m);
    CHECK(f0.eta == 0.0);
    CHECK(norm(f0.normal) == 0.0);

    vec outside = scaled(on, 1.25);
    const OffsetFrame fo = offset_frame(outside, m);
    CHECK(fo.eta == Catch::Approx(0.25));
    CHECK(fo.normal[0] == Catch::Approx(1.0));

    vec inside = scaled(on, 0.75);
    const OffsetFrame fi = offset_frame(inside, m);
    CHECK(fi.eta == Catch::Approx(0.25));
    CHECK(fi.normal[0] == Catch::Approx(-1.0));  // offset grows toward the centre
}

TEST_CASE("curvature evaluation matches the flatness expansion by hand") {
    CurvatureModel m = sphere_model();
    m.amplitude = 2.5;
    vec y = {1.1, 0.0, 0.0, 0.0, 0.0, 0.0};
    // n(n-2) - C eta^2 with n = 6, eta = 0.1.
    CHECK(curvature_eval(y, m) == Catch::Approx(24.0 - 2.5 * 0.01).epsilon(1e-14));

    // Outside the tube only the clamped extension answers, and it freezes the
    // offset at the tube radius.
    vec far = {3.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    CHECK_THROWS_AS(curvature_eval(far, m), std::domain_error);
    CHECK(curvature_eval_clamped(far, m) == Catch::Approx(24.0 - 2.5 * 0.25).epsilon(1e-14));

    // Positional amplitude must stay positive where it is sampled.
    m.amplitude_fn = [](const vec&) { return -1.0; };
    CHECK_THROWS_AS(curvature_eval(y, m), std::domain_error);
}

TEST_CASE("model validation rejects out-of-range parameters") {
    CurvatureModel m = sphere_model();
    CHECK_NOTHROW(m.validate());
    m.ell = 1.5;
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);
    m.ell = 2.5;
    m.integer_ell_only = true;
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);
    m = sphere_model();
    m.amplitude = 0.0;
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);
    m = sphere_model();
    m.tube_radius = 0.0;
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);
    m = sphere_model();
    m.remainder = [](double) { return 0.0; };  // remainder declared without a bound
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);
}

TEST_CASE("quasi-hyperbolic distance divides by the geometric mean scale") {
    BubbleParams a{1e-2, {0, 0, 0, 0, 0, 0}};
    BubbleParams b{4e-2, {3, 0, 0, 0, 0, 0}};
    CHECK(qh_distance(a, b) == Catch::Approx(3.0 / 0.02).epsilon(1e-14));
    b.xi = a.xi;
    CHECK_THROWS_AS(qh_distance(a, b), std::invalid_argument);
}

TEST_CASE("circle generator spaces bubbles equally at radius 1 + eta") {
    const Configuration cfg = gen_circle_configuration(5, 1e-2, 0.03, 11);
    REQUIRE(cfg.flat() == 5);
    REQUIRE(cfg.model.has_value());
    const double chord = 2.0 * 1.03 * std::sin(std::numbers::pi / 5.0);
    for (int l = 0; l < 5; ++l) {
        CHECK(norm(cfg.bubbles[l].xi) == Catch::Approx(1.03).epsilon(1e-14));
        CHECK(cfg.bubbles[l].lambda == 1e-2);
        const int next = (l + 1) % 5;
        CHECK(dist(cfg.bubbles[l].xi, cfg.bubbles[next].xi) == Catch::Approx(chord).epsilon(1e-12));
    }
}

TEST_CASE("random generator is deterministic in the seed and separated") {
    const Box box{-5.0, 5.0};
    const Configuration a = gen_random_separated(4, 1e-3, 0.75, box, 99);
    const Configuration b = gen_random_separated(4, 1e-3, 0.75, box, 99);
    REQUIRE(a.flat() == b.flat());
    for (int l = 0; l < a.flat(); ++l) {
        CHECK(a.bubbles[l].lambda == b.bubbles[l].lambda);
        CHECK(a.bubbles[l].xi == b.bubbles[l].xi);
    }
    const ValidationReport r = validate_configuration(a);
    CHECK(r.pass);
}

TEST_CASE("validation separates structural errors from admissibility checks") {
    Configuration cfg = gen_circle_configuration(3, 1e-2, 0.0, 0);

    // Structural defects throw.
    Configuration broken = cfg;
    broken.bubbles[1].lambda = -1.0;
    CHECK_THROWS_AS(validate_configuration(broken), std::invalid_argument);
    broken = cfg;
    broken.bubbles[1].xi = broken.bubbles[0].xi;
    CHECK_THROWS_AS(validate_configuration(broken), std::invalid_argument);
    broken = cfg;
    broken.bubbles[1].xi.pop_back();
    CHECK_THROWS_AS(validate_configuration(broken), std::invalid_argument);

    // Matters of degree land in the report.
    Configuration off = cfg;
    off.bubbles[0].xi[0] = off.box.hi + 1.0;
    const ValidationReport r = validate_configuration(off);
    CHECK_FALSE(r.pass);
    bool found = false;
    for (const auto& c : r.checks)
        if (c.name == "centres inside box") {
            found = true;
            CHECK_FALSE(c.pass);
            CHECK(c.measured == Catch::Approx(1.0));
        }
    CHECK(found);
}

TEST_CASE("scale uniformity and separation budgets gate the report") {
    Configuration cfg = gen_circle_configuration(2, 1e-2, 0.0, 0);
    cfg.bubbles[0].lambda = 1e-2 * 200.0;  // each bubble sits sqrt(200) > 10 from the geometric mean
    const ValidationReport r = validate_configuration(cfg);
    bool uniform_pass = true;
    for (const auto& c : r.checks)
        if (c.name == "scale uniformity") uniform_pass = c.pass;
    CHECK_FALSE(uniform_pass);

    // Large common scale: separation sum 1/d_qh exceeds lambda_bar^gamma.
    Configuration tight = gen_circle_configuration(2, 0.5, 0.0, 0);
    const ValidationReport rt = validate_configuration(tight);
    CHECK_FALSE(rt.pass);
}

TEST_CASE("configurations survive a JSON round trip bit for bit") {
    Configuration cfg = gen_circle_configuration(3, 1.2345e-3, 0.017, 5);
    cfg.model->amplitude = 1.75;
    cfg.regime.gamma = 0.8;

    const nlohmann::ordered_json j = to_json(cfg);
    const Configuration back = configuration_from_json(j);
    CHECK(back.n == cfg.n);
    REQUIRE(back.flat() == cfg.flat());
    for (int l = 0; l < cfg.flat(); ++l) {
        CHECK(back.bubbles[l].lambda == cfg.bubbles[l].lambda);
        CHECK(back.bubbles[l].xi == cfg.bubbles[l].xi);
    }
    CHECK(back.box.lo == cfg.box.lo);
    CHECK(back.box.hi == cfg.box.hi);
    CHECK(back.regime.gamma == cfg.regime.gamma);
    REQUIRE(back.model.has_value());
    CHECK(back.model->kind == cfg.model->kind);
    CHECK(back.model->amplitude == cfg.model->amplitude);
    CHECK(back.model->ell == cfg.regime.ell);

    // Unknown keys are tolerated; missing required keys are not.
    nlohmann::json extended = j;
    extended["solve"] = {{"converged", true}};
    CHECK_NOTHROW(configuration_from_json(extended));
    nlohmann::json truncated = j;
    truncated.erase("lambdas");
    CHECK_THROWS_AS(configuration_from_json(truncated), std::invalid_argument);
}

TEST_CASE("file round trip preserves a configuration") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "bubblab_test_config";
    fs::create_directories(dir);
    const std::string path = (dir / "cfg.json").string();

    const Configuration cfg = gen_circle_configuration(4, 7.5e-3, 0.0, 2);
    save_configuration(cfg, path);
    const Configuration back = load_configuration(path);
    CHECK(back.flat() == 4);
    for (int l = 0; l < 4; ++l) CHECK(back.bubbles[l].lambda == cfg.bubbles[l].lambda);

    CHECK_THROWS_AS(load_configuration((dir / "missing.json").string()), std::runtime_error);
    fs::remove_all(dir);
}
