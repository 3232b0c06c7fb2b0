#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bubblab/geometry.hpp"
#include "bubblab/rng.hpp"

namespace bubblab {

// Conformal normalisation constant (n-2)/(4(n-1)) relating a scalar curvature
// function to the nonlinearity coefficient used throughout.
inline double conformal_constant(int n) {
    if (n < 3) throw std::invalid_argument("conformal_constant: n must be >= 3");
    return (n - 2.0) / (4.0 * (n - 1.0));
}

struct BubbleParams {
    double lambda = 1.0;  // concentration scale, > 0
    vec xi;               // centre in R^n
};

// Axis-aligned cube [lo, hi]^n shared by every coordinate.
struct Box {
    double lo = -10.0;
    double hi = 10.0;

    bool contains(const vec& y) const {
        for (double c : y)
            if (c < lo || c > hi) return false;
        return true;
    }
};

// Exponent bookkeeping for the asymptotic regime. The inequalities encode the
// hierarchy separation > concentration spread > 1/2 that the admissibility
// checks are phrased in; tau_gt1 is the decay offset used by weighted norms.
struct AsymptoticRegime {
    double gamma = 0.75;
    double nu = 0.6;
    double kappa = 0.5;
    double sigma = 0.5;
    double tau_gt1 = 1.25;
    double ell = 2.0;

    void validate(int n) const {
        if (!(gamma < 1.0 && gamma > nu && nu > 0.5)) throw std::invalid_argument("AsymptoticRegime: need 1 > gamma > nu > 1/2");
        if (!(gamma + nu > 1.0)) throw std::invalid_argument("AsymptoticRegime: need gamma + nu > 1");
        if (!(kappa > 0.0 && kappa < 1.0)) throw std::invalid_argument("AsymptoticRegime: need kappa in (0,1)");
        if (!(sigma > 0.0)) throw std::invalid_argument("AsymptoticRegime: need sigma > 0");
        if (!(tau_gt1 > 1.0)) throw std::invalid_argument("AsymptoticRegime: need tau_gt1 > 1");
        if (!(ell >= 2.0 && ell < n - 2.0)) throw std::invalid_argument("AsymptoticRegime: need ell in [2, n-2)");
    }
};

enum class CurvatureKind { hyperplane, sphere };

inline std::string to_string(CurvatureKind k) { return k == CurvatureKind::hyperplane ? "hyperplane" : "sphere"; }

inline CurvatureKind curvature_kind_from_string(const std::string& s) {
    if (s == "hyperplane") return CurvatureKind::hyperplane;
    if (s == "sphere") return CurvatureKind::sphere;
    throw std::invalid_argument("unknown curvature kind '" + s + "' (expected hyperplane or sphere)");
}

// Local model of the curvature data near its critical manifold H: the scaled
// curvature equals n(n-2) - C(p) * dist(y, H)^ell + remainder, prescribed only
// inside a tube of the given radius around H. H is either the hyperplane
// {y_n = 0} or the unit sphere {|y| = 1}.
struct CurvatureModel {
    CurvatureKind kind = CurvatureKind::hyperplane;
    int n = 6;
    double ell = 2.0;
    double amplitude = 1.0;                           // constant C > 0
    std::function<double(const vec&)> amplitude_fn;   // optional positional C(p); empty means constant
    std::function<double(double)> remainder;          // optional; |remainder(eta)| <= remainder_bound * eta^{ell+1}
    double remainder_bound = 0.0;
    double tube_radius = 0.5;
    bool integer_ell_only = false;

    void validate() const {
        if (n < 3) throw std::invalid_argument("CurvatureModel: n must be >= 3");
        if (!(ell >= 2.0)) throw std::invalid_argument("CurvatureModel: ell must be >= 2");
        if (integer_ell_only && ell != std::floor(ell)) throw std::invalid_argument("CurvatureModel: ell must be an integer in integer-only mode");
        if (!amplitude_fn && !(amplitude > 0.0)) throw std::invalid_argument("CurvatureModel: constant amplitude must be positive");
        if (!(remainder_bound >= 0.0)) throw std::invalid_argument("CurvatureModel: remainder_bound must be >= 0");
        if (remainder && !(remainder_bound > 0.0)) throw std::invalid_argument("CurvatureModel: a remainder needs a positive declared bound");
        if (!(tube_radius > 0.0)) throw std::invalid_argument("CurvatureModel: tube_radius must be positive");
    }

    double amplitude_at(const vec& p) const {
        const double c = amplitude_fn ? amplitude_fn(p) : amplitude;
        if (!(c > 0.0)) throw std::domain_error("CurvatureModel: amplitude must stay positive on H");
        return c;
    }
};

// Nearest-point projection onto H. The sphere case is undefined at the
// origin, which is equidistant from all of H.
inline vec project_to_H(const vec& y, const CurvatureModel& model) {
    if (static_cast<int>(y.size()) != model.n) throw std::invalid_argument("project_to_H: dimension mismatch");
    if (model.kind == CurvatureKind::hyperplane) {
        vec p = y;
        p[p.size() - 1] = 0.0;
        return p;
    }
    const double m = norm(y);
    if (m == 0.0) throw std::domain_error("project_to_H: the origin has no nearest point on the sphere");
    return scaled(y, 1.0 / m);
}

inline double dist_to_H(const vec& y, const CurvatureModel& model) {
    if (static_cast<int>(y.size()) != model.n) throw std::invalid_argument("dist_to_H: dimension mismatch");
    if (model.kind == CurvatureKind::hyperplane) return std::abs(y[y.size() - 1]);
    return std::abs(norm(y) - 1.0);
}

struct OffsetFrame {
    double eta = 0.0;  // distance to H
    vec normal;        // unit direction of increasing offset; zero vector when eta = 0
};

// Offset distance together with the gradient direction of eta^2 / (2 eta);
// exactly the data the model gradients need, and well defined (as zero) on H.
inline OffsetFrame offset_frame(const vec& xi, const CurvatureModel& model) {
    OffsetFrame f;
    f.normal = vec(xi.size(), 0.0);
    if (model.kind == CurvatureKind::hyperplane) {
        const double c = xi[xi.size() - 1];
        f.eta = std::abs(c);
        if (c != 0.0) f.normal[xi.size() - 1] = (c > 0.0) ? 1.0 : -1.0;
        return f;
    }
    const double m = norm(xi);
    if (m == 0.0) throw std::domain_error("offset_frame: the origin has no offset direction from the sphere");
    f.eta = std::abs(m - 1.0);
    if (m != 1.0) f.normal = scaled(xi, (m > 1.0 ? 1.0 : -1.0) / m);
    return f;
}

// Scaled curvature value n(n-2) - C(p_y) dist(y,H)^ell + remainder, defined
// only inside the model's tube.
inline double curvature_eval(const vec& y, const CurvatureModel& model) {
    model.validate();
    const double eta = dist_to_H(y, model);
    if (eta > model.tube_radius)
        throw std::domain_error("curvature_eval: point lies outside the model tube (dist " + std::to_string(eta) + " > " +
                                std::to_string(model.tube_radius) + ")");
    const vec p = project_to_H(y, model);
    const double c = model.amplitude_at(p);
    const double rem = model.remainder ? model.remainder(eta) : 0.0;
    return model.n * (model.n - 2.0) - c * std::pow(eta, model.ell) + rem;
}

// Bounded global extension used by whole-space integrals: beyond the tube the
// offset is frozen at the tube radius. Inside the tube it matches
// curvature_eval exactly.
inline double curvature_eval_clamped(const vec& y, const CurvatureModel& model) {
    const double eta = std::min(dist_to_H(y, model), model.tube_radius);
    vec p;
    if (model.kind == CurvatureKind::sphere && norm(y) == 0.0) {
        p = vec(y.size(), 0.0);
        p[0] = 1.0;  // any point of the sphere; the clamped profile is constant here
    } else {
        p = project_to_H(y, model);
    }
    const double c = model.amplitude_at(p);
    const double rem = model.remainder ? model.remainder(eta) : 0.0;
    return model.n * (model.n - 2.0) - c * std::pow(eta, model.ell) + rem;
}

struct Configuration {
    int n = 6;
    std::vector<BubbleParams> bubbles;
    Box box;
    AsymptoticRegime regime;
    std::optional<CurvatureModel> model;

    int flat() const { return static_cast<int>(bubbles.size()); }
};

// Geometric mean of the concentration scales.
inline double lambda_bar(const Configuration& cfg) {
    if (cfg.bubbles.empty()) throw std::invalid_argument("lambda_bar: no bubbles");
    double acc = 0.0;
    for (const auto& b : cfg.bubbles) {
        if (!(b.lambda > 0.0)) throw std::invalid_argument("lambda_bar: scales must be positive");
        acc += std::log(b.lambda);
    }
    return std::exp(acc / static_cast<double>(cfg.bubbles.size()));
}

// Scale-free distance |xi_a - xi_b| / sqrt(lambda_a lambda_b) between two
// bubbles; infinite-order contact (coincident centres) is a usage error.
inline double qh_distance(const BubbleParams& a, const BubbleParams& b) {
    if (!(a.lambda > 0.0) || !(b.lambda > 0.0)) throw std::invalid_argument("qh_distance: scales must be positive");
    const double d = dist(a.xi, b.xi);
    if (d == 0.0) throw std::invalid_argument("qh_distance: coincident centres");
    return d / std::sqrt(a.lambda * b.lambda);
}

struct ValidationCheck {
    std::string name;
    bool pass = false;
    double measured = 0.0;
    double bound = 0.0;
    bool enforced = true;
    std::string detail;
};

struct ValidationReport {
    std::vector<ValidationCheck> checks;
    bool pass = true;  // conjunction of the enforced checks
};

// Per-hypothesis admissibility report. Structural defects (wrong dimensions,
// non-positive scales, coincident centres) are thrown as errors; everything
// that is a matter of degree lands in the report.
inline ValidationReport validate_configuration(const Configuration& cfg, double scale_ratio_bound = 10.0) {
    if (cfg.n < 3) throw std::invalid_argument("validate_configuration: n must be >= 3");
    if (cfg.bubbles.empty()) throw std::invalid_argument("validate_configuration: configuration has no bubbles");
    if (!(cfg.box.hi > cfg.box.lo)) throw std::invalid_argument("validate_configuration: box is empty");
    cfg.regime.validate(cfg.n);
    for (const auto& b : cfg.bubbles) {
        if (static_cast<int>(b.xi.size()) != cfg.n) throw std::invalid_argument("validate_configuration: centre dimension mismatch");
        if (!(b.lambda > 0.0)) throw std::invalid_argument("validate_configuration: scales must be positive");
    }
    for (std::size_t j = 0; j < cfg.bubbles.size(); ++j)
        for (std::size_t k = j + 1; k < cfg.bubbles.size(); ++k)
            if (dist(cfg.bubbles[j].xi, cfg.bubbles[k].xi) == 0.0)
                throw std::invalid_argument("validate_configuration: coincident centres");
    if (cfg.model) {
        cfg.model->validate();
        if (cfg.model->n != cfg.n) throw std::invalid_argument("validate_configuration: model dimension mismatch");
        if (cfg.model->ell != cfg.regime.ell) throw std::invalid_argument("validate_configuration: model and regime disagree on ell");
    }

    ValidationReport report;
    const double lb = lambda_bar(cfg);
    const int flat = cfg.flat();

    {
        double worst = 0.0;
        for (const auto& b : cfg.bubbles)
            for (double c : b.xi) worst = std::max(worst, std::max(cfg.box.lo - c, c - cfg.box.hi));
        report.checks.push_back({"centres inside box", worst <= 0.0, worst, 0.0, true, "largest boundary excess"});
    }
    {
        double ratio = 1.0;
        for (const auto& b : cfg.bubbles) ratio = std::max(ratio, std::max(b.lambda / lb, lb / b.lambda));
        report.checks.push_back({"scale uniformity", ratio <= scale_ratio_bound, ratio, scale_ratio_bound, true,
                                 "max of lambda_l/lambda_bar and its inverse"});
    }
    {
        double worst = 0.0;
        for (std::size_t l = 0; l < cfg.bubbles.size(); ++l) {
            double sum = 0.0;
            for (std::size_t k = 0; k < cfg.bubbles.size(); ++k)
                if (k != l) sum += 1.0 / qh_distance(cfg.bubbles[l], cfg.bubbles[k]);
            worst = std::max(worst, sum);
        }
        const double bound = std::pow(lb, cfg.regime.gamma);
        report.checks.push_back({"separation sum", worst <= bound, worst, bound, true,
                                 "max over l of sum_k 1/d_qh(l,k) against lambda_bar^gamma"});
    }
    {
        const double bound = std::pow(lb, -cfg.regime.sigma);
        report.checks.push_back({"bubble count", static_cast<double>(flat) <= bound, static_cast<double>(flat), bound, true,
                                 "flat against lambda_bar^-sigma"});
    }
    if (cfg.model) {
        double worst = 0.0;
        for (const auto& b : cfg.bubbles) worst = std::max(worst, offset_frame(b.xi, *cfg.model).eta);
        const double bound = std::pow(lb, 1.0 + cfg.regime.kappa);
        report.checks.push_back({"offset bound", worst <= bound, worst, bound, true,
                                 "max centre distance to H against lambda_bar^(1+kappa)"});
    }
    {
        // Recorded, not enforced: margin between the model's main terms and
        // the error budget, min{(n/2)(1-nu), ell*nu} > ((n+10)/8) sigma.
        const double lhs = std::min(0.5 * cfg.n * (1.0 - cfg.regime.nu), cfg.regime.ell * cfg.regime.nu);
        const double rhs = (cfg.n + 10.0) / 8.0 * cfg.regime.sigma;
        report.checks.push_back({"exponent margin", lhs > rhs, lhs, rhs, false, "informational"});
    }
    {
        // Recorded, not enforced: gamma > sigma / (n-2).
        const double rhs = cfg.regime.sigma / (cfg.n - 2.0);
        report.checks.push_back({"separation margin", cfg.regime.gamma > rhs, cfg.regime.gamma, rhs, false, "informational"});
    }

    for (const auto& c : report.checks)
        if (c.enforced && !c.pass) report.pass = false;
    return report;
}

// flat equally spaced centres on the circle of radius 1 + eta in the first
// two coordinates, sharing one scale, with the unit sphere as the model's
// critical manifold so every centre has offset |eta|. The seed is accepted
// for interface uniformity; the construction is fully deterministic.
inline Configuration gen_circle_configuration(int flat, double lambda, double eta, std::uint64_t /*seed*/, int n = 6,
                                              AsymptoticRegime regime = {}) {
    if (flat < 1) throw std::invalid_argument("gen_circle_configuration: flat must be >= 1");
    if (!(lambda > 0.0)) throw std::invalid_argument("gen_circle_configuration: lambda must be positive");
    if (n < 3) throw std::invalid_argument("gen_circle_configuration: n must be >= 3");
    Configuration cfg;
    cfg.n = n;
    cfg.regime = regime;
    const double radius = 1.0 + eta;
    for (int l = 0; l < flat; ++l) {
        BubbleParams b;
        b.lambda = lambda;
        b.xi = vec(static_cast<std::size_t>(n), 0.0);
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(l) / static_cast<double>(flat);
        b.xi[0] = radius * std::cos(angle);
        b.xi[1] = radius * std::sin(angle);
        cfg.bubbles.push_back(std::move(b));
    }
    const double extent = 2.0 + std::abs(eta);
    cfg.box = {-extent, extent};
    CurvatureModel model;
    model.kind = CurvatureKind::sphere;
    model.n = n;
    model.ell = regime.ell;
    cfg.model = model;
    return cfg;
}

// Rejection-samples flat centres in the box (common scale lambda_bar) until
// the separation sum clears lambda_bar^gamma; deterministic in the seed.
inline Configuration gen_random_separated(int flat, double lambda_bar_target, double gamma, Box box, std::uint64_t seed,
                                          int n = 6, AsymptoticRegime regime = {}, int max_attempts = 10000) {
    if (flat < 1) throw std::invalid_argument("gen_random_separated: flat must be >= 1");
    if (!(lambda_bar_target > 0.0)) throw std::invalid_argument("gen_random_separated: lambda_bar must be positive");
    if (!(box.hi > box.lo)) throw std::invalid_argument("gen_random_separated: box is empty");
    if (n < 3) throw std::invalid_argument("gen_random_separated: n must be >= 3");
    regime.gamma = gamma;
    if (!(regime.gamma > regime.nu)) regime.nu = 0.5 + 0.5 * (gamma - 0.5);  // keep the exponent order intact

    std::mt19937_64 eng = make_engine(seed);
    std::uniform_real_distribution<double> coord(box.lo, box.hi);
    const double bound = std::pow(lambda_bar_target, gamma);
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        Configuration cfg;
        cfg.n = n;
        cfg.box = box;
        cfg.regime = regime;
        for (int l = 0; l < flat; ++l) {
            BubbleParams b;
            b.lambda = lambda_bar_target;
            b.xi = vec(static_cast<std::size_t>(n));
            for (auto& c : b.xi) c = coord(eng);
            cfg.bubbles.push_back(std::move(b));
        }
        bool distinct = true;
        double worst = 0.0;
        for (std::size_t l = 0; l < cfg.bubbles.size() && distinct; ++l) {
            double sum = 0.0;
            for (std::size_t k = 0; k < cfg.bubbles.size(); ++k) {
                if (k == l) continue;
                if (dist(cfg.bubbles[l].xi, cfg.bubbles[k].xi) == 0.0) {
                    distinct = false;
                    break;
                }
                sum += 1.0 / qh_distance(cfg.bubbles[l], cfg.bubbles[k]);
            }
            worst = std::max(worst, sum);
        }
        if (distinct && worst <= bound) return cfg;
    }
    throw std::runtime_error("gen_random_separated: infeasible regime, no admissible draw in " + std::to_string(max_attempts) +
                             " attempts (need separation sum <= " + std::to_string(bound) + ")");
}

// ---- JSON schema ----------------------------------------------------------
// {
//   "n": int, "ell": real, "flat": int,
//   "lambdas": [..], "xis": [[..], ..],
//   "box": {"lo": real, "hi": real},
//   "regime": {"gamma","nu","kappa","sigma","tau"},
//   "model": {"kind": "hyperplane"|"sphere", "C": real, "remainder_bound": real}   (optional)
// }

inline nlohmann::ordered_json to_json(const Configuration& cfg) {
    nlohmann::ordered_json j;
    j["n"] = cfg.n;
    j["ell"] = cfg.regime.ell;
    j["flat"] = cfg.flat();
    j["lambdas"] = nlohmann::ordered_json::array();
    j["xis"] = nlohmann::ordered_json::array();
    // References are taken only after both keys exist: inserting into an
    // ordered document moves its element storage.
    auto& lambdas = j["lambdas"];
    auto& xis = j["xis"];
    for (const auto& b : cfg.bubbles) {
        lambdas.push_back(b.lambda);
        xis.push_back(b.xi);
    }
    j["box"] = {{"lo", cfg.box.lo}, {"hi", cfg.box.hi}};
    j["regime"] = {{"gamma", cfg.regime.gamma}, {"nu", cfg.regime.nu}, {"kappa", cfg.regime.kappa},
                   {"sigma", cfg.regime.sigma}, {"tau", cfg.regime.tau_gt1}};
    if (cfg.model) {
        if (cfg.model->amplitude_fn)
            throw std::invalid_argument("to_json: only constant amplitudes serialise");
        j["model"] = {{"kind", to_string(cfg.model->kind)}, {"C", cfg.model->amplitude},
                      {"remainder_bound", cfg.model->remainder_bound}};
    }
    return j;
}

inline Configuration configuration_from_json(const nlohmann::json& j) {
    Configuration cfg;
    try {
        cfg.n = j.at("n").get<int>();
        cfg.regime.ell = j.at("ell").get<double>();
        const int flat = j.at("flat").get<int>();
        const auto& lambdas = j.at("lambdas");
        const auto& xis = j.at("xis");
        if (static_cast<int>(lambdas.size()) != flat || static_cast<int>(xis.size()) != flat)
            throw std::invalid_argument("configuration_from_json: flat disagrees with lambdas/xis lengths");
        for (int l = 0; l < flat; ++l) {
            BubbleParams b;
            b.lambda = lambdas.at(l).get<double>();
            b.xi = xis.at(l).get<vec>();
            if (static_cast<int>(b.xi.size()) != cfg.n) throw std::invalid_argument("configuration_from_json: centre dimension mismatch");
            cfg.bubbles.push_back(std::move(b));
        }
        cfg.box.lo = j.at("box").at("lo").get<double>();
        cfg.box.hi = j.at("box").at("hi").get<double>();
        const auto& r = j.at("regime");
        cfg.regime.gamma = r.at("gamma").get<double>();
        cfg.regime.nu = r.at("nu").get<double>();
        cfg.regime.kappa = r.at("kappa").get<double>();
        cfg.regime.sigma = r.at("sigma").get<double>();
        cfg.regime.tau_gt1 = r.at("tau").get<double>();
        if (j.contains("model")) {
            CurvatureModel m;
            m.kind = curvature_kind_from_string(j.at("model").at("kind").get<std::string>());
            m.n = cfg.n;
            m.ell = cfg.regime.ell;
            m.amplitude = j.at("model").at("C").get<double>();
            m.remainder_bound = j.at("model").at("remainder_bound").get<double>();
            cfg.model = std::move(m);
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("configuration_from_json: malformed document: ") + e.what());
    }
    return cfg;
}

inline void save_configuration(const Configuration& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_configuration: cannot open " + path);
    out << to_json(cfg).dump(2) << '\n';
    if (!out) throw std::runtime_error("save_configuration: write failed for " + path);
}

inline Configuration load_configuration(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_configuration: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("load_configuration: " + path + " is not valid JSON: " + e.what());
    }
    return configuration_from_json(j);
}

}  // namespace bubblab
