#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "bubblab/quadrature.hpp"
#include "bubblab/special.hpp"

namespace bubblab {

// Surface measure omega_n of the unit sphere S^{n-1} in R^n.
inline double sphere_area(int n) { return unit_sphere_measure(n); }

// Mass V(n) of the unit bubble profile's full power, int (1+R^2)^{-n} dY,
// in Beta closed form omega_n * (1/2) B(n/2, n/2).
inline double bubble_mass(int n) { return unit_profile_mass(n); }

enum class Provenance { closed_form, quadrature };

inline std::string to_string(Provenance p) { return p == Provenance::closed_form ? "closed-form" : "quadrature"; }

// The model functional's coefficient family. First index: 0 = energy,
// 1 = scale gradient, 2 = centre gradient. Second index: 1 = flatness term,
// 2 = interaction term, 3 = offset term.
struct ConstantTable {
    int n = 0;
    double ell = 0.0;
    double omega_n = 0.0;
    double v_n = 0.0;
    double c01 = 0.0, c02 = 0.0, c03 = 0.0;
    double c11 = 0.0, c12 = 0.0, c13 = 0.0;
    double c22 = 0.0, c23 = 0.0;
    std::map<std::string, Provenance> provenance;
};

namespace detail {

inline void require_constant_range(int n, double ell) {
    if (n < 3) throw std::invalid_argument("constants: n must be >= 3");
    if (!(ell >= 2.0 && ell < n - 2.0))
        throw std::invalid_argument("constants: ell must lie in [2, n-2), got ell = " + std::to_string(ell) +
                                    " at n = " + std::to_string(n));
}

// int |Y_n|^a (1+R^2)^{-m} [(R^2-1)/(R^2+1)]^{tilt} dY over R^n via the
// axisymmetric reduction about the distinguished axis.
inline double axial_profile_integral(int n, double a, double m, bool tilt, const QuadratureSpec& user_spec) {
    QuadratureSpec spec = user_spec;
    // Tilted integrands can cancel to zero; an absolute floor keeps the
    // adaptive loop from chasing a relative target that never engages.
    spec.abs_tol = std::max(spec.abs_tol, 1e-14);
    const auto integrand = [a, m, tilt](double r, double theta) {
        const double r2 = r * r;
        const double axial = std::abs(r * std::cos(theta));
        const double weight = (a == 0.0) ? 1.0 : std::pow(axial, a);
        double v = weight * std::pow(1.0 + r2, -m);
        if (tilt) v *= (r2 - 1.0) / (r2 + 1.0);
        return v;
    };
    return integrate_axisym(integrand, n, spec).value;
}

}  // namespace detail

// Single named coefficient. The interaction-family entries (c02, c12, c22)
// are multiples of omega_n and evaluate in closed form; the rest integrate
// the profile moments by adaptive quadrature.
inline double constant(const std::string& name, int n, double ell, const QuadratureSpec& spec) {
    detail::require_constant_range(n, ell);
    const double m = n - 2.0;
    if (name == "omega_n") return sphere_area(n);
    if (name == "v_n") return bubble_mass(n);
    if (name == "c02") return 0.5 * m * sphere_area(n);
    if (name == "c12") return 0.5 * m * m * sphere_area(n);
    if (name == "c22") return m * m * sphere_area(n);
    if (name == "c01") return 0.5 * m / n * detail::axial_profile_integral(n, ell, n, false, spec);
    if (name == "c03") return 0.5 * m / n * (0.5 * ell * (ell - 1.0)) * detail::axial_profile_integral(n, ell - 2.0, n, false, spec);
    if (name == "c11") return 0.5 * m * detail::axial_profile_integral(n, ell, n, true, spec);
    if (name == "c13") return 0.5 * m * (0.5 * ell * (ell - 1.0)) * detail::axial_profile_integral(n, ell - 2.0, n, true, spec);
    if (name == "c23") return m * ell * detail::axial_profile_integral(n, ell, n + 1.0, false, spec);
    throw std::invalid_argument("constant: unknown name '" + name + "'");
}

inline ConstantTable make_constant_table(int n, double ell, const QuadratureSpec& spec) {
    detail::require_constant_range(n, ell);
    ConstantTable t;
    t.n = n;
    t.ell = ell;
    t.omega_n = constant("omega_n", n, ell, spec);
    t.v_n = constant("v_n", n, ell, spec);
    t.c01 = constant("c01", n, ell, spec);
    t.c02 = constant("c02", n, ell, spec);
    t.c03 = constant("c03", n, ell, spec);
    t.c11 = constant("c11", n, ell, spec);
    t.c12 = constant("c12", n, ell, spec);
    t.c13 = constant("c13", n, ell, spec);
    t.c22 = constant("c22", n, ell, spec);
    t.c23 = constant("c23", n, ell, spec);
    t.provenance = {{"omega_n", Provenance::closed_form}, {"v_n", Provenance::closed_form},
                    {"c01", Provenance::quadrature},      {"c02", Provenance::closed_form},
                    {"c03", Provenance::quadrature},      {"c11", Provenance::quadrature},
                    {"c12", Provenance::closed_form},     {"c13", Provenance::quadrature},
                    {"c22", Provenance::closed_form},     {"c23", Provenance::quadrature}};
    return t;
}

struct IdentityCheck {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    double deviation = 0.0;  // |lhs - rhs| relative to the check's own scale
    double tol = 0.0;
    bool pass = false;
};

struct IdentityReport {
    int n = 0;
    double ell = 0.0;
    std::vector<IdentityCheck> checks;
    std::vector<std::string> notes;
    bool pass = true;
};

// Cross-checks the coefficient family against the relations that the scale
// and centre derivatives of the model impose:
//   c11 = ell c01,  c13 = (ell-2) c03,  c23 = 2 c03,
//   c12 = (n-2) c02,  c22 = 2 (n-2) c02,
// plus positivity of the members that must be positive.
inline IdentityReport check_identities(const ConstantTable& t, double rel_tol = 1e-8) {
    IdentityReport report;
    report.n = t.n;
    report.ell = t.ell;

    const auto push = [&report](const std::string& name, double lhs, double rhs, double scale, double tol) {
        IdentityCheck c;
        c.name = name;
        c.lhs = lhs;
        c.rhs = rhs;
        c.deviation = std::abs(lhs - rhs) / scale;
        c.tol = tol;
        c.pass = c.deviation <= tol;
        report.checks.push_back(c);
    };

    push("c11 = ell*c01", t.c11, t.ell * t.c01, std::abs(t.c01), rel_tol);
    push("c13 = (ell-2)*c03", t.c13, (t.ell - 2.0) * t.c03, std::abs(t.c03), rel_tol);
    if (t.ell == 2.0) {
        IdentityCheck c;
        c.name = "c13 vanishes at ell=2";
        c.lhs = t.c13;
        c.rhs = 0.0;
        c.deviation = std::abs(t.c13);
        c.tol = 1e-10;
        c.pass = c.deviation <= c.tol;
        report.checks.push_back(c);
    }
    push("c23 = 2*c03", t.c23, 2.0 * t.c03, std::abs(t.c03), rel_tol);
    push("c12 = (n-2)*c02", t.c12, (t.n - 2.0) * t.c02, std::abs(t.c02), 1e-14);
    push("c22 = 2(n-2)*c02", t.c22, 2.0 * (t.n - 2.0) * t.c02, std::abs(t.c02), 1e-14);

    for (const auto& [name, value] : std::initializer_list<std::pair<const char*, double>>{
             {"c01", t.c01}, {"c02", t.c02}, {"c03", t.c03}, {"c11", t.c11}, {"c12", t.c12}, {"c22", t.c22}, {"c23", t.c23}}) {
        IdentityCheck c;
        c.name = std::string(name) + " positive";
        c.lhs = value;
        c.rhs = 0.0;
        c.deviation = value > 0.0 ? 0.0 : std::abs(value);
        c.tol = 0.0;
        c.pass = value > 0.0;
        report.checks.push_back(c);
    }

    // The offset-family scale relation admits two published candidates; only
    // the one consistent with differentiation is asserted above, but both
    // measured ratios are surfaced so the discrepancy stays visible.
    if (t.c03 != 0.0) {
        const double ratio = t.c13 / t.c03;
        char buffer[160];
        std::snprintf(buffer, sizeof(buffer),
                      "measured c13/c03 = %.12g; candidate (ell-2) = %.12g, candidate 2(ell-2) = %.12g", ratio, t.ell - 2.0,
                      2.0 * (t.ell - 2.0));
        report.notes.push_back(buffer);
    }
    {
        // The flatness coefficient must carry the axial weight |Y_n|^ell for
        // c11 = ell*c01 to close; the unweighted variant is reported so the
        // difference is visible at a glance.
        const double unweighted = 0.5 * (t.n - 2.0) / t.n * t.v_n;
        char buffer[200];
        std::snprintf(buffer, sizeof(buffer),
                      "c01 uses the axially weighted profile moment; the unweighted variant ((n-2)/2n) V(n) = %.12g would "
                      "break c11 = ell*c01 (weighted c01 = %.12g)",
                      unweighted, t.c01);
        report.notes.push_back(buffer);
    }

    for (const auto& c : report.checks)
        if (!c.pass) report.pass = false;
    return report;
}

inline IdentityReport check_identities(int n, double ell, const QuadratureSpec& spec, double rel_tol = 1e-8) {
    return check_identities(make_constant_table(n, ell, spec), rel_tol);
}

}  // namespace bubblab
