#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "config.hpp"
#include "constants.hpp"
#include "functionals.hpp"
#include "reduced.hpp"
#include "solver.hpp"

// Command-line front end. Every subcommand computes a report, renders it to
// stdout or to the --out path, and exits 0 only if every check in that report
// passes; 1 flags a failed check, 2 flags a usage or input problem. Runs are
// deterministic: identical argv (including --seed where accepted) produce
// byte-identical output, so nothing here reads clocks or ambient entropy.

namespace bubblab::cli {

namespace detail {

inline std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// One output artifact, rendered in memory first so a failed computation never
// leaves a half-written file behind.
struct Artifact {
    std::string path;
    std::string text;
};

struct RunContext {
    std::string command;
    std::optional<std::string> config_path;
    std::optional<std::uint64_t> seed;
    std::vector<Artifact> artifacts;
    nlohmann::ordered_json overrides = nlohmann::ordered_json::object();
};

inline nlohmann::ordered_json collect_overrides(const CLI::App* sub) {
    nlohmann::ordered_json o = nlohmann::ordered_json::object();
    for (const CLI::Option* opt : sub->get_options()) {
        if (opt->count() == 0) continue;
        const std::string name = opt->get_name();
        if (name == "--help") continue;
        const auto& res = opt->results();
        if (res.size() == 1)
            o[name] = res.front();
        else
            o[name] = res;
    }
    return o;
}

// The manifest is the provenance record for file-producing runs: flags as
// given, seed, artifact paths, and the exit status the run returned. It lands
// next to the artifacts, named after the first one. Stdout-only runs carry
// their provenance in the invocation itself, so they write nothing.
inline void write_manifest(const RunContext& ctx, int exit_status, std::ostream& out) {
    if (ctx.artifacts.empty()) return;
    nlohmann::ordered_json m;
    m["command"] = ctx.command;
    m["config"] = ctx.config_path ? nlohmann::ordered_json(*ctx.config_path) : nlohmann::ordered_json(nullptr);
    m["overrides"] = ctx.overrides;
    m["seed"] = ctx.seed ? nlohmann::ordered_json(*ctx.seed) : nlohmann::ordered_json(nullptr);
    auto& outputs = m["outputs"] = nlohmann::ordered_json::array();
    for (const auto& a : ctx.artifacts) outputs.push_back(a.path);
    m["exit_status"] = exit_status;

    std::filesystem::path p(ctx.artifacts.front().path);
    p.replace_extension();
    const std::string manifest_path = p.string() + "_manifest.json";

    for (const auto& a : ctx.artifacts) {
        std::ofstream f(a.path);
        if (!f) throw std::runtime_error("cannot open output file: " + a.path);
        f << a.text;
        if (!f.flush()) throw std::runtime_error("failed writing output file: " + a.path);
        out << "wrote " << a.path << "\n";
    }
    std::ofstream f(manifest_path);
    if (!f) throw std::runtime_error("cannot open output file: " + manifest_path);
    f << m.dump(2) << "\n";
    if (!f.flush()) throw std::runtime_error("failed writing output file: " + manifest_path);
    out << "wrote " << manifest_path << "\n";
}

// Renders the report to the --out artifact when a path was given, otherwise
// to stdout. Returns the exit code so the manifest can record it.
inline int deliver(RunContext& ctx, const std::string& out_path, std::string text, int exit_code, std::ostream& out) {
    if (out_path.empty())
        out << text;
    else
        ctx.artifacts.push_back({out_path, std::move(text)});
    return exit_code;
}

inline std::string csv_bool(bool b) { return b ? "true" : "false"; }

// ---- constants ------------------------------------------------------------

struct ConstantsArgs {
    int n = 6;
    double ell = 2.0;
    std::string out;
    std::string format = "csv";
};

inline int run_constants(const ConstantsArgs& a, RunContext& ctx, std::ostream& out) {
    const ConstantTable t = make_constant_table(a.n, a.ell, QuadratureSpec{});
    const std::vector<std::pair<std::string, double>> rows = {
        {"omega_n", t.omega_n}, {"v_n", t.v_n}, {"c01", t.c01}, {"c02", t.c02}, {"c03", t.c03},
        {"c11", t.c11},         {"c12", t.c12}, {"c13", t.c13}, {"c22", t.c22}, {"c23", t.c23}};

    std::string text;
    if (a.format == "csv") {
        std::ostringstream s;
        s << "name,value,provenance\n";
        for (const auto& [name, value] : rows)
            s << name << "," << fmt(value) << "," << to_string(t.provenance.at(name)) << "\n";
        text = s.str();
    } else {
        nlohmann::ordered_json j;
        j["n"] = t.n;
        j["ell"] = t.ell;
        auto& arr = j["constants"] = nlohmann::ordered_json::array();
        for (const auto& [name, value] : rows)
            arr.push_back({{"name", name}, {"value", value}, {"provenance", to_string(t.provenance.at(name))}});
        text = j.dump(2) + "\n";
    }
    return deliver(ctx, a.out, std::move(text), 0, out);
}

// ---- identities -------------------------------------------------------------

struct IdentitiesArgs {
    int n = 6;
    double ell = 2.0;
    double tol = 1e-8;
    std::string out;
    std::string format = "json";
};

inline int run_identities(const IdentitiesArgs& a, RunContext& ctx, std::ostream& out) {
    const IdentityReport r = check_identities(a.n, a.ell, QuadratureSpec{}, a.tol);

    std::string text;
    if (a.format == "csv") {
        std::ostringstream s;
        s << "name,lhs,rhs,deviation,tol,pass\n";
        for (const auto& c : r.checks)
            s << c.name << "," << fmt(c.lhs) << "," << fmt(c.rhs) << "," << fmt(c.deviation) << "," << fmt(c.tol)
              << "," << csv_bool(c.pass) << "\n";
        text = s.str();
    } else {
        nlohmann::ordered_json j;
        j["n"] = r.n;
        j["ell"] = r.ell;
        auto& arr = j["checks"] = nlohmann::ordered_json::array();
        for (const auto& c : r.checks)
            arr.push_back({{"name", c.name},
                           {"lhs", c.lhs},
                           {"rhs", c.rhs},
                           {"deviation", c.deviation},
                           {"tol", c.tol},
                           {"pass", c.pass}});
        j["notes"] = r.notes;
        j["pass"] = r.pass;
        text = j.dump(2) + "\n";
    }
    return deliver(ctx, a.out, std::move(text), r.pass ? 0 : 1, out);
}

// ---- verify-expansion -------------------------------------------------------

struct ExpansionArgs {
    int n = 6;
    int ell = 2;
    double lambda = 1e-3;
    std::string family = "all";
    std::string out;
    std::string format = "csv";
};

inline int run_verify_expansion(const ExpansionArgs& a, RunContext& ctx, std::ostream& out) {
    std::vector<ExpansionFamily> families;
    if (a.family == "all") {
        families = {ExpansionFamily::interaction_vs_distance, ExpansionFamily::curvature_vs_lambda,
                    ExpansionFamily::curvature_vs_eta};
    } else {
        families = {expansion_family_from_string(a.family)};
    }

    std::vector<ExpansionFit> fits;
    for (ExpansionFamily fam : families) {
        ExpansionParams p;
        p.n = a.n;
        p.ell = a.ell;
        p.lambda = a.lambda;
        std::vector<double> ladder;
        switch (fam) {
            case ExpansionFamily::interaction_vs_distance:
                ladder = {100.0, 300.0, 1000.0, 3000.0};
                break;
            case ExpansionFamily::curvature_vs_lambda:
                ladder = {3e-4, 6e-4, 1.5e-3, 3e-3};
                break;
            case ExpansionFamily::curvature_vs_eta:
                // Offsets stay below lambda/4: the error of the quadratic law
                // is even and of relative size (eta/lambda)^2.
                ladder = {a.lambda / 40.0, a.lambda / 20.0, a.lambda / 10.0, a.lambda / 4.0};
                p.coefficient_tol = 0.02;
                break;
        }
        fits.push_back(fit_expansion(fam, ladder, QuadratureSpec{}, p));
    }

    bool all_pass = true;
    for (const auto& f : fits) all_pass = all_pass && f.passes;

    std::string text;
    if (a.format == "csv") {
        std::ostringstream s;
        s << "family,exponent_fit,exponent_pred,coeff_fit,coeff_pred,rel_err,pass\n";
        for (const auto& f : fits) {
            const double rel_err = std::abs(f.fitted_coefficient / f.predicted_coefficient - 1.0);
            s << to_string(f.family) << "," << fmt(f.fitted_exponent) << "," << fmt(f.predicted_exponent) << ","
              << fmt(f.fitted_coefficient) << "," << fmt(f.predicted_coefficient) << "," << fmt(rel_err) << ","
              << csv_bool(f.passes) << "\n";
        }
        text = s.str();
    } else {
        nlohmann::ordered_json j;
        auto& arr = j["fits"] = nlohmann::ordered_json::array();
        for (const auto& f : fits) {
            nlohmann::ordered_json e;
            e["family"] = to_string(f.family);
            e["exponent_fit"] = f.fitted_exponent;
            e["exponent_pred"] = f.predicted_exponent;
            e["coeff_fit"] = f.fitted_coefficient;
            e["coeff_pred"] = f.predicted_coefficient;
            e["rel_err"] = std::abs(f.fitted_coefficient / f.predicted_coefficient - 1.0);
            e["exponent_tol"] = f.exponent_tol;
            e["coefficient_tol"] = f.coefficient_tol;
            e["sample_points"] = f.sample_points;
            e["values"] = f.values;
            e["pass"] = f.passes;
            arr.push_back(std::move(e));
        }
        j["pass"] = all_pass;
        text = j.dump(2) + "\n";
    }
    return deliver(ctx, a.out, std::move(text), all_pass ? 0 : 1, out);
}

// ---- critical ---------------------------------------------------------------

struct CriticalArgs {
    std::string config;
    std::string symmetry = "none";
    double tol = 1e-12;
    int max_iter = 50;
    std::string out;
};

inline int run_critical(const CriticalArgs& a, RunContext& ctx, std::ostream& out) {
    const Configuration cfg = load_configuration(a.config);
    if (!cfg.model)
        throw std::invalid_argument("critical: the configuration must embed a curvature model (\"model\" block)");

    SolveOptions opts;
    opts.symmetry = symmetry_mode_from_string(a.symmetry);
    opts.tol = a.tol;
    opts.max_iter = a.max_iter;

    const ConstantTable table = make_constant_table(cfg.n, cfg.regime.ell, QuadratureSpec{});
    const CriticalPointResult r = find_critical(cfg, *cfg.model, table, opts);

    nlohmann::ordered_json j = to_json(r.configuration);
    nlohmann::ordered_json solve;
    solve["symmetry"] = to_string(opts.symmetry);
    solve["residual_norm"] = r.residual_norm;
    solve["iterations"] = r.iterations;
    solve["converged"] = r.converged;
    solve["notes"] = r.notes;
    j["solve"] = std::move(solve);

    std::ostringstream trace;
    trace << "iteration,residual,step_scale\n";
    for (const auto& row : r.trace)
        trace << row.iteration << "," << fmt(row.residual) << "," << fmt(row.step_scale) << "\n";

    const int code = r.converged ? 0 : 1;
    if (a.out.empty()) {
        nlohmann::ordered_json full = j;
        auto& tr = full["trace"] = nlohmann::ordered_json::array();
        for (const auto& row : r.trace)
            tr.push_back({{"iteration", row.iteration}, {"residual", row.residual}, {"step_scale", row.step_scale}});
        out << full.dump(2) << "\n";
        return code;
    }
    std::filesystem::path stem(a.out);
    stem.replace_extension();
    ctx.artifacts.push_back({a.out, j.dump(2) + "\n"});
    ctx.artifacts.push_back({stem.string() + "_trace.csv", trace.str()});
    return code;
}

// ---- lemmas -------------------------------------------------------------------

struct LemmasArgs {
    std::string kind;
    std::size_t samples = 10000;
    std::uint64_t seed = 0;
    int n = 6;
    std::string out;
    std::string format = "json";
};

inline int run_lemmas(const LemmasArgs& a, RunContext& ctx, std::ostream& out) {
    LemmaParams params;
    params.n = a.n;
    const LemmaKind kind = lemma_kind_from_string(a.kind);
    const LemmaReport r = lemma_suite(kind, params, a.samples, a.seed, QuadratureSpec{});
    const bool pass = r.finite && r.non_increasing;

    nlohmann::ordered_json j;
    j["kind"] = to_string(r.kind);
    j["seed"] = r.seed;
    j["samples"] = a.samples;
    j["params"] = {{"n", r.params.n},           {"sigma", r.params.sigma},
                   {"alpha", r.params.alpha},   {"beta", r.params.beta},
                   {"varsigma", r.params.varsigma}, {"flat", r.params.flat},
                   {"kappa", r.params.kappa},   {"theta", r.params.theta},
                   {"inner_mc_samples", r.params.inner_mc_samples}, {"trend_tol", r.params.trend_tol}};
    auto& rows = j["rows"] = nlohmann::ordered_json::array();
    for (const auto& row : r.rows)
        rows.push_back({{"scale", row.scale},
                        {"sup_ratio", row.sup_ratio},
                        {"mean_ratio", row.mean_ratio},
                        {"samples", row.samples}});
    j["fitted_constant"] = r.fitted_constant;
    j["finite"] = r.finite;
    j["non_increasing"] = r.non_increasing;
    j["notes"] = r.notes;
    j["pass"] = pass;

    return deliver(ctx, a.out, j.dump(2) + "\n", pass ? 0 : 1, out);
}

// ---- energy -------------------------------------------------------------------

struct EnergyArgs {
    std::string config;
    std::uint64_t seed = 0;
    std::size_t samples = 1000000;
    std::string out;
    std::string format = "json";
};

inline int run_energy(const EnergyArgs& a, RunContext& ctx, std::ostream& out) {
    const Configuration cfg = load_configuration(a.config);
    QuadratureSpec spec;
    spec.seed = a.seed;
    spec.mc_samples = a.samples;
    const IntegralReport r = energy(cfg, spec);
    const bool finite = std::isfinite(r.value) && std::isfinite(r.error_estimate);

    nlohmann::ordered_json j;
    j["value"] = r.value;
    j["error_estimate"] = r.error_estimate;
    j["method"] = to_string(r.method);
    j["metadata"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : r.metadata) j["metadata"][k] = v;
    j["notes"] = r.notes;
    j["checks"] = nlohmann::ordered_json::array(
        {{{"name", "finite value"}, {"pass", finite}}});
    j["pass"] = finite;

    return deliver(ctx, a.out, j.dump(2) + "\n", finite ? 0 : 1, out);
}

// ---- validate -------------------------------------------------------------------

struct ValidateArgs {
    std::string config;
    std::string out;
    std::string format = "json";
};

inline int run_validate(const ValidateArgs& a, RunContext& ctx, std::ostream& out) {
    const Configuration cfg = load_configuration(a.config);
    const ValidationReport r = validate_configuration(cfg);

    std::string text;
    if (a.format == "csv") {
        std::ostringstream s;
        s << "name,pass,measured,bound,enforced,detail\n";
        for (const auto& c : r.checks)
            s << c.name << "," << csv_bool(c.pass) << "," << fmt(c.measured) << "," << fmt(c.bound) << ","
              << csv_bool(c.enforced) << "," << c.detail << "\n";
        text = s.str();
    } else {
        nlohmann::ordered_json j;
        auto& arr = j["checks"] = nlohmann::ordered_json::array();
        for (const auto& c : r.checks)
            arr.push_back({{"name", c.name},
                           {"pass", c.pass},
                           {"measured", c.measured},
                           {"bound", c.bound},
                           {"enforced", c.enforced},
                           {"detail", c.detail}});
        j["pass"] = r.pass;
        text = j.dump(2) + "\n";
    }
    return deliver(ctx, a.out, std::move(text), r.pass ? 0 : 1, out);
}

}  // namespace detail

// Parses argv (program name excluded), dispatches to the subcommand, and
// returns the process exit code: 0 all checks passed, 1 a check failed,
// 2 usage or input error. File-producing runs write a manifest recording the
// invocation next to their outputs, after the outputs themselves.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Numerical laboratory for clustered bubble configurations"};
    app.name("bubblab");
    app.require_subcommand(1);

    detail::ConstantsArgs ca;
    CLI::App* constants = app.add_subcommand("constants", "Emit the coefficient table for one (n, ell)");
    constants->add_option("--n", ca.n, "Ambient dimension")->capture_default_str();
    constants->add_option("--ell", ca.ell, "Flatness order")->capture_default_str();
    constants->add_option("--out", ca.out, "Output path (stdout when absent)");
    constants->add_option("--format", ca.format, "Output format")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();

    detail::IdentitiesArgs ia;
    CLI::App* identities = app.add_subcommand("identities", "Cross-check the coefficient identities");
    identities->add_option("--n", ia.n, "Ambient dimension")->capture_default_str();
    identities->add_option("--ell", ia.ell, "Flatness order")->capture_default_str();
    identities->add_option("--tol", ia.tol, "Relative tolerance per identity")->capture_default_str();
    identities->add_option("--out", ia.out, "Output path (stdout when absent)");
    identities->add_option("--format", ia.format, "Output format")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();

    detail::ExpansionArgs ea;
    CLI::App* expansion = app.add_subcommand("verify-expansion", "Fit asymptotic power laws against predictions");
    expansion->add_option("--family", ea.family, "Which family to fit")
        ->check(CLI::IsMember({"all", "interaction-vs-d", "curvature-vs-lambda", "curvature-vs-eta"}))
        ->capture_default_str();
    expansion->add_option("--n", ea.n, "Ambient dimension")->capture_default_str();
    expansion->add_option("--ell", ea.ell, "Flatness order (curvature families)")->capture_default_str();
    expansion->add_option("--lambda", ea.lambda, "Concentration scale (curvature families)")->capture_default_str();
    expansion->add_option("--out", ea.out, "Output path (stdout when absent)");
    expansion->add_option("--format", ea.format, "Output format")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();

    detail::CriticalArgs cra;
    CLI::App* critical = app.add_subcommand("critical", "Solve the leading-order critical point equations");
    critical->add_option("--config", cra.config, "Configuration JSON (must embed a model)")->required();
    critical->add_option("--symmetry", cra.symmetry, "Solution chart")
        ->check(CLI::IsMember({"none", "ring", "ring-fixed-eta"}))
        ->capture_default_str();
    critical->add_option("--tol", cra.tol, "Convergence tolerance on the residual")->capture_default_str();
    critical->add_option("--max-iter", cra.max_iter, "Newton iteration cap")->capture_default_str();
    critical->add_option("--out", cra.out, "Configuration JSON path; the iteration trace lands beside it as CSV");

    detail::LemmasArgs la;
    CLI::App* lemmas = app.add_subcommand("lemmas", "Measure an inequality's empirical constant over seeded samples");
    lemmas->add_option("kind", la.kind, "One of separation, condensation, downgrade")
        ->required()
        ->check(CLI::IsMember({"separation", "condensation", "downgrade"}));
    lemmas->add_option("--samples", la.samples, "Sample points per separation scale")->capture_default_str();
    lemmas->add_option("--seed", la.seed, "Random seed (required: runs must be reproducible)")->required();
    lemmas->add_option("--n", la.n, "Ambient dimension")->capture_default_str();
    lemmas->add_option("--out", la.out, "Output path (stdout when absent)");
    lemmas->add_option("--format", la.format, "Output format")->check(CLI::IsMember({"json"}))->capture_default_str();

    detail::EnergyArgs ena;
    CLI::App* energy = app.add_subcommand("energy", "Monte Carlo energy of a configuration");
    energy->add_option("--config", ena.config, "Configuration JSON")->required();
    energy->add_option("--seed", ena.seed, "Random seed (required: runs must be reproducible)")->required();
    energy->add_option("--samples", ena.samples, "Monte Carlo sample count")->capture_default_str();
    energy->add_option("--out", ena.out, "Output path (stdout when absent)");
    energy->add_option("--format", ena.format, "Output format")->check(CLI::IsMember({"json"}))->capture_default_str();

    detail::ValidateArgs va;
    CLI::App* validate = app.add_subcommand("validate", "Admissibility report for a configuration");
    validate->add_option("--config", va.config, "Configuration JSON")->required();
    validate->add_option("--out", va.out, "Output path (stdout when absent)");
    validate->add_option("--format", va.format, "Output format")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) return app.exit(e, out, err);
        app.exit(e, out, err);
        return 2;
    }

    detail::RunContext ctx;
    int code = 2;
    try {
        if (constants->parsed()) {
            ctx.command = "constants";
            ctx.overrides = detail::collect_overrides(constants);
            code = detail::run_constants(ca, ctx, out);
        } else if (identities->parsed()) {
            ctx.command = "identities";
            ctx.overrides = detail::collect_overrides(identities);
            code = detail::run_identities(ia, ctx, out);
        } else if (expansion->parsed()) {
            ctx.command = "verify-expansion";
            ctx.overrides = detail::collect_overrides(expansion);
            code = detail::run_verify_expansion(ea, ctx, out);
        } else if (critical->parsed()) {
            ctx.command = "critical";
            ctx.config_path = cra.config;
            ctx.overrides = detail::collect_overrides(critical);
            code = detail::run_critical(cra, ctx, out);
        } else if (lemmas->parsed()) {
            ctx.command = "lemmas";
            ctx.seed = la.seed;
            ctx.overrides = detail::collect_overrides(lemmas);
            code = detail::run_lemmas(la, ctx, out);
        } else if (energy->parsed()) {
            ctx.command = "energy";
            ctx.config_path = ena.config;
            ctx.seed = ena.seed;
            ctx.overrides = detail::collect_overrides(energy);
            code = detail::run_energy(ena, ctx, out);
        } else if (validate->parsed()) {
            ctx.command = "validate";
            ctx.config_path = va.config;
            ctx.overrides = detail::collect_overrides(validate);
            code = detail::run_validate(va, ctx, out);
        }
    } catch (const std::exception& e) {
        err << "bubblab " << ctx.command << ": " << e.what() << "\n";
        return 2;
    }

    try {
        detail::write_manifest(ctx, code, out);
    } catch (const std::exception& e) {
        err << "bubblab " << ctx.command << ": " << e.what() << "\n";
        return 2;
    }
    return code;
}

}  // namespace bubblab::cli
