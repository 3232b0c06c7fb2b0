#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <queue>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bubblab/geometry.hpp"
#include "bubblab/parallel.hpp"
#include "bubblab/rng.hpp"
#include "bubblab/special.hpp"

namespace bubblab {

struct QuadratureSpec {
    double rel_tol = 1e-8;
    double abs_tol = 0.0;
    // Extra stopping rule relative to the integral's absolute mass int |f|:
    // a cancelling integrand cannot be resolved more finely than round-off on
    // its mass, so rel_tol alone would subdivide forever. The default is a
    // few hundred ulps, safely above the error model's own 50*eps round-off
    // floor; it never loosens the rel_tol criterion for one-signed
    // integrands, where mass and value coincide.
    double mass_rel_tol = 5e-14;
    // Number of panel bisections an adaptive run may spend before giving up.
    int max_subdivisions = 4000;
    // Semi-infinite ranges are split at this radius; the tail is mapped back to
    // a finite interval with r -> 1/r, so no mass is truncated.
    double truncation_radius = 1.0;
    std::size_t mc_samples = 1000000;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(rel_tol >= 0.0) || !(abs_tol >= 0.0)) throw std::invalid_argument("QuadratureSpec: tolerances must be non-negative");
        if (!(mass_rel_tol >= 0.0) || mass_rel_tol > 1e-2)
            throw std::invalid_argument("QuadratureSpec: mass_rel_tol must lie in [0, 1e-2]");
        if (rel_tol == 0.0 && abs_tol == 0.0) throw std::invalid_argument("QuadratureSpec: rel_tol and abs_tol cannot both be zero");
        if (max_subdivisions < 1) throw std::invalid_argument("QuadratureSpec: max_subdivisions must be >= 1");
        if (!(truncation_radius > 0.0)) throw std::invalid_argument("QuadratureSpec: truncation_radius must be positive");
        if (mc_samples < 1000) throw std::invalid_argument("QuadratureSpec: mc_samples must be >= 1000");
    }
};

// Thrown when an adaptive run exhausts its subdivision budget or meets a
// non-finite integrand value; carries the best value so far for diagnostics.
class quadrature_error : public std::runtime_error {
  public:
    quadrature_error(const std::string& what, double partial, double estimate)
        : std::runtime_error(what), partial_value(partial), error_estimate(estimate) {}
    double partial_value;
    double error_estimate;
};

struct IntegralValue {
    double value = 0.0;
    double error = 0.0;
    std::size_t evaluations = 0;
};

namespace detail {

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1] (positive half; the rule is
// symmetric). Index 7 is the centre node.
inline constexpr double kGkNodes[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr double kKronrodWeights[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
// Gauss weights attach to nodes 1, 3, 5 and the centre.
inline constexpr double kGaussWeights[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct PanelResult {
    double value = 0.0;
    double error = 0.0;
    double resabs = 0.0;  // panel estimate of int |f|
};

template <typename F>
PanelResult gk15(const F& f, double a, double b, std::size_t& evaluations) {
    const double h = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    double fv[15];
    for (int i = 0; i < 7; ++i) {
        fv[i] = f(mid - h * kGkNodes[i]);
        fv[14 - i] = f(mid + h * kGkNodes[i]);
    }
    fv[7] = f(mid);
    evaluations += 15;
    for (int i = 0; i < 15; ++i) {
        if (!std::isfinite(fv[i])) {
            const double x = mid + h * ((i < 7) ? -kGkNodes[i] : (i > 7 ? kGkNodes[14 - i] : 0.0));
            throw quadrature_error("integrand not finite at x = " + std::to_string(x), 0.0, std::numeric_limits<double>::infinity());
        }
    }

    double resk = kKronrodWeights[7] * fv[7];
    double resabs = std::abs(resk);
    for (int i = 0; i < 7; ++i) {
        resk += kKronrodWeights[i] * (fv[i] + fv[14 - i]);
        resabs += kKronrodWeights[i] * (std::abs(fv[i]) + std::abs(fv[14 - i]));
    }
    double resg = kGaussWeights[3] * fv[7];
    for (int i = 0; i < 3; ++i) resg += kGaussWeights[i] * (fv[2 * i + 1] + fv[13 - 2 * i]);

    const double reskh = 0.5 * resk;
    double resasc = kKronrodWeights[7] * std::abs(fv[7] - reskh);
    for (int i = 0; i < 7; ++i)
        resasc += kKronrodWeights[i] * (std::abs(fv[i] - reskh) + std::abs(fv[14 - i] - reskh));

    const double habs = std::abs(h);
    resabs *= habs;
    resasc *= habs;
    double err = std::abs(resk - resg) * habs;
    // Standard Kronrod error model: sharpen the raw difference when the panel
    // is smooth, and never report below the round-off floor of the panel sum.
    if (resasc != 0.0 && err != 0.0) err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
    const double eps = std::numeric_limits<double>::epsilon();
    if (resabs > std::numeric_limits<double>::min() / (50.0 * eps)) err = std::max(err, 50.0 * eps * resabs);
    return {resk * h, err, resabs};
}

struct Segment {
    std::function<double(double)> f;
    double a = 0.0;
    double b = 0.0;
};

// Globally adaptive bisection across one or more segments: the panel with the
// largest error estimate splits first, regardless of which segment owns it.
inline IntegralValue adaptive_segments(const std::vector<Segment>& segments, const QuadratureSpec& spec) {
    spec.validate();
    struct Panel {
        double a, b, value, error, resabs;
        const std::function<double(double)>* f;
        bool operator<(const Panel& o) const { return error < o.error; }
    };

    IntegralValue total;
    std::priority_queue<Panel> heap;
    double value = 0.0, error = 0.0, mass = 0.0;
    for (const auto& seg : segments) {
        if (!(seg.b > seg.a)) continue;
        const PanelResult r = gk15(seg.f, seg.a, seg.b, total.evaluations);
        heap.push({seg.a, seg.b, r.value, r.error, r.resabs, &seg.f});
        value += r.value;
        error += r.error;
        mass += r.resabs;
    }

    int splits = 0;
    while (!heap.empty()) {
        const double tol =
            std::max({spec.abs_tol, spec.rel_tol * std::abs(value), spec.mass_rel_tol * mass});
        if (error <= tol) break;
        if (splits >= spec.max_subdivisions) {
            throw quadrature_error("adaptive quadrature did not converge within " + std::to_string(spec.max_subdivisions) +
                                       " subdivisions (partial value " + std::to_string(value) + ", estimated error " +
                                       std::to_string(error) + ")",
                                   value, error);
        }
        const Panel worst = heap.top();
        // A panel at the width of representable numbers cannot be refined;
        // retire it and keep its error on the books.
        if (!(worst.b - worst.a > 8.0 * std::numeric_limits<double>::epsilon() * (std::abs(worst.a) + std::abs(worst.b)) +
                                      std::numeric_limits<double>::min())) {
            heap.pop();
            if (heap.empty()) {
                throw quadrature_error("adaptive quadrature stalled on round-off limited panels (partial value " +
                                           std::to_string(value) + ")",
                                       value, error);
            }
            continue;
        }
        heap.pop();
        ++splits;
        const double mid = 0.5 * (worst.a + worst.b);
        const PanelResult left = gk15(*worst.f, worst.a, mid, total.evaluations);
        const PanelResult right = gk15(*worst.f, mid, worst.b, total.evaluations);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        mass += left.resabs + right.resabs - worst.resabs;
        heap.push({worst.a, mid, left.value, left.error, left.resabs, worst.f});
        heap.push({mid, worst.b, right.value, right.error, right.resabs, worst.f});
    }
    total.value = value;
    total.error = error;
    return total;
}

// Multiplies g by an r^k volume factor without manufacturing 0 * inf at radii
// where g has already underflowed to zero.
inline double guarded_power_product(double g, double r, double k) {
    if (g == 0.0) return 0.0;
    const double p = std::pow(r, k);
    const double v = g * p;
    if (!std::isfinite(v) && std::abs(g) < 1e-100) return 0.0;
    return v;
}

// Builds the segment list for int_{r_lo}^{r_hi} F(r) dr where F(r) already
// contains the volume factor. An infinite upper limit becomes a head segment
// up to the truncation radius plus an exactly transformed tail.
inline std::vector<Segment> radial_segments(const std::function<double(double)>& density_times_volume, double r_lo,
                                            double r_hi, const QuadratureSpec& spec) {
    if (!(r_lo >= 0.0)) throw std::invalid_argument("radial integration: r_lo must be >= 0");
    std::vector<Segment> segments;
    if (std::isinf(r_hi)) {
        const double split = std::max(spec.truncation_radius, r_lo);
        if (r_lo < split) segments.push_back({density_times_volume, r_lo, split});
        // Tail r in (split, inf) under u = 1/r: F(1/u) / u^2.
        const std::function<double(double)> inner = density_times_volume;
        segments.push_back({[inner](double u) {
                                if (!(u > 0.0)) return 0.0;
                                const double r = 1.0 / u;
                                if (!std::isfinite(r)) return 0.0;
                                const double fr = inner(r);
                                return guarded_power_product(fr, r, 2.0);
                            },
                            0.0, 1.0 / split});
    } else {
        if (!(r_hi >= r_lo)) throw std::invalid_argument("radial integration: r_hi must be >= r_lo");
        if (r_hi > r_lo) segments.push_back({density_times_volume, r_lo, r_hi});
    }
    return segments;
}

}  // namespace detail

// omega_dim * int_{r_lo}^{r_hi} g(r) r^{dim-1} dr for a radially symmetric
// integrand on R^dim. r_hi may be infinite; the tail then converges exactly
// through the reciprocal substitution, which requires g to decay faster than
// r^{-dim} (slower decay shows up as a non-convergence error).
inline IntegralValue integrate_radial(const std::function<double(double)>& g, int dim, const QuadratureSpec& spec,
                                      double r_lo = 0.0, double r_hi = std::numeric_limits<double>::infinity()) {
    if (dim < 1) throw std::invalid_argument("integrate_radial: dim must be >= 1");
    spec.validate();
    const double k = static_cast<double>(dim - 1);
    const std::function<double(double)> F = [g, k](double r) {
        const double gv = g(r);
        return detail::guarded_power_product(gv, r, k);
    };
    auto segments = detail::radial_segments(F, r_lo, r_hi, spec);
    IntegralValue out = detail::adaptive_segments(segments, spec);
    const double area = unit_sphere_measure(dim);
    out.value *= area;
    out.error *= area;
    return out;
}

// One-dimensional adaptive quadrature over a finite interval; the building
// block exposed for callers that assemble their own angular factorisations.
inline IntegralValue integrate_interval(const std::function<double(double)>& f, double a, double b,
                                        const QuadratureSpec& spec) {
    if (!(b >= a)) throw std::invalid_argument("integrate_interval: b must be >= a");
    std::vector<detail::Segment> segments;
    if (b > a) segments.push_back({f, a, b});
    return detail::adaptive_segments(segments, spec);
}

// omega_{dim-1} * int int g(r, theta) sin^{dim-2}(theta) r^{dim-1} dtheta dr
// for integrands on R^dim symmetric about an axis; theta is the polar angle
// against that axis. The inner angular integral is resolved adaptively at
// every radial node with a tolerance one decade tighter than the outer one.
inline IntegralValue integrate_axisym(const std::function<double(double, double)>& g, int dim, const QuadratureSpec& spec,
                                      double r_lo = 0.0, double r_hi = std::numeric_limits<double>::infinity()) {
    if (dim < 2) throw std::invalid_argument("integrate_axisym: dim must be >= 2");
    spec.validate();
    QuadratureSpec inner_spec = spec;
    inner_spec.rel_tol = spec.rel_tol * 0.1;
    // The inner slice must resolve to relative accuracy at every radius: an
    // absolute cutoff would let far-out slices return a biased one-panel
    // estimate, and the tail substitution amplifies that bias by 1/u^2.
    inner_spec.abs_tol = 0.0;
    inner_spec.max_subdivisions = std::min(spec.max_subdivisions, 400);

    const double sin_power = static_cast<double>(dim - 2);
    const double k = static_cast<double>(dim - 1);
    std::size_t inner_evaluations = 0;
    const std::function<double(double)> F = [g, sin_power, k, inner_spec, &inner_evaluations](double r) {
        const std::function<double(double)> slice = [g, sin_power, r](double theta) {
            const double s = std::sin(theta);
            const double w = (sin_power == 0.0) ? 1.0 : std::pow(s, sin_power);
            return g(r, theta) * w;
        };
        IntegralValue inner = integrate_interval(slice, 0.0, std::numbers::pi, inner_spec);
        inner_evaluations += inner.evaluations;
        return detail::guarded_power_product(inner.value, r, k);
    };
    auto segments = detail::radial_segments(F, r_lo, r_hi, spec);
    IntegralValue out = detail::adaptive_segments(segments, spec);
    out.evaluations += inner_evaluations;
    const double area = unit_sphere_measure(dim - 1);
    out.value *= area;
    out.error *= area;
    return out;
}

// Importance-sampling mixture: heavy-tailed profile components centred on the
// regions that carry mass, plus one broad component that keeps the density
// bounded away from zero near the cluster. Weights must sum to one.
struct MixtureComponent {
    vec center;
    double scale = 1.0;
    double weight = 1.0;
};

struct ImportanceMixture {
    int dim = 0;
    std::vector<MixtureComponent> components;

    void validate() const {
        if (dim < 1) throw std::invalid_argument("ImportanceMixture: dim must be >= 1");
        if (components.empty()) throw std::invalid_argument("ImportanceMixture: needs at least one component");
        double total = 0.0;
        for (const auto& c : components) {
            if (static_cast<int>(c.center.size()) != dim) throw std::invalid_argument("ImportanceMixture: component dimension mismatch");
            if (!(c.scale > 0.0)) throw std::invalid_argument("ImportanceMixture: component scale must be positive");
            if (!(c.weight > 0.0)) throw std::invalid_argument("ImportanceMixture: component weight must be positive");
            total += c.weight;
        }
        if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("ImportanceMixture: weights must sum to 1");
    }

    // Component density (s / (s^2 + |y-c|^2))^dim normalised by the profile
    // mass, which is scale invariant.
    double density(const vec& y) const {
        const double mass = unit_profile_mass(dim);
        double q = 0.0;
        for (const auto& c : components) {
            const double d2 = dist_sq(y, c.center);
            q += c.weight * std::pow(c.scale / (c.scale * c.scale + d2), static_cast<double>(dim)) / mass;
        }
        return q;
    }

    vec sample(std::mt19937_64& eng) const {
        std::uniform_real_distribution<double> uniform(0.0, 1.0);
        double u = uniform(eng);
        std::size_t pick = components.size() - 1;
        for (std::size_t i = 0; i < components.size(); ++i) {
            if (u < components[i].weight) {
                pick = i;
                break;
            }
            u -= components[i].weight;
        }
        const auto& c = components[pick];
        // Radially, |y-c|^2 / (s^2 + |y-c|^2) is Beta(dim/2, dim/2) distributed.
        const double t = sample_beta(eng, 0.5 * dim, 0.5 * dim);
        const double radius = c.scale * std::sqrt(t / std::max(1.0 - t, std::numeric_limits<double>::min()));
        vec y = unit_sphere_dir(eng, dim);
        for (int i = 0; i < dim; ++i) y[static_cast<std::size_t>(i)] = c.center[static_cast<std::size_t>(i)] + radius * y[static_cast<std::size_t>(i)];
        return y;
    }

    static ImportanceMixture bubbles_with_broad(const std::vector<vec>& centers, const std::vector<double>& scales,
                                                double broad_weight = 0.1);
};

inline ImportanceMixture ImportanceMixture::bubbles_with_broad(const std::vector<vec>& centers,
                                                               const std::vector<double>& scales, double broad_weight) {
    if (centers.empty() || centers.size() != scales.size())
        throw std::invalid_argument("bubbles_with_broad: centers and scales must be non-empty and matched");
    if (!(broad_weight > 0.0 && broad_weight < 1.0)) throw std::invalid_argument("bubbles_with_broad: broad_weight must be in (0,1)");
    ImportanceMixture mix;
    mix.dim = static_cast<int>(centers.front().size());
    const double share = (1.0 - broad_weight) / static_cast<double>(centers.size());
    vec centroid(centers.front().size(), 0.0);
    for (const auto& c : centers) centroid = add(centroid, c);
    centroid = scaled(centroid, 1.0 / static_cast<double>(centers.size()));
    double spread = 1.0;
    for (const auto& c : centers) spread = std::max(spread, 2.0 * dist(c, centroid));
    for (std::size_t i = 0; i < centers.size(); ++i) mix.components.push_back({centers[i], scales[i], share});
    mix.components.push_back({centroid, spread, broad_weight});
    return mix;
}

struct McValue {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t samples = 0;
};

// Seed-deterministic Monte Carlo: samples are drawn in fixed-size batches with
// per-batch substreams, and batch sums are reduced in index order, so the
// result is bit-identical for a given seed regardless of the thread budget.
inline McValue integrate_mc(const std::function<double(const vec&)>& f, int dim, const QuadratureSpec& spec,
                            const ImportanceMixture& mixture) {
    spec.validate();
    mixture.validate();
    if (mixture.dim != dim) throw std::invalid_argument("integrate_mc: mixture dimension mismatch");

    constexpr std::size_t kBatch = 65536;
    const std::size_t n = spec.mc_samples;
    const std::size_t batches = (n + kBatch - 1) / kBatch;

    struct BatchSums {
        double sum = 0.0;
        double sum_sq = 0.0;
        bool bad_density = false;
        bool bad_value = false;
        double bad_at = 0.0;
    };
    const std::function<BatchSums(std::size_t)> run_batch = [&](std::size_t b) {
        BatchSums s;
        std::mt19937_64 eng = make_engine(spec.seed, b + 1);
        const std::size_t count = std::min(kBatch, n - b * kBatch);
        for (std::size_t i = 0; i < count; ++i) {
            const vec y = mixture.sample(eng);
            const double q = mixture.density(y);
            if (!(q > 0.0) || !std::isfinite(q)) {
                s.bad_density = true;
                return s;
            }
            const double fy = f(y);
            if (!std::isfinite(fy)) {
                s.bad_value = true;
                s.bad_at = norm(y);
                return s;
            }
            const double w = fy / q;
            s.sum += w;
            s.sum_sq += w * w;
        }
        return s;
    };

    const std::vector<BatchSums> partials = run_indexed<BatchSums>(batches, run_batch);
    double sum = 0.0, sum_sq = 0.0;
    for (const auto& p : partials) {
        if (p.bad_density) throw quadrature_error("importance mixture produced a zero or non-finite density at a sample", 0.0, 0.0);
        if (p.bad_value) throw quadrature_error("integrand not finite at a Monte Carlo sample (|y| = " + std::to_string(p.bad_at) + ")", 0.0, 0.0);
        sum += p.sum;
        sum_sq += p.sum_sq;
    }
    const double nd = static_cast<double>(n);
    const double mean = sum / nd;
    double variance = (sum_sq - sum * sum / nd) / std::max(nd - 1.0, 1.0);
    variance = std::max(variance, 0.0);
    return {mean, std::sqrt(variance / nd), n};
}

}  // namespace bubblab
