#pragma once

// Hypersurfaces M^d in R^{d+1}: unit normal, principal curvatures as the
// eigenvalues of the shape operator S = -d(nu), elementary symmetric means, the
// equicurvature residual e1^2 - 4 e2 (= d^2 H^2 - 2R) and grid scans for
// equicurved and umbilic points.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "ckl/coeffs.hpp"
#include "ckl/error.hpp"
#include "ckl/linalg.hpp"
#include "ckl/manifold.hpp"
#include "ckl/operator.hpp"
#include "ckl/parallel.hpp"

namespace ckl {

struct ShapeData {
    Vec normal;                        // unit normal in R^{d+1} (empty for synthetic data)
    Vec principal_curvatures;          // descending
    std::vector<Vec> principal_directions;  // unit ambient vectors
    Mat b;                             // <X_ij, nu> in chart coordinates
    Mat metric;
    double e1 = 0.0;
    double e2 = 0.0;

    [[nodiscard]] std::size_t dim() const noexcept { return principal_curvatures.size(); }

    static ShapeData from_curvatures(Vec kappa) {
        std::sort(kappa.begin(), kappa.end(), std::greater<>());
        ShapeData s;
        s.principal_curvatures = std::move(kappa);
        s.refresh_symmetric();
        return s;
    }

    void refresh_symmetric() {
        e1 = 0.0;
        e2 = 0.0;
        for (std::size_t i = 0; i < dim(); ++i) {
            e1 += principal_curvatures[i];
            for (std::size_t j = i + 1; j < dim(); ++j) e2 += principal_curvatures[i] * principal_curvatures[j];
        }
    }
};

/// Normal N_k = (-1)^{k+d} det(J without row k): the generalized cross product
/// of the Jacobian columns, so the orientation follows the chart.
inline Vec chart_normal(const Mat& jac) {
    const std::size_t n = jac.rows(), d = jac.cols();
    if (n != d + 1) throw DomainError("chart_normal: not a hypersurface");
    Vec nu(n);
    for (std::size_t k = 0; k < n; ++k) {
        Mat minor(d, d);
        for (std::size_t r = 0, rr = 0; r < n; ++r) {
            if (r == k) continue;
            for (std::size_t c = 0; c < d; ++c) minor(rr, c) = jac(r, c);
            ++rr;
        }
        nu[k] = ((k + d) % 2 ? -1.0 : 1.0) * determinant(minor);
    }
    const double len = norm(nu);
    if (!(len > 0)) throw NumericalError("degenerate chart: zero normal");
    for (double& v : nu) v /= len;
    return nu;
}

inline ShapeData shape_from_jet(const EmbeddingJet& jet) {
    const std::size_t d = jet.jac.cols();
    ShapeData s;
    s.metric = metric_from_jacobian(jet.jac);
    s.normal = chart_normal(jet.jac);
    s.b = Mat(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) s.b(i, j) = dot(jet.second(i, j), s.normal);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i + 1; j < d; ++j) {
            const double m = 0.5 * (s.b(i, j) + s.b(j, i));
            s.b(i, j) = s.b(j, i) = m;
        }
    const EigenResult ev = generalized_eigen(s.b, s.metric);
    s.principal_curvatures = ev.values;
    for (std::size_t i = 0; i < d; ++i) s.principal_directions.push_back(matvec(jet.jac, ev.vectors.col(i)));
    s.refresh_symmetric();
    return s;
}

inline ShapeData shape_at(const EmbeddedManifold& m, const ChartPoint& p) {
    if (m.ambient_dim() != m.dim() + 1) throw DomainError("shape_at: manifold is not a hypersurface");
    return shape_from_jet(m.jet(p));
}

/// e_i(kappa) by the recursion e_j <- e_j + k e_{j-1}.
inline double elementary_symmetric(std::span<const double> kappa, int i) {
    std::vector<double> e(kappa.size() + 1, 0.0);
    e[0] = 1.0;
    for (double k : kappa)
        for (std::size_t j = kappa.size(); j >= 1; --j) e[j] += k * e[j - 1];
    return e[std::size_t(i)];
}

/// H_i = e_i(kappa) / C(d, i).
inline double mean_curvatures(const ShapeData& sd, int i) {
    const int d = int(sd.dim());
    if (i < 1 || i > d) throw DomainError("mean_curvatures: i must be in 1..d");
    return elementary_symmetric(sd.principal_curvatures, i) / detail::binomial(d, i);
}

inline double equicurvature_residual(const ShapeData& sd) { return sd.e1 * sd.e1 - 4.0 * sd.e2; }

inline double umbilic_spread(const ShapeData& sd) {
    return sd.principal_curvatures.front() - sd.principal_curvatures.back();
}

enum class PointClass { flat, umbilic, equicurved, generic };

inline const char* to_string(PointClass c) {
    switch (c) {
        case PointClass::flat: return "flat";
        case PointClass::umbilic: return "umbilic";
        case PointClass::equicurved: return "equicurved";
        default: return "generic";
    }
}

/// Relative scales for the equicurvature and umbilic thresholds:
/// tol_eq = eq * (1 + e1^2), tol_umb = umb * (1 + |kappa_1|).
struct Thresholds {
    double eq = 1e-6;
    double umb = 1e-6;

    [[nodiscard]] double tol_eq(const ShapeData& s) const { return eq * (1 + s.e1 * s.e1); }
    [[nodiscard]] double tol_umb(const ShapeData& s) const {
        return umb * (1 + std::abs(s.principal_curvatures.front()));
    }
};

struct EquicurvatureResult {
    ChartPoint point;
    Vec ambient;
    Vec kappa;
    double e1 = 0.0, e2 = 0.0;
    double residual = 0.0;
    double spread = 0.0;
    PointClass classification = PointClass::generic;
    bool flat = false, umbilic = false, equicurved = false;
};

inline EquicurvatureResult classify(const ChartPoint& p, Vec ambient, const ShapeData& s, const Thresholds& th) {
    EquicurvatureResult r;
    r.point = p;
    r.ambient = std::move(ambient);
    r.kappa = s.principal_curvatures;
    r.e1 = s.e1;
    r.e2 = s.e2;
    r.residual = equicurvature_residual(s);
    r.spread = umbilic_spread(s);
    double kmax = 0.0;
    for (double k : s.principal_curvatures) kmax = std::max(kmax, std::abs(k));
    r.flat = kmax <= th.tol_umb(s);
    r.umbilic = r.flat || r.spread <= th.tol_umb(s);
    r.equicurved = r.flat || std::abs(r.residual) <= th.tol_eq(s) || (s.dim() == 2 && r.umbilic);
    r.classification = r.flat      ? PointClass::flat
                       : r.umbilic ? PointClass::umbilic
                       : r.equicurved ? PointClass::equicurved
                                      : PointClass::generic;
    return r;
}

struct ScanResult {
    std::vector<std::size_t> grid_shape;
    std::vector<EquicurvatureResult> results;
    std::vector<EquicurvatureResult> zero_set;  // refined zeros and exact-zero nodes, all with |residual| < tol_eq
};

/// Parses "200x100" into per-axis cell counts.
inline std::vector<std::size_t> parse_grid(const std::string& text, std::size_t d) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, 'x')) {
        std::size_t used = 0;
        int v = 0;
        try {
            v = std::stoi(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != item.size()) throw DomainError("field 'grid': cannot parse '" + text + "'");
        if (v < 2) throw DomainError("field 'grid': every dimension must be >= 2");
        out.push_back(std::size_t(v));
    }
    if (out.size() != d)
        throw DomainError("field 'grid': expected " + std::to_string(d) + " dimensions, got '" + text + "'");
    return out;
}

namespace detail {

inline constexpr double kExactZero = 1e-12;

struct ScanNode {
    bool valid = false;
    EquicurvatureResult r;
};

inline bool shape_result(const EmbeddedManifold& m, const ChartPoint& p, const Thresholds& th,
                         EquicurvatureResult& out) {
    try {
        const EmbeddingJet jet = m.jet(p.chart, p.coords);
        out = classify(p, jet.x, shape_from_jet(jet), th);
        return std::isfinite(out.residual);
    } catch (const NumericalError&) {
        return false;
    }
}

// Pattern search on |residual| starting at p with initial step h per axis.
inline bool refine_minimum(const EmbeddedManifold& m, ChartPoint p, Vec h, const Thresholds& th,
                           EquicurvatureResult& best) {
    if (!shape_result(m, p, th, best)) return false;
    const Box& dom = m.chart(p.chart).domain;
    const std::size_t d = m.dim();
    for (int it = 0; it < 400; ++it) {
        bool moved = false;
        for (std::size_t i = 0; i < d && !moved; ++i)
            for (int sgn = -1; sgn <= 1; sgn += 2) {
                ChartPoint q = best.point;
                q.coords[i] += sgn * h[i];
                dom.wrap(q.coords);
                if (!dom.contains(q.coords)) continue;
                EquicurvatureResult r;
                if (shape_result(m, q, th, r) && std::abs(r.residual) < std::abs(best.residual)) {
                    best = r;
                    moved = true;
                    break;
                }
            }
        if (!moved) {
            double hmax = 0.0;
            for (double& v : h) {
                v *= 0.5;
                hmax = std::max(hmax, v);
            }
            if (hmax < 1e-10) break;
        }
    }
    return true;
}

// Bisection on the residual along a chart segment with a sign change.
inline bool bisect_edge(const EmbeddedManifold& m, const EquicurvatureResult& a, const EquicurvatureResult& b,
                        const Thresholds& th, EquicurvatureResult& out) {
    Vec lo = a.point.coords, hi = b.point.coords;
    double rlo = a.residual;
    const std::size_t chart = a.point.chart;
    for (int it = 0; it < 60; ++it) {
        Vec mid(lo.size());
        double span = 0.0;
        for (std::size_t i = 0; i < lo.size(); ++i) {
            mid[i] = 0.5 * (lo[i] + hi[i]);
            span = std::max(span, std::abs(hi[i] - lo[i]));
        }
        EquicurvatureResult r;
        if (!shape_result(m, {chart, mid}, th, r)) return false;
        out = r;
        if (span < 1e-8 || r.residual == 0.0) return true;
        if ((r.residual < 0) == (rlo < 0)) {
            lo = mid;
            rlo = r.residual;
        } else {
            hi = mid;
        }
    }
    return true;
}

}  // namespace detail

/// Residual and class at every grid node of every chart, plus refined zeros.
/// `cells` gives the number of cells per axis: ordinary axes carry cells+1
/// vertices (ends included), periodic axes carry `cells` nodes. Nodes where the
/// chart is degenerate are skipped.
inline ScanResult scan_equicurved(const EmbeddedManifold& m, const std::vector<std::size_t>& cells,
                                  const Thresholds& th = {}) {
    if (m.ambient_dim() != m.dim() + 1) throw DomainError("scan_equicurved: manifold is not a hypersurface");
    const std::size_t d = m.dim();
    if (cells.size() != d) throw DomainError("scan_equicurved: grid dimension mismatch");
    ScanResult out;
    out.grid_shape = cells;
    std::vector<EquicurvatureResult> refined;

    for (std::size_t c = 0; c < m.charts().size(); ++c) {
        const Box& dom = m.chart(c).domain;
        std::vector<std::size_t> counts(d);
        Vec step(d);
        for (std::size_t i = 0; i < d; ++i) {
            counts[i] = dom.periodic[i] ? cells[i] : cells[i] + 1;
            step[i] = dom.width(i) / double(cells[i]);
        }
        std::size_t total = 1;
        for (std::size_t k : counts) total *= k;
        std::vector<detail::ScanNode> nodes(total);
        auto coords_of = [&](std::size_t t) {
            Vec s(d);
            std::vector<std::size_t> k(d);
            for (std::size_t i = d; i-- > 0;) {
                k[i] = t % counts[i];
                t /= counts[i];
                s[i] = dom.lo[i] + step[i] * double(k[i]);
                if (!dom.periodic[i] && k[i] == counts[i] - 1) s[i] = dom.hi[i];
            }
            return std::make_pair(s, k);
        };
        parallel_chunks(total, 256, [&](std::size_t, std::size_t b, std::size_t e) {
            for (std::size_t t = b; t < e; ++t) {
                const Vec s = coords_of(t).first;
                nodes[t].valid = detail::shape_result(m, {c, s}, th, nodes[t].r);
            }
        });
        // neighbours along each axis (periodic wrap)
        auto neighbour = [&](std::size_t t, std::size_t axis, int dir) -> std::ptrdiff_t {
            std::vector<std::size_t> k = coords_of(t).second;
            const std::ptrdiff_t v = std::ptrdiff_t(k[axis]) + dir;
            if (v < 0 || v >= std::ptrdiff_t(counts[axis])) {
                if (!dom.periodic[axis]) return -1;
                k[axis] = std::size_t((v + std::ptrdiff_t(counts[axis])) % std::ptrdiff_t(counts[axis]));
            } else {
                k[axis] = std::size_t(v);
            }
            std::size_t idx = 0;
            for (std::size_t i = 0; i < d; ++i) idx = idx * counts[i] + k[i];
            return std::ptrdiff_t(idx);
        };

        for (std::size_t t = 0; t < total; ++t) {
            if (!nodes[t].valid) continue;
            const EquicurvatureResult& r = nodes[t].r;
            out.results.push_back(r);
            const ShapeData sd = ShapeData::from_curvatures(r.kappa);
            const double tol = th.tol_eq(sd);
            // interior local minimum of |residual|: zoom in
            bool interior = true, local_min = true;
            for (std::size_t i = 0; i < d && interior; ++i)
                for (int dir = -1; dir <= 1; dir += 2) {
                    const std::ptrdiff_t nb = neighbour(t, i, dir);
                    if (nb < 0 || !nodes[std::size_t(nb)].valid) {
                        interior = false;
                        break;
                    }
                    if (std::abs(nodes[std::size_t(nb)].r.residual) < std::abs(r.residual)) local_min = false;
                }
            if (interior && local_min && std::abs(r.residual) < 1e3 * tol && std::abs(r.residual) > detail::kExactZero * (1 + r.e1 * r.e1)) {
                EquicurvatureResult best;
                Vec h(d);
                for (std::size_t i = 0; i < d; ++i) h[i] = 0.5 * step[i];
                if (detail::refine_minimum(m, r.point, h, th, best) &&
                    std::abs(best.residual) < th.tol_eq(ShapeData::from_curvatures(best.kappa)))
                    refined.push_back(best);
            }
            // sign changes along forward edges
            for (std::size_t i = 0; i < d; ++i) {
                const std::ptrdiff_t nb = neighbour(t, i, +1);
                if (nb < 0 || !nodes[std::size_t(nb)].valid) continue;
                const EquicurvatureResult& q = nodes[std::size_t(nb)].r;
                if ((r.residual < 0) == (q.residual < 0) || r.residual == 0.0 || q.residual == 0.0) continue;
                // only edges that do not wrap around the period
                if (dom.periodic[i] && q.point.coords[i] < r.point.coords[i]) continue;
                EquicurvatureResult z;
                if (detail::bisect_edge(m, r, q, th, z) &&
                    std::abs(z.residual) < th.tol_eq(ShapeData::from_curvatures(z.kappa)))
                    refined.push_back(z);
            }
        }
    }
    // Zeros are the refined points plus nodes whose residual vanishes to
    // rounding. Nodes that merely sit inside the tolerance band are left out:
    // around an isolated umbilic the band is a disc of radius ~ tol^{1/4}.
    const std::size_t node_count = out.results.size();
    for (EquicurvatureResult& r : refined) out.results.push_back(r);
    for (std::size_t i = 0; i < out.results.size(); ++i) {
        const EquicurvatureResult& r = out.results[i];
        if (!(std::abs(r.residual) < th.tol_eq(ShapeData::from_curvatures(r.kappa)))) continue;
        if (i < node_count && !(std::abs(r.residual) <= detail::kExactZero * (1 + r.e1 * r.e1))) continue;
        bool dup = false;
        for (EquicurvatureResult& z : out.zero_set)
            if (dist_sq(z.ambient, r.ambient) < 1e-14) {
                dup = true;
                if (std::abs(r.residual) < std::abs(z.residual)) z = r;
                break;
            }
        if (!dup) out.zero_set.push_back(r);
    }
    return out;
}

enum class Implication { not_applicable, holds, violated };

inline const char* to_string(Implication i) {
    switch (i) {
        case Implication::holds: return "holds";
        case Implication::violated: return "violated";
        default: return "not applicable";
    }
}

struct PropositionReport {
    // (i) equicurved and minimal, (ii) equicurved and scalar-flat,
    // (iii) d >= 3, equicurved and umbilic; each implies all kappa vanish
    std::array<Implication, 3> implications{};
    [[nodiscard]] bool pass() const {
        for (Implication i : implications)
            if (i == Implication::violated) return false;
        return true;
    }
    [[nodiscard]] int exercised() const {
        int n = 0;
        for (Implication i : implications)
            if (i != Implication::not_applicable) ++n;
        return n;
    }
};

inline PropositionReport check_propositions(const ShapeData& sd, double tol = 1e-6) {
    PropositionReport r;
    const double res = equicurvature_residual(sd);
    bool all_zero = true;
    for (double k : sd.principal_curvatures) all_zero = all_zero && std::abs(k) <= tol;
    const bool eq = std::abs(res) <= tol;
    const bool umbilic = umbilic_spread(sd) <= tol;
    auto judge = [&](bool premise) {
        if (!premise) return Implication::not_applicable;
        return all_zero ? Implication::holds : Implication::violated;
    };
    r.implications[0] = judge(eq && std::abs(sd.e1) <= tol);
    r.implications[1] = judge(eq && std::abs(sd.e2) <= tol);
    r.implications[2] = sd.dim() >= 3 ? judge(eq && umbilic) : Implication::not_applicable;
    return r;
}

struct LimitCriterionReport {
    double limit = 0.0;       // extrapolated (f(x) - K_eps f(x)) / eps at eps -> 0
    double laplacian = 0.0;   // Delta f(x)
    double gap = 0.0;         // |limit - laplacian|
    double rel_err = 0.0;
    bool absolute = false;    // |Delta f| < 1e-3, so the gap is judged absolutely
    bool pass = false;
};

/// The limit of (f(x) - K_eps f(x)) / eps equals Delta f(x) exactly at equicurved
/// points; elsewhere it is off by (f/4)(d^2 H^2 - 2R).
inline LimitCriterionReport limit_criterion_check(const EmbeddedManifold& m, const ScalarField& f, const ChartPoint& x,
                                                  const EpsLadder& ladder, double rel_tol = 0.02,
                                                  double abs_tol = 1e-3) {
    const std::size_t n = ladder.samples.size();
    if (n < 4) throw DomainError("limit_criterion_check: ladder needs at least 4 samples");
    const double fx = f(m, x.chart, x.coords);
    Mat a(n, 3);
    Vec y(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double e = ladder.samples[i].eps;
        a(i, 0) = 1.0;
        a(i, 1) = e;
        a(i, 2) = e * e;
        y[i] = (fx - ladder.samples[i].value) / e;
    }
    LimitCriterionReport r;
    r.limit = least_squares(a, y).coefficients[0];
    r.laplacian = laplace_beltrami(m, f, x);
    r.gap = std::abs(r.limit - r.laplacian);
    r.absolute = std::abs(r.laplacian) < abs_tol;
    r.rel_err = r.laplacian != 0.0 ? r.gap / std::abs(r.laplacian) : r.gap;
    r.pass = r.absolute ? r.gap <= abs_tol : r.rel_err <= rel_tol;
    return r;
}

}  // namespace ckl
