#pragma once

// The Gaussian integral operator
//   (K_eps f)(x) = int_M (4 pi eps)^{-d/2} exp(-|y - x|^2 / 4 eps) f(y) dV(y)
// by tensor-product quadrature over chart boxes (Gauss-Legendre on ordinary
// axes, trapezoid on periodic ones) and by Monte Carlo over dV.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ckl/error.hpp"
#include "ckl/linalg.hpp"
#include "ckl/manifold.hpp"
#include "ckl/parallel.hpp"

namespace ckl {

inline double k_eps(std::span<const double> x, std::span<const double> y, double eps, int d) {
    if (!(eps > 0)) throw DomainError("k_eps: eps must be > 0");
    return std::pow(4 * std::numbers::pi * eps, -0.5 * d) * std::exp(-dist_sq(x, y) / (4 * eps));
}

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on P_n.
inline std::pair<Vec, Vec> gauss_legendre(int n) {
    if (n < 1) throw DomainError("gauss_legendre: order must be >= 1");
    Vec x(n), w(n);
    auto legendre = [n](double z, double& dp) {
        double p0 = 1.0, p1 = z;
        for (int k = 2; k <= n; ++k) {
            const double p2 = ((2.0 * k - 1) * z * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        if (n == 1) p0 = 1.0;
        dp = n * (z * p1 - p0) / (z * z - 1.0);
        return p1;
    };
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            const double dz = legendre(z, dp) / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        legendre(z, dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    if (n % 2 == 1) x[n / 2] = 0.0;
    return {x, w};
}

struct QuadNode {
    std::size_t chart = 0;
    Vec coords;
    double weight = 0.0;  // coordinate weight; the volume element is applied at evaluation
};

/// Sub-box of one chart, integrated with `order` points per axis.
struct ChartBox {
    std::size_t chart = 0;
    Vec lo, hi;                       // hi may exceed the domain on periodic axes (wrapped on use)
    std::vector<bool> full_period;    // trapezoid rule over the whole period
};

struct QuadratureRule {
    std::vector<QuadNode> nodes;
    int order = 0;
    std::vector<ChartBox> boxes;
    std::optional<double> localized;   // chordal radius when restricted to a ball around x
    double m_delta = std::numeric_limits<double>::infinity();  // distance from x to the excised region
};

inline QuadratureRule rule_from_boxes(const EmbeddedManifold& m, std::vector<ChartBox> boxes, int order) {
    if (order < 2) throw DomainError("quadrature order must be >= 2");
    const auto [gx, gw] = gauss_legendre(order);
    QuadratureRule rule;
    rule.order = order;
    const std::size_t d = m.dim();
    for (const ChartBox& b : boxes) {
        const Box& dom = m.chart(b.chart).domain;
        std::vector<Vec> ax(d), aw(d);
        for (std::size_t i = 0; i < d; ++i) {
            const double w = b.hi[i] - b.lo[i];
            for (int k = 0; k < order; ++k) {
                if (b.full_period[i]) {
                    ax[i].push_back(b.lo[i] + w * (k + 0.5) / order);
                    aw[i].push_back(w / order);
                } else {
                    ax[i].push_back(b.lo[i] + 0.5 * w * (gx[k] + 1.0));
                    aw[i].push_back(0.5 * w * gw[k]);
                }
            }
        }
        std::size_t total = 1;
        for (std::size_t i = 0; i < d; ++i) total *= std::size_t(order);
        for (std::size_t t = 0; t < total; ++t) {
            std::size_t r = t;
            QuadNode node{b.chart, Vec(d), 1.0};
            for (std::size_t i = d; i-- > 0;) {
                const std::size_t k = r % std::size_t(order);
                r /= std::size_t(order);
                node.coords[i] = ax[i][k];
                node.weight *= aw[i][k];
            }
            dom.wrap(node.coords);
            rule.nodes.push_back(std::move(node));
        }
        rule.boxes.push_back(b);
    }
    return rule;
}

/// Tensor rule over the full domains of the covering charts.
inline QuadratureRule full_rule(const EmbeddedManifold& m, int order) {
    std::vector<ChartBox> boxes;
    for (std::size_t c : m.cover()) {
        const Box& dom = m.chart(c).domain;
        boxes.push_back({c, dom.lo, dom.hi, dom.periodic});
    }
    return rule_from_boxes(m, std::move(boxes), order);
}

/// y and sqrt(det g) * weight at every node.
struct NodeGeometry {
    std::vector<Vec> y;
    Vec dv;
};

inline NodeGeometry node_geometry(const EmbeddedManifold& m, const QuadratureRule& rule) {
    NodeGeometry g;
    g.y.resize(rule.nodes.size());
    g.dv.resize(rule.nodes.size());
    parallel_chunks(rule.nodes.size(), kChunk, [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            const QuadNode& n = rule.nodes[i];
            auto [y, jac] = m.jacobian(n.chart, n.coords);
            g.dv[i] = n.weight * quadrature_density(jac);
            g.y[i] = std::move(y);
        }
    });
    return g;
}

/// Volume of the region covered by the rule.
inline double rule_volume(const EmbeddedManifold& m, const QuadratureRule& rule) {
    const NodeGeometry g = node_geometry(m, rule);
    return parallel_sum(g.dv.size(), [&](std::size_t i) { return g.dv[i]; });
}

/// Localization radius min(delta, 8 sqrt(eps max(1, log(1/eps)))).
inline double localization_radius(const EmbeddedManifold& m, double eps) {
    return std::min(m.delta(), 8.0 * std::sqrt(eps * std::max(1.0, std::log(1.0 / eps))));
}

namespace detail {

inline std::size_t samples_per_axis(std::size_t d) {
    switch (d) {
        case 1: return 4097;
        case 2: return 257;
        case 3: return 41;
        default: return 13;
    }
}

// Calls visit(coords, index) on a vertex grid with counts[i] points on axis i
// spanning [lo_i, hi_i] (a single point sits at lo_i).
template <class Visit>
void visit_grid(std::span<const double> lo, std::span<const double> hi, const std::vector<std::size_t>& counts,
                Visit&& visit) {
    const std::size_t d = lo.size();
    std::size_t total = 1;
    for (std::size_t i = 0; i < d; ++i) total *= counts[i];
    Vec s(d);
    std::vector<std::size_t> k(d);
    for (std::size_t t = 0; t < total; ++t) {
        std::size_t r = t;
        for (std::size_t i = d; i-- > 0;) {
            k[i] = r % counts[i];
            r /= counts[i];
            s[i] = counts[i] == 1 ? lo[i] : lo[i] + (hi[i] - lo[i]) * double(k[i]) / double(counts[i] - 1);
        }
        visit(s, k);
    }
}

template <class Visit>
void visit_grid(std::span<const double> lo, std::span<const double> hi, std::size_t n, Visit&& visit) {
    visit_grid(lo, hi, std::vector<std::size_t>(lo.size(), n), std::forward<Visit>(visit));
}

// Smallest interval (possibly wrapping past hi) of a periodic axis that covers
// the marked sample indices; returns false when the marks span the period.
inline bool periodic_span(const std::vector<bool>& marked, std::size_t& first, std::size_t& count) {
    const std::size_t n = marked.size();
    std::size_t best_gap = 0, gap_end = 0, run = 0;
    // scan twice around the circle for the longest unmarked run
    for (std::size_t t = 0; t < 2 * n; ++t) {
        if (!marked[t % n]) {
            ++run;
            if (run > best_gap && run <= n) {
                best_gap = run;
                gap_end = t;
            }
        } else {
            run = 0;
        }
    }
    if (best_gap == 0) return false;
    first = (gap_end + 1) % n;
    count = n - best_gap;
    return true;
}

}  // namespace detail

/// Restricts the covering charts to boxes containing the chordal ball
/// |y - x| <= radius around the ambient point x. Each box comes from a coarse
/// sample of the chart refined once inside the first estimate.
inline QuadratureRule localized_rule(const EmbeddedManifold& m, std::span<const double> x, double radius,
                                     int order) {
    const std::size_t d = m.dim();
    const std::size_t ns = detail::samples_per_axis(d);
    std::vector<ChartBox> boxes;
    for (std::size_t c : m.cover()) {
        const Box& dom = m.chart(c).domain;
        Vec lo = dom.lo, hi = dom.hi;
        std::vector<bool> full(d, false);
        for (int pass = 0; pass < 2; ++pass) {
            // one period of samples on periodic axes, vertex grid elsewhere
            std::vector<std::vector<bool>> marked(d, std::vector<bool>(ns, false));
            bool any = false;
            double best = std::numeric_limits<double>::infinity();
            std::vector<std::size_t> best_k(d, 0);
            Vec slo = lo, shi = hi;
            for (std::size_t i = 0; i < d; ++i)
                if (full[i] || (pass == 0 && dom.periodic[i])) {
                    slo[i] = dom.lo[i];
                    shi[i] = dom.hi[i] - dom.width(i) / double(ns);
                }
            Vec q(d);
            detail::visit_grid(slo, shi, ns, [&](const Vec& s, const std::vector<std::size_t>& k) {
                q = s;
                dom.wrap(q);
                const double r2 = dist_sq(m.embed(c, q), x);
                if (r2 < best) {
                    best = r2;
                    best_k = k;
                }
                if (r2 <= radius * radius) {
                    any = true;
                    for (std::size_t i = 0; i < d; ++i) marked[i][k[i]] = true;
                }
            });
            if (!any)
                for (std::size_t i = 0; i < d; ++i) marked[i][best_k[i]] = true;
            Vec nlo(d), nhi(d);
            for (std::size_t i = 0; i < d; ++i) {
                const double step = (shi[i] - slo[i]) / double(ns - 1);
                const bool periodic_full_scan = dom.periodic[i] && (full[i] || pass == 0);
                if (full[i]) {
                    nlo[i] = dom.lo[i];
                    nhi[i] = dom.hi[i];
                    continue;
                }
                std::size_t first = 0, count = 0;
                if (periodic_full_scan) {
                    if (!detail::periodic_span(marked[i], first, count) || double(count + 4) * step >= dom.width(i)) {
                        full[i] = true;
                        nlo[i] = dom.lo[i];
                        nhi[i] = dom.hi[i];
                        continue;
                    }
                    nlo[i] = slo[i] + (double(first) - 2.0) * step;
                    nhi[i] = nlo[i] + (double(count) + 3.0) * step;
                } else {
                    std::size_t a = ns, b = 0;
                    for (std::size_t k = 0; k < ns; ++k)
                        if (marked[i][k]) { a = std::min(a, k); b = std::max(b, k); }
                    nlo[i] = slo[i] + (double(a) - 2.0) * step;
                    nhi[i] = slo[i] + (double(b) + 2.0) * step;
                    if (!dom.periodic[i]) {
                        nlo[i] = std::max(nlo[i], dom.lo[i]);
                        nhi[i] = std::min(nhi[i], dom.hi[i]);
                    }
                }
            }
            lo = nlo;
            hi = nhi;
        }
        boxes.push_back({c, lo, hi, full});
    }
    QuadratureRule rule = rule_from_boxes(m, boxes, order);
    rule.localized = radius;

    // distance from x to the faces where the ball region was cut out
    double m2 = std::numeric_limits<double>::infinity();
    const std::size_t nf = std::max<std::size_t>(9, detail::samples_per_axis(d > 1 ? d - 1 : 1) / 2);
    for (const ChartBox& b : rule.boxes) {
        const Box& dom = m.chart(b.chart).domain;
        for (std::size_t i = 0; i < d; ++i) {
            if (b.full_period[i]) continue;
            for (int side = 0; side < 2; ++side) {
                const double v = side ? b.hi[i] : b.lo[i];
                const bool on_edge = !dom.periodic[i] && (side ? v >= dom.hi[i] : v <= dom.lo[i]);
                if (on_edge && m.compact()) continue;
                Vec flo = b.lo, fhi = b.hi;
                flo[i] = fhi[i] = v;
                std::vector<std::size_t> counts(d, nf);
                counts[i] = 1;
                Vec q(d);
                detail::visit_grid(flo, fhi, counts, [&](const Vec& s, const std::vector<std::size_t>&) {
                    q = s;
                    dom.wrap(q);
                    m2 = std::min(m2, dist_sq(m.embed(b.chart, q), x));
                });
            }
        }
    }
    rule.m_delta = std::sqrt(m2);
    return rule;
}

struct TailEstimate {
    double m_delta = 0.0;
    double bound = 0.0;  // (4 pi eps)^{-d/2} exp(-m^2/4eps) Vol(M) sup|f|
};

inline TailEstimate tail_estimate(double m_delta, double eps, int d, double volume, double f_sup) {
    if (!(m_delta > 0)) throw DomainError("tail_estimate: m_delta must be > 0");
    if (!(eps > 0)) throw DomainError("tail_estimate: eps must be > 0");
    TailEstimate t{m_delta, 0.0};
    if (std::isinf(m_delta)) return t;
    t.bound = std::pow(4 * std::numbers::pi * eps, -0.5 * d) * std::exp(-m_delta * m_delta / (4 * eps)) * volume * f_sup;
    return t;
}

struct OperatorValue {
    double value = 0.0;
    double tail_bound = 0.0;
};

/// Volume and sup|f| over the covering charts, used by the far-field bound.
struct GlobalStats {
    double volume = 0.0;
    double f_sup = 0.0;
};

inline GlobalStats global_stats(const EmbeddedManifold& m, const ScalarField& f, int order = 64) {
    const QuadratureRule rule = full_rule(m, order);
    const NodeGeometry g = node_geometry(m, rule);
    GlobalStats s;
    s.volume = parallel_sum(g.dv.size(), [&](std::size_t i) { return g.dv[i]; });
    std::vector<double> sup((rule.nodes.size() + kChunk - 1) / kChunk, 0.0);
    parallel_chunks(rule.nodes.size(), kChunk, [&](std::size_t c, std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i)
            sup[c] = std::max(sup[c], std::abs(f(rule.nodes[i].chart, rule.nodes[i].coords, g.y[i])));
    });
    for (double v : sup) s.f_sup = std::max(s.f_sup, v);
    return s;
}

inline OperatorValue apply_operator(const EmbeddedManifold& m, const ScalarField& f, const ChartPoint& x, double eps,
                                    const QuadratureRule& rule, const GlobalStats* stats = nullptr) {
    if (!(eps > 0)) throw DomainError("apply_operator: eps must be > 0");
    m.check_point(x);
    for (const QuadNode& n : rule.nodes)
        if (n.chart >= m.charts().size() || n.coords.size() != m.dim())
            throw DomainError("apply_operator: quadrature rule does not match the atlas");
    const Vec x0 = m.embed(x);
    const int d = int(m.dim());
    const double pref = std::pow(4 * std::numbers::pi * eps, -0.5 * d);
    OperatorValue out;
    out.value = parallel_sum(rule.nodes.size(), [&](std::size_t i) {
        const QuadNode& n = rule.nodes[i];
        auto [y, jac] = m.jacobian(n.chart, n.coords);
        const double r2 = dist_sq(y, x0);
        const double k = pref * std::exp(-r2 / (4 * eps));
        if (k == 0.0) return 0.0;
        return k * f(n.chart, n.coords, y) * n.weight * quadrature_density(jac);
    });
    if (!std::isfinite(out.value)) throw NumericalError("apply_operator: non-finite result");
    if (rule.localized) {
        const GlobalStats s = stats ? *stats : global_stats(m, f);
        out.tail_bound = tail_estimate(rule.m_delta, eps, d, s.volume, s.f_sup).bound;
    }
    return out;
}

inline QuadratureRule localized_rule(const EmbeddedManifold& m, const ChartPoint& x, double eps, int order) {
    return localized_rule(m, m.embed(x), localization_radius(m, eps), order);
}

inline constexpr int kDefaultOrder = 64;
inline constexpr int kMaxOrder = 256;

/// Points per axis that resolve the kernel width sqrt(2 eps) across every box
/// of the rule: about 2.5 nodes per kernel width of ambient extent, clamped
/// to [min_order, max_order].
inline int resolution_order(const EmbeddedManifold& m, const std::vector<ChartBox>& boxes, double eps, int min_order,
                            int max_order = kMaxOrder) {
    const double sigma = std::sqrt(2 * eps);
    double extent = 0.0;
    for (const ChartBox& b : boxes) {
        Vec mid(m.dim());
        for (std::size_t i = 0; i < mid.size(); ++i) mid[i] = 0.5 * (b.lo[i] + b.hi[i]);
        m.chart(b.chart).domain.wrap(mid);
        const Mat jac = m.jacobian(b.chart, mid).second;
        for (std::size_t i = 0; i < mid.size(); ++i) extent = std::max(extent, (b.hi[i] - b.lo[i]) * norm(jac.col(i)));
    }
    const double want = std::ceil(2.5 * extent / sigma);
    return int(std::clamp(want, double(min_order), double(std::max(min_order, max_order))));
}

/// Localized rule at eps with a resolution-adapted order. On compact
/// manifolds the full atlas is used instead whenever the excised far field
/// could still contribute more than 1e-15.
inline QuadratureRule adaptive_rule(const EmbeddedManifold& m, const ChartPoint& x, double eps, const GlobalStats& stats,
                                    int min_order = kDefaultOrder, int max_order = kMaxOrder) {
    QuadratureRule probe = localized_rule(m, m.embed(x), localization_radius(m, eps), 2);
    const double tail = tail_estimate(probe.m_delta, eps, int(m.dim()), stats.volume, stats.f_sup).bound;
    if (m.compact() && tail > 1e-15) {
        std::vector<ChartBox> boxes;
        for (std::size_t c : m.cover()) {
            const Box& dom = m.chart(c).domain;
            boxes.push_back({c, dom.lo, dom.hi, dom.periodic});
        }
        const int order = resolution_order(m, boxes, eps, min_order, max_order);
        return rule_from_boxes(m, std::move(boxes), order);
    }
    const int order = resolution_order(m, probe.boxes, eps, min_order, max_order);
    QuadratureRule rule = rule_from_boxes(m, probe.boxes, order);
    rule.localized = probe.localized;
    rule.m_delta = probe.m_delta;
    return rule;
}

struct LadderSample {
    double eps = 0.0;
    double value = 0.0;
    double tail_bound = 0.0;
};

struct EpsLadder {
    std::vector<LadderSample> samples;
    ChartPoint x;
    std::string f_id;
};

/// Default geometric ladder top * 2^{-k}, k = 0..count-1, floored at 1e-5.
/// The top starts at 0.1 and is halved while top * |B|^2 > 0.03 (|B|^2 the
/// squared norm of the second fundamental form at x), so strongly curved
/// points start inside the asymptotic regime. On non-compact charts it is
/// also halved until the chart edge at distance m has exp(-m^2/4 top) < 1e-16.
inline std::vector<double> default_eps_ladder(const EmbeddedManifold& m, const ChartPoint& x, int count = 8) {
    if (count < 1) throw DomainError("eps ladder: count must be >= 1");
    double top = 0.1;
    const CurvatureReport curv = curvature_at(m, x);
    double bsq = 0.0;
    for (const Vec& b : curv.sff) bsq += dot(b, b);
    while (top * bsq > 0.03 && top > 1e-4) top *= 0.5;
    if (!m.compact()) {
        const QuadratureRule r = localized_rule(m, m.embed(x), std::numeric_limits<double>::infinity(), 2);
        const double edge = r.m_delta;
        while (edge * edge / (4 * top) < 37.0 && top > 1e-4) top *= 0.5;
    }
    std::vector<double> out;
    for (int k = 0; k < count; ++k) {
        const double e = top * std::pow(2.0, -k);
        if (e < 1e-5) break;
        out.push_back(e);
    }
    return out;
}

/// One evaluation per eps. With `localized` the rule comes from adaptive_rule
/// (order at least `order`); otherwise the full atlas at `order`. When
/// order_tol > 0 the order is doubled until two successive orders agree to
/// order_tol relative to 1 + |value|, capped at max_order.
inline EpsLadder eps_sweep(const EmbeddedManifold& m, const ScalarField& f, const ChartPoint& x,
                           std::span<const double> eps_list, int order = kDefaultOrder, bool localized = true,
                           double order_tol = 0.0, int max_order = kMaxOrder) {
    if (eps_list.empty()) throw DomainError("eps_sweep: empty eps list");
    for (std::size_t i = 0; i < eps_list.size(); ++i) {
        if (!(eps_list[i] > 0)) throw DomainError("eps_sweep: eps values must be > 0");
        if (i > 0 && !(eps_list[i] < eps_list[i - 1])) throw DomainError("eps_sweep: eps list must be strictly decreasing");
    }
    if (order < 2) throw DomainError("eps_sweep: order must be >= 2");
    m.check_point(x);
    EpsLadder ladder;
    ladder.x = x;
    ladder.f_id = f.id;
    const GlobalStats stats = global_stats(m, f);
    for (double eps : eps_list) {
        QuadratureRule rule = localized ? adaptive_rule(m, x, eps, stats, order, max_order) : full_rule(m, order);
        OperatorValue v = apply_operator(m, f, x, eps, rule, &stats);
        if (order_tol > 0) {
            for (int ord = 2 * rule.order; ord <= max_order; ord *= 2) {
                QuadratureRule finer = rule_from_boxes(m, rule.boxes, ord);
                finer.localized = rule.localized;
                finer.m_delta = rule.m_delta;
                const OperatorValue w = apply_operator(m, f, x, eps, finer, &stats);
                const bool done = std::abs(w.value - v.value) <= order_tol * (1 + std::abs(w.value));
                v = w;
                if (done) break;
            }
        }
        ladder.samples.push_back({eps, v.value, v.tail_bound});
    }
    return ladder;
}

// ---------------------------------------------------------------------------
// Monte Carlo

inline QuadratureRule full_rule_for_chart(const EmbeddedManifold& m, std::size_t c, int order = kDefaultOrder) {
    const Box& dom = m.chart(c).domain;
    return rule_from_boxes(m, {ChartBox{c, dom.lo, dom.hi, dom.periodic}}, order);
}

struct MonteCarloEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
    double acceptance = 0.0;  // accepted / proposed
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace detail

/// Uniform samples from dV by rejection against sqrt(det g) on each covering
/// chart; every sample index owns its generator, so results do not depend on
/// the thread count.
inline MonteCarloEstimate monte_carlo_operator(const EmbeddedManifold& m, const ScalarField& f, const ChartPoint& x,
                                               double eps, std::size_t n_samples, std::uint64_t seed) {
    if (n_samples < 1000) throw DomainError("monte_carlo_operator: n_samples must be >= 1000");
    if (!(eps > 0)) throw DomainError("monte_carlo_operator: eps must be > 0");
    m.check_point(x);
    const std::size_t d = m.dim();
    const Vec x0 = m.embed(x);

    // per-chart envelope and volume
    struct Env {
        std::size_t chart;
        double box_volume;
        double gmax;
        double volume;
    };
    std::vector<Env> envs;
    double total_volume = 0.0;
    for (std::size_t c : m.cover()) {
        const Box& dom = m.chart(c).domain;
        double bv = 1.0;
        for (std::size_t i = 0; i < d; ++i) bv *= dom.width(i);
        double gmax = 0.0;
        const std::size_t ns = detail::samples_per_axis(d);
        Vec lo = dom.lo, hi = dom.hi;
        detail::visit_grid(lo, hi, ns, [&](const Vec& s, const std::vector<std::size_t>&) {
            try {
                gmax = std::max(gmax, quadrature_density(m.jacobian(c, s).second));
            } catch (const NumericalError&) {
                // degenerate boundary points carry no volume
            }
        });
        gmax *= 1.05;
        const double vol = rule_volume(m, full_rule_for_chart(m, c));
        envs.push_back({c, bv, gmax, vol});
        total_volume += vol;
    }
    if (m.known_volume()) total_volume = *m.known_volume();
    double efficiency = 0.0;
    for (const Env& e : envs) efficiency += e.volume / (e.box_volume * e.gmax) * (e.volume / total_volume);
    if (efficiency < 0.01)
        throw NumericalError("monte_carlo_operator: rejection efficiency below 1%; refine the chart atlas");

    const int di = int(d);
    const double pref = std::pow(4 * std::numbers::pi * eps, -0.5 * di);
    const std::size_t nchunks = (n_samples + kChunk - 1) / kChunk;
    struct Acc {
        double s = 0.0, s2 = 0.0, proposed = 0.0;
    };
    std::vector<Acc> acc(nchunks);
    std::atomic<bool> overshoot{false};
    parallel_chunks(n_samples, kChunk, [&](std::size_t ci, std::size_t b, std::size_t e) {
        Acc a;
        Vec s(d);
        for (std::size_t i = b; i < e; ++i) {
            std::mt19937_64 gen(detail::splitmix64(seed ^ detail::splitmix64(i)));
            std::uniform_real_distribution<double> u(0.0, 1.0);
            // chart by volume share
            std::size_t which = 0;
            if (envs.size() > 1) {
                double r = u(gen) * total_volume, cum = 0.0;
                for (which = 0; which + 1 < envs.size(); ++which) {
                    cum += envs[which].volume;
                    if (r < cum) break;
                }
            }
            const Env& env = envs[which];
            const Box& dom = m.chart(env.chart).domain;
            for (;;) {
                a.proposed += 1;
                for (std::size_t k = 0; k < d; ++k) s[k] = dom.lo[k] + dom.width(k) * u(gen);
                double g = 0.0;
                try {
                    g = quadrature_density(m.jacobian(env.chart, s).second);
                } catch (const NumericalError&) {
                    g = 0.0;
                }
                if (g > env.gmax) overshoot = true;
                if (u(gen) * env.gmax < g) break;
            }
            const Vec y = m.embed(env.chart, s);
            const double v = pref * std::exp(-dist_sq(y, x0) / (4 * eps)) * f(env.chart, s, y);
            a.s += v;
            a.s2 += v * v;
        }
        acc[ci] = a;
    });
    if (overshoot) throw NumericalError("monte_carlo_operator: volume element exceeded the rejection envelope");
    const Acc tot = pairwise_reduce(acc, Acc{}, [](const Acc& p, const Acc& q) {
        return Acc{p.s + q.s, p.s2 + q.s2, p.proposed + q.proposed};
    });
    const double n = double(n_samples);
    const double mean = tot.s / n;
    const double var = std::max(0.0, tot.s2 / n - mean * mean) * n / (n - 1);
    MonteCarloEstimate out;
    out.estimate = total_volume * mean;
    out.std_error = total_volume * std::sqrt(var / n);
    out.acceptance = n / tot.proposed;
    return out;
}

}  // namespace ckl
