#pragma once

// Embedded submanifolds M^d of R^n given by a chart atlas, and the local
// geometry computed from the embedding: first and second fundamental forms,
// curvature, geodesics, normal-coordinate volume density and the
// Laplace-Beltrami operator (positive-spectrum sign convention).
//
// Derivatives of the embedding come from Richardson-extrapolated central
// differences by default. Charts may also carry an exact second-order jet,
// which is used when the manifold is switched to Derivatives::exact.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ckl/error.hpp"
#include "ckl/jet.hpp"
#include "ckl/linalg.hpp"

namespace ckl {

/// Axis-aligned chart domain. Periodic axes wrap into [lo, hi).
struct Box {
    Vec lo;
    Vec hi;
    std::vector<bool> periodic;

    [[nodiscard]] std::size_t dim() const noexcept { return lo.size(); }
    [[nodiscard]] double width(std::size_t i) const { return hi[i] - lo[i]; }

    [[nodiscard]] bool contains(std::span<const double> s) const {
        for (std::size_t i = 0; i < dim(); ++i) {
            if (periodic[i]) continue;
            if (s[i] < lo[i] || s[i] > hi[i]) return false;
        }
        return true;
    }

    void wrap(std::span<double> s) const {
        for (std::size_t i = 0; i < dim(); ++i) {
            if (!periodic[i]) continue;
            const double w = width(i);
            double t = std::fmod(s[i] - lo[i], w);
            if (t < 0) t += w;
            s[i] = lo[i] + t;
        }
    }
};

using EmbedFn = std::function<Vec(std::span<const double>)>;
using ExactJetFn = std::function<std::vector<Jet2>(std::span<const double>)>;

struct Chart {
    Box domain;
    EmbedFn embed;
    ExactJetFn exact;  // optional
};

struct ChartPoint {
    std::size_t chart = 0;
    Vec coords;
};

enum class Derivatives { finite_difference, exact };

/// Embedding value with first and second partials at a chart point.
struct EmbeddingJet {
    Vec x;                   // n
    Mat jac;                 // n x d, column i = dX/ds_i
    std::vector<Vec> hess;   // d*d ambient vectors, hess[i*d+j] = d2X/ds_i ds_j

    [[nodiscard]] const Vec& second(std::size_t i, std::size_t j) const {
        return hess[i * jac.cols() + j];
    }
};

class EmbeddedManifold {
public:
    EmbeddedManifold(std::size_t dim_intrinsic, std::size_t dim_ambient, std::vector<Chart> charts,
                     double delta, std::string catalog_id = "custom",
                     std::vector<std::size_t> cover = {0})
        : d_(dim_intrinsic),
          n_(dim_ambient),
          charts_(std::move(charts)),
          delta_(delta),
          catalog_id_(std::move(catalog_id)),
          cover_(std::move(cover)) {
        if (d_ < 1) throw DomainError("manifold: intrinsic dimension must be >= 1");
        if (d_ >= n_) throw DomainError("manifold: intrinsic dimension must be below ambient");
        if (charts_.empty()) throw DomainError("manifold: at least one chart required");
        if (!(delta_ > 0)) throw DomainError("manifold: delta (injectivity bound) must be > 0");
        for (const Chart& c : charts_)
            if (c.domain.dim() != d_ || c.domain.hi.size() != d_ || c.domain.periodic.size() != d_)
                throw DomainError("manifold: chart domain dimension mismatch");
        for (std::size_t c : cover_)
            if (c >= charts_.size()) throw DomainError("manifold: cover references missing chart");
    }

    [[nodiscard]] std::size_t dim() const noexcept { return d_; }
    [[nodiscard]] std::size_t ambient_dim() const noexcept { return n_; }
    [[nodiscard]] double delta() const noexcept { return delta_; }
    [[nodiscard]] const std::string& catalog_id() const noexcept { return catalog_id_; }
    [[nodiscard]] const std::vector<Chart>& charts() const noexcept { return charts_; }
    [[nodiscard]] const Chart& chart(std::size_t i) const {
        if (i >= charts_.size()) throw DomainError("chart index out of range");
        return charts_[i];
    }
    /// Charts whose domains tile M up to a null set; full-manifold integrals run over these.
    [[nodiscard]] const std::vector<std::size_t>& cover() const noexcept { return cover_; }
    [[nodiscard]] Derivatives derivatives() const noexcept { return mode_; }
    /// True when every cover chart has a compact closure that exhausts M.
    [[nodiscard]] bool compact() const noexcept { return compact_; }
    [[nodiscard]] std::optional<double> known_volume() const noexcept { return volume_; }

    [[nodiscard]] EmbeddedManifold with_derivatives(Derivatives mode) const {
        if (mode == Derivatives::exact)
            for (const Chart& c : charts_)
                if (!c.exact) throw DomainError("manifold: exact derivatives not available");
        EmbeddedManifold m = *this;
        m.mode_ = mode;
        return m;
    }
    EmbeddedManifold& set_compact(bool compact) { compact_ = compact; return *this; }
    EmbeddedManifold& set_known_volume(double v) { volume_ = v; return *this; }

    void check_point(const ChartPoint& p) const {
        const Chart& c = chart(p.chart);
        if (p.coords.size() != d_) throw DomainError("chart point has wrong dimension");
        if (!c.domain.contains(p.coords)) throw DomainError("chart point outside chart domain");
    }

    [[nodiscard]] Vec embed(std::size_t chart_index, std::span<const double> s) const {
        return chart(chart_index).embed(s);
    }
    [[nodiscard]] Vec embed(const ChartPoint& p) const { return embed(p.chart, p.coords); }

    /// First derivatives only (cheaper than jet()).
    [[nodiscard]] std::pair<Vec, Mat> jacobian(std::size_t chart_index, std::span<const double> s) const;
    [[nodiscard]] EmbeddingJet jet(std::size_t chart_index, std::span<const double> s) const;
    [[nodiscard]] EmbeddingJet jet(const ChartPoint& p) const {
        check_point(p);
        return jet(p.chart, p.coords);
    }

private:
    std::size_t d_;
    std::size_t n_;
    std::vector<Chart> charts_;
    double delta_;
    std::string catalog_id_;
    std::vector<std::size_t> cover_;
    Derivatives mode_ = Derivatives::finite_difference;
    bool compact_ = true;
    std::optional<double> volume_;
};

namespace detail {

// Base step for central differences, scaled by (1 + |s_i|). Richardson uses h and h/2.
inline constexpr double kDiffStep = 0x1p-8;

inline double step_for(double s) {
    const double h = kDiffStep * (1.0 + std::abs(s));
    // representable step: (s + h) - s
    volatile double t = s + h;
    return t - s;
}

inline EmbeddingJet exact_jet(const Chart& c, std::span<const double> s, std::size_t n) {
    const std::size_t d = s.size();
    const std::vector<Jet2> j = c.exact(s);
    if (j.size() != n) throw DomainError("exact jet: wrong ambient dimension");
    EmbeddingJet r{Vec(n), Mat(n, d), std::vector<Vec>(d * d, Vec(n))};
    for (std::size_t k = 0; k < n; ++k) {
        r.x[k] = j[k].v;
        for (std::size_t i = 0; i < d; ++i) r.jac(k, i) = j[k].g[i];
        for (std::size_t i = 0; i < d * d; ++i) r.hess[i][k] = j[k].h[i];
    }
    return r;
}

}  // namespace detail

inline std::pair<Vec, Mat> EmbeddedManifold::jacobian(std::size_t ci, std::span<const double> s) const {
    const Chart& c = chart(ci);
    if (mode_ == Derivatives::exact) {
        EmbeddingJet j = detail::exact_jet(c, s, n_);
        return {std::move(j.x), std::move(j.jac)};
    }
    Vec x = c.embed(s);
    if (x.size() != n_) throw DomainError("embed returned wrong ambient dimension");
    Mat jac(n_, d_);
    Vec q(s.begin(), s.end());
    for (std::size_t i = 0; i < d_; ++i) {
        const double h = detail::step_for(s[i]);
        auto eval = [&](double off) {
            q[i] = s[i] + off;
            Vec y = c.embed(q);
            q[i] = s[i];
            return y;
        };
        const Vec p1 = eval(h), m1 = eval(-h), p2 = eval(h / 2), m2 = eval(-h / 2);
        for (std::size_t k = 0; k < n_; ++k) {
            const double d1 = (p1[k] - m1[k]) / (2 * h);
            const double d2 = (p2[k] - m2[k]) / h;
            jac(k, i) = (4 * d2 - d1) / 3;
        }
    }
    return {std::move(x), std::move(jac)};
}

inline EmbeddingJet EmbeddedManifold::jet(std::size_t ci, std::span<const double> s) const {
    const Chart& c = chart(ci);
    if (s.size() != d_) throw DomainError("jet: wrong coordinate dimension");
    if (mode_ == Derivatives::exact) return detail::exact_jet(c, s, n_);

    EmbeddingJet r{c.embed(s), Mat(n_, d_), std::vector<Vec>(d_ * d_, Vec(n_))};
    if (r.x.size() != n_) throw DomainError("embed returned wrong ambient dimension");
    Vec q(s.begin(), s.end());
    Vec h(d_);
    for (std::size_t i = 0; i < d_; ++i) h[i] = detail::step_for(s[i]);

    for (std::size_t i = 0; i < d_; ++i) {
        auto eval = [&](double off) {
            q[i] = s[i] + off;
            Vec y = c.embed(q);
            q[i] = s[i];
            return y;
        };
        const Vec p1 = eval(h[i]), m1 = eval(-h[i]), p2 = eval(h[i] / 2), m2 = eval(-h[i] / 2);
        const double hh = h[i] * h[i];
        for (std::size_t k = 0; k < n_; ++k) {
            const double d1 = (p1[k] - m1[k]) / (2 * h[i]);
            const double d2 = (p2[k] - m2[k]) / h[i];
            r.jac(k, i) = (4 * d2 - d1) / 3;
            const double s1 = (p1[k] - 2 * r.x[k] + m1[k]) / hh;
            const double s2 = (p2[k] - 2 * r.x[k] + m2[k]) / (hh / 4);
            r.hess[i * d_ + i][k] = (4 * s2 - s1) / 3;
        }
    }
    for (std::size_t i = 0; i < d_; ++i)
        for (std::size_t j = i + 1; j < d_; ++j) {
            auto eval = [&](double a, double b) {
                q[i] = s[i] + a;
                q[j] = s[j] + b;
                Vec y = c.embed(q);
                q[i] = s[i];
                q[j] = s[j];
                return y;
            };
            auto mixed = [&](double hi, double hj) {
                const Vec pp = eval(hi, hj), pm = eval(hi, -hj), mp = eval(-hi, hj),
                          mm = eval(-hi, -hj);
                Vec out(n_);
                for (std::size_t k = 0; k < n_; ++k)
                    out[k] = (pp[k] - pm[k] - mp[k] + mm[k]) / (4 * hi * hj);
                return out;
            };
            const Vec a1 = mixed(h[i], h[j]);
            const Vec a2 = mixed(h[i] / 2, h[j] / 2);
            for (std::size_t k = 0; k < n_; ++k) {
                const double v = (4 * a2[k] - a1[k]) / 3;
                r.hess[i * d_ + j][k] = v;
                r.hess[j * d_ + i][k] = v;
            }
        }
    return r;
}

// ---------------------------------------------------------------------------
// First and second fundamental forms

inline constexpr double kDegenerateMetricDet = 1e-12;

inline Mat metric_from_jacobian(const Mat& jac) {
    Mat g = gram(jac);
    const double det = g.rows() == 1 ? g(0, 0) : determinant(g);
    if (!(det > kDegenerateMetricDet))
        throw NumericalError("degenerate chart: metric determinant " + std::to_string(det) +
                             " below 1e-12");
    return g;
}

inline Mat metric_at(const EmbeddedManifold& m, const ChartPoint& p) {
    m.check_point(p);
    return metric_from_jacobian(m.jacobian(p.chart, p.coords).second);
}

/// sqrt(det g) at a chart point, i.e. the Riemannian volume density of the chart.
inline double volume_element(const EmbeddedManifold& m, std::size_t chart, std::span<const double> s) {
    const Mat g = metric_from_jacobian(m.jacobian(chart, s).second);
    return std::sqrt(determinant(g));
}

/// sqrt(det g) without the degeneracy check. Quadrature nodes may sit next to a
/// coordinate singularity (the pole of a polar chart) where the density is
/// legitimately tiny.
inline double quadrature_density(const Mat& jac) {
    const Mat g = gram(jac);
    return std::sqrt(std::max(0.0, g.rows() == 1 ? g(0, 0) : determinant(g)));
}

/// Orthonormal tangent frame by modified Gram-Schmidt on the Jacobian columns.
/// Returns the frame (n x d) and the upper-triangular A with frame = jac * A.
inline std::pair<Mat, Mat> tangent_frame(const Mat& jac) {
    const std::size_t n = jac.rows(), d = jac.cols();
    Mat e(n, d), a(d, d);
    for (std::size_t i = 0; i < d; ++i) {
        Vec v = jac.col(i);
        Vec coef(d, 0.0);
        coef[i] = 1.0;
        for (std::size_t j = 0; j < i; ++j) {
            const Vec ej = e.col(j);
            const double c = dot(v, ej);
            for (std::size_t k = 0; k < n; ++k) v[k] -= c * ej[k];
            for (std::size_t l = 0; l < d; ++l) coef[l] -= c * a(l, j);
        }
        const double nv = norm(v);
        if (!(nv > 0)) throw NumericalError("degenerate chart: dependent Jacobian columns");
        for (std::size_t k = 0; k < n; ++k) e(k, i) = v[k] / nv;
        for (std::size_t l = 0; l < d; ++l) a(l, i) = coef[l] / nv;
    }
    return {e, a};
}

struct CurvatureReport {
    Mat metric;                       // d x d in chart coordinates
    Mat frame;                        // n x d orthonormal tangent frame
    std::vector<Vec> sff;             // d*d normal vectors B(e_a, e_b) in the frame
    Vec mean_curvature_vector;        // H = (1/d) sum_a B(e_a, e_a)
    double mean_curvature_norm_sq = 0.0;
    double scalar_curvature = 0.0;    // d^2 |H|^2 - sum |B_ab|^2
    double scalar_curvature_trace = 0.0;  // trace of the Ricci tensor built from Riemann
    Mat ricci;                        // d x d in the frame
    std::vector<double> riemann;      // d^4, R_abcd = <B_ac,B_bd> - <B_ad,B_bc>

    [[nodiscard]] std::size_t dim() const noexcept { return metric.rows(); }
    [[nodiscard]] const Vec& B(std::size_t a, std::size_t b) const { return sff[a * dim() + b]; }
    [[nodiscard]] double R(std::size_t a, std::size_t b, std::size_t c, std::size_t e) const {
        const std::size_t d = dim();
        return riemann[((a * d + b) * d + c) * d + e];
    }
    /// B(v, v) for v given in frame coordinates.
    [[nodiscard]] Vec B_of(std::span<const double> v) const {
        const std::size_t d = dim();
        Vec out(sff.front().size(), 0.0);
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = 0; b < d; ++b)
                for (std::size_t k = 0; k < out.size(); ++k) out[k] += v[a] * v[b] * B(a, b)[k];
        return out;
    }
};

inline CurvatureReport curvature_from_jet(const EmbeddingJet& jet) {
    const std::size_t n = jet.jac.rows(), d = jet.jac.cols();
    CurvatureReport r;
    r.metric = metric_from_jacobian(jet.jac);
    auto [frame, a] = tangent_frame(jet.jac);
    r.frame = frame;

    // normal parts of the coordinate second derivatives
    std::vector<Vec> normal_part(d * d);
    for (std::size_t i = 0; i < d * d; ++i) {
        Vec v = jet.hess[i];
        for (std::size_t c = 0; c < d; ++c) {
            const Vec ec = frame.col(c);
            const double t = dot(v, ec);
            for (std::size_t k = 0; k < n; ++k) v[k] -= t * ec[k];
        }
        normal_part[i] = std::move(v);
    }
    r.sff.assign(d * d, Vec(n, 0.0));
    for (std::size_t p = 0; p < d; ++p)
        for (std::size_t q = 0; q < d; ++q) {
            Vec& out = r.sff[p * d + q];
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j < d; ++j) {
                    const double w = a(i, p) * a(j, q);
                    if (w == 0.0) continue;
                    for (std::size_t k = 0; k < n; ++k) out[k] += w * normal_part[i * d + j][k];
                }
        }

    r.mean_curvature_vector.assign(n, 0.0);
    for (std::size_t p = 0; p < d; ++p)
        for (std::size_t k = 0; k < n; ++k) r.mean_curvature_vector[k] += r.sff[p * d + p][k] / d;
    r.mean_curvature_norm_sq = dot(r.mean_curvature_vector, r.mean_curvature_vector);
    double bsq = 0.0;
    for (const Vec& b : r.sff) bsq += dot(b, b);
    r.scalar_curvature = double(d * d) * r.mean_curvature_norm_sq - bsq;

    r.riemann.assign(d * d * d * d, 0.0);
    for (std::size_t p = 0; p < d; ++p)
        for (std::size_t q = 0; q < d; ++q)
            for (std::size_t s = 0; s < d; ++s)
                for (std::size_t t = 0; t < d; ++t)
                    r.riemann[((p * d + q) * d + s) * d + t] =
                        dot(r.sff[p * d + s], r.sff[q * d + t]) - dot(r.sff[p * d + t], r.sff[q * d + s]);
    r.ricci = Mat(d, d);
    for (std::size_t p = 0; p < d; ++p)
        for (std::size_t q = 0; q < d; ++q)
            for (std::size_t c = 0; c < d; ++c) r.ricci(p, q) += r.R(p, c, q, c);
    r.scalar_curvature_trace = 0.0;
    for (std::size_t p = 0; p < d; ++p) r.scalar_curvature_trace += r.ricci(p, p);
    return r;
}

inline CurvatureReport curvature_at(const EmbeddedManifold& m, const ChartPoint& p) {
    return curvature_from_jet(m.jet(p));
}

/// Christoffel symbols of the second kind, gamma[k][i*d+j] = Gamma^k_ij,
/// from Gamma_ijl = <X_ij, X_l>.
inline std::vector<Vec> christoffel_from_jet(const EmbeddingJet& jet, const Mat& ginv) {
    const std::size_t d = jet.jac.cols();
    std::vector<Vec> first(d * d, Vec(d));
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j)
            for (std::size_t l = 0; l < d; ++l) {
                double s = 0.0;
                const Vec& xij = jet.second(i, j);
                for (std::size_t k = 0; k < jet.x.size(); ++k) s += xij[k] * jet.jac(k, l);
                first[i * d + j][l] = s;
                first[j * d + i][l] = s;
            }
    std::vector<Vec> gamma(d, Vec(d * d, 0.0));
    for (std::size_t k = 0; k < d; ++k)
        for (std::size_t ij = 0; ij < d * d; ++ij)
            for (std::size_t l = 0; l < d; ++l) gamma[k][ij] += ginv(k, l) * first[ij][l];
    return gamma;
}

// ---------------------------------------------------------------------------
// Scalar fields and the Laplace-Beltrami operator

using FieldFn = std::function<double(std::size_t chart, std::span<const double> coords,
                                     std::span<const double> ambient)>;

struct ScalarField {
    std::string id;
    FieldFn fn;

    double operator()(const EmbeddedManifold& m, std::size_t chart, std::span<const double> s) const {
        const Vec y = m.embed(chart, s);
        const double v = fn(chart, s, y);
        if (!std::isfinite(v)) throw NumericalError("scalar field '" + id + "' is not finite");
        return v;
    }
    double operator()(std::size_t chart, std::span<const double> s, std::span<const double> y) const {
        const double v = fn(chart, s, y);
        if (!std::isfinite(v)) throw NumericalError("scalar field '" + id + "' is not finite");
        return v;
    }
};

namespace detail {

inline Vec field_gradient(const EmbeddedManifold& m, const ScalarField& f, std::size_t chart,
                          std::span<const double> s) {
    const std::size_t d = s.size();
    Vec grad(d);
    Vec q(s.begin(), s.end());
    for (std::size_t i = 0; i < d; ++i) {
        const double h = step_for(s[i]);
        auto eval = [&](double off) {
            q[i] = s[i] + off;
            const double v = f(m, chart, q);
            q[i] = s[i];
            return v;
        };
        const double d1 = (eval(h) - eval(-h)) / (2 * h);
        const double d2 = (eval(h / 2) - eval(-h / 2)) / h;
        grad[i] = (4 * d2 - d1) / 3;
    }
    return grad;
}

// sqrt(det g) g^{ij} df/ds_j
inline Vec laplacian_flux(const EmbeddedManifold& m, const ScalarField& f, std::size_t chart,
                          std::span<const double> s) {
    const Mat g = metric_from_jacobian(m.jacobian(chart, s).second);
    const double sqrtg = std::sqrt(determinant(g));
    const Mat ginv = inverse_spd(g);
    const Vec grad = field_gradient(m, f, chart, s);
    Vec flux = matvec(ginv, grad);
    for (double& v : flux) v *= sqrtg;
    return flux;
}

}  // namespace detail

/// Delta f = -(1/sqrt g) d_i (sqrt g g^{ij} d_j f), by nested central differences
/// in chart coordinates. Positive spectrum: Delta of a degree-l spherical
/// harmonic on the unit S^d is l(l+d-1) times itself.
inline double laplace_beltrami(const EmbeddedManifold& m, const ScalarField& f, const ChartPoint& p) {
    m.check_point(p);
    const std::size_t d = m.dim();
    const Mat g = metric_from_jacobian(m.jacobian(p.chart, p.coords).second);
    const double sqrtg = std::sqrt(determinant(g));
    Vec q = p.coords;
    double div = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double h = detail::step_for(p.coords[i]);
        auto flux_i = [&](double off) {
            q[i] = p.coords[i] + off;
            const double v = detail::laplacian_flux(m, f, p.chart, q)[i];
            q[i] = p.coords[i];
            return v;
        };
        const double d1 = (flux_i(h) - flux_i(-h)) / (2 * h);
        const double d2 = (flux_i(h / 2) - flux_i(-h / 2)) / h;
        div += (4 * d2 - d1) / 3;
    }
    const double result = -div / sqrtg;
    if (!std::isfinite(result)) throw NumericalError("laplace_beltrami: non-finite result");
    return result;
}

// ---------------------------------------------------------------------------
// Geodesics

struct GeodesicState {
    Vec position;        // R^n
    Vec velocity;        // R^n, tangent
    ChartPoint chart_position;
    double arc_length = 0.0;
};

struct GeodesicPath {
    std::vector<GeodesicState> states;
    bool truncated = false;
    double max_speed_drift = 0.0;  // |speed - initial speed| before re-normalization
};

inline constexpr int kGeodesicStepsPerUnit = 2000;

/// Chart velocity ds/dt whose push-forward is the tangent vector sum_a v_a e_a.
inline Vec frame_to_chart_velocity(const Mat& jac, std::span<const double> frame_coords) {
    metric_from_jacobian(jac);  // rejects degenerate charts
    const auto [frame, a] = tangent_frame(jac);
    (void)frame;
    // frame = jac * a  =>  tangent = jac * (a v)
    return matvec(a, frame_coords);
}

namespace detail {

struct GeodesicRhs {
    const EmbeddedManifold& m;
    std::size_t chart;

    // returns (ds, dsdot) and the metric speed^2 at s
    std::pair<Vec, Vec> operator()(std::span<const double> s, std::span<const double> sdot,
                                   double* speed_sq = nullptr) const {
        const std::size_t d = m.dim();
        const EmbeddingJet jet = m.jet(chart, s);
        const Mat g = metric_from_jacobian(jet.jac);
        const Mat ginv = inverse_spd(g);
        const std::vector<Vec> gamma = christoffel_from_jet(jet, ginv);
        Vec acc(d, 0.0);
        for (std::size_t k = 0; k < d; ++k)
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j < d; ++j) acc[k] -= gamma[k][i * d + j] * sdot[i] * sdot[j];
        if (speed_sq) {
            double sp = 0.0;
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j < d; ++j) sp += g(i, j) * sdot[i] * sdot[j];
            *speed_sq = sp;
        }
        return {Vec(sdot.begin(), sdot.end()), acc};
    }
};

// Integrates s'' + Gamma(s', s') = 0 for unit parameter time with the given
// initial chart velocity, in `steps` RK4 steps. Calls `visit(step, s, sdot)` after
// every step; returns false from the visitor to stop. Returns false if the path
// leaves the chart domain.
template <class Visit>
bool integrate_geodesic(const EmbeddedManifold& m, std::size_t chart, Vec s, Vec sdot, double t_end,
                        int steps, double& max_drift, Visit&& visit) {
    const std::size_t d = m.dim();
    const Box& box = m.chart(chart).domain;
    const GeodesicRhs rhs{m, chart};
    const double h = t_end / steps;
    double speed0_sq = 0.0;
    {
        const Mat g = metric_from_jacobian(m.jacobian(chart, s).second);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) speed0_sq += g(i, j) * sdot[i] * sdot[j];
    }
    const double speed0 = std::sqrt(speed0_sq);
    max_drift = 0.0;
    Vec ts(d), tv(d);
    for (int step = 1; step <= steps; ++step) {
        double sp_sq = 0.0;
        auto [k1s, k1v] = rhs(s, sdot, &sp_sq);
        if (step > 1 && speed0 > 0) {
            const double sp = std::sqrt(sp_sq);
            max_drift = std::max(max_drift, std::abs(sp - speed0));
            for (double& v : sdot) v *= speed0 / sp;
            for (double& v : k1s) v *= speed0 / sp;
            for (double& v : k1v) v *= speed0_sq / sp_sq;
        }
        for (std::size_t i = 0; i < d; ++i) { ts[i] = s[i] + 0.5 * h * k1s[i]; tv[i] = sdot[i] + 0.5 * h * k1v[i]; }
        auto [k2s, k2v] = rhs(ts, tv);
        for (std::size_t i = 0; i < d; ++i) { ts[i] = s[i] + 0.5 * h * k2s[i]; tv[i] = sdot[i] + 0.5 * h * k2v[i]; }
        auto [k3s, k3v] = rhs(ts, tv);
        for (std::size_t i = 0; i < d; ++i) { ts[i] = s[i] + h * k3s[i]; tv[i] = sdot[i] + h * k3v[i]; }
        auto [k4s, k4v] = rhs(ts, tv);
        for (std::size_t i = 0; i < d; ++i) {
            s[i] += h / 6 * (k1s[i] + 2 * k2s[i] + 2 * k3s[i] + k4s[i]);
            sdot[i] += h / 6 * (k1v[i] + 2 * k2v[i] + 2 * k3v[i] + k4v[i]);
        }
        box.wrap(s);
        if (!box.contains(s)) return false;
        if (!visit(step, s, sdot)) return true;
    }
    return true;
}

}  // namespace detail

/// Shoots the geodesic from x with unit initial direction v (orthonormal-frame
/// coordinates) up to arc length t_max in `steps` RK4 steps.
inline GeodesicPath geodesic_shoot(const EmbeddedManifold& m, const ChartPoint& x, std::span<const double> v,
                                   double t_max, int steps = -1) {
    m.check_point(x);
    if (v.size() != m.dim()) throw DomainError("geodesic_shoot: direction has wrong dimension");
    if (std::abs(norm(v) - 1.0) > 1e-12) throw DomainError("geodesic_shoot: direction must be unit");
    if (!(t_max > 0)) throw DomainError("geodesic_shoot: t_max must be positive");
    if (t_max >= m.delta()) throw DomainError("geodesic_shoot: t_max must stay below delta");
    if (steps < 0) steps = std::max(16, int(std::ceil(kGeodesicStepsPerUnit * t_max)));

    const auto [x0, jac0] = m.jacobian(x.chart, x.coords);
    const Vec sdot0 = frame_to_chart_velocity(jac0, v);
    GeodesicPath path;
    const double h = t_max / steps;
    path.states.push_back({x0, matvec(jac0, sdot0), x, 0.0});
    const bool inside = detail::integrate_geodesic(
        m, x.chart, x.coords, sdot0, t_max, steps, path.max_speed_drift,
        [&](int step, const Vec& s, const Vec& sdot) {
            auto [pos, jac] = m.jacobian(x.chart, s);
            path.states.push_back({pos, matvec(jac, sdot), {x.chart, s}, step * h});
            return true;
        });
    path.truncated = !inside;
    return path;
}

/// exp_x(w) for w in orthonormal-frame coordinates, integrated over unit
/// parameter time with a fixed step count so nearby w give smoothly related maps.
inline ChartPoint exp_map(const EmbeddedManifold& m, const ChartPoint& x, std::span<const double> w, int steps) {
    const auto [x0, jac0] = m.jacobian(x.chart, x.coords);
    (void)x0;
    const Vec sdot0 = frame_to_chart_velocity(jac0, w);
    ChartPoint out{x.chart, x.coords};
    double drift = 0.0;
    const bool inside = detail::integrate_geodesic(m, x.chart, x.coords, sdot0, 1.0, steps, drift,
                                                   [&](int, const Vec& s, const Vec&) {
                                                       out.coords = s;
                                                       return true;
                                                   });
    if (!inside) throw NumericalError("exp_map: geodesic left the chart domain");
    return out;
}

struct ChordExpansion {
    double g2 = 0.0;
    double g4 = 0.0;
    double g3 = 0.0;               // nuisance, should vanish
    double residual_exponent = 0;  // log-log slope of g(t) - t^2 + |B(v,v)|^2 t^4 / 12
    double bvv_norm_sq = 0.0;      // |B(v,v)|^2 from curvature_at
    Vec t;
    Vec g;                         // |gamma(t) - x|^2 along the grid
};

/// Fits g_v(t) = |gamma_v(t) - x|^2 on the grid by g2 t^2/2! + g4 t^4/4!, with
/// t^3 and t^5 .. t^8 nuisance terms (as many as the grid supports) so the
/// two reported coefficients are not biased by the truncated tail.
inline ChordExpansion chord_expansion_check(const EmbeddedManifold& m, const ChartPoint& x,
                                            std::span<const double> v, std::span<const double> t_grid) {
    if (t_grid.size() < 6) throw DomainError("chord_expansion_check: need at least 6 grid points");
    for (double t : t_grid)
        if (!(t > 0 && t < m.delta())) throw DomainError("chord_expansion_check: grid must lie in (0, delta)");
    const Vec x0 = m.embed(x);
    ChordExpansion r;
    r.t.assign(t_grid.begin(), t_grid.end());
    for (double t : t_grid) {
        const GeodesicPath path = geodesic_shoot(m, x, v, t);
        if (path.truncated) throw NumericalError("chord_expansion_check: geodesic truncated");
        r.g.push_back(dist_sq(path.states.back().position, x0));
    }
    const std::size_t k = t_grid.size();
    // columns t^j / j!, j = 2 .. 8; longer grids carry more nuisance terms
    const int powers[] = {2, 3, 4, 5, 6, 7, 8};
    const double facts[] = {2, 6, 24, 120, 720, 5040, 40320};
    const std::size_t ncols = k >= 10 ? 7 : k >= 8 ? 5 : 3;
    Mat a(k, ncols);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t c = 0; c < ncols; ++c) a(i, c) = std::pow(r.t[i], powers[c]) / facts[c];
    // scale rows by 1/t^2 so every point carries comparable weight
    Vec y(k);
    for (std::size_t i = 0; i < k; ++i) {
        const double w = 1.0 / (r.t[i] * r.t[i]);
        for (std::size_t c = 0; c < ncols; ++c) a(i, c) *= w;
        y[i] = r.g[i] * w;
    }
    const LeastSquaresResult ls = least_squares(a, y);
    r.g2 = ls.coefficients[0];
    r.g3 = ls.coefficients[1];
    r.g4 = ls.coefficients[2];

    const CurvatureReport curv = curvature_at(m, x);
    const Vec bvv = curv.B_of(v);
    r.bvv_norm_sq = dot(bvv, bvv);
    Vec lx, ly;
    for (std::size_t i = 0; i < k; ++i) {
        const double t = r.t[i];
        const double res = r.g[i] - t * t + r.bvv_norm_sq * std::pow(t, 4) / 12.0;
        if (std::abs(res) > 1e-15 * t * t) {
            lx.push_back(std::log(t));
            ly.push_back(std::log(std::abs(res)));
        }
    }
    if (lx.size() >= 2) {
        Mat la(lx.size(), 2);
        for (std::size_t i = 0; i < lx.size(); ++i) { la(i, 0) = 1.0; la(i, 1) = lx[i]; }
        r.residual_exponent = least_squares(la, ly).coefficients[1];
    } else {
        r.residual_exponent = std::numeric_limits<double>::infinity();
    }
    return r;
}

/// Volume density rho(s v) of normal coordinates at x: sqrt(det G) with
/// G_ij = <dy/dw_i, dy/dw_j>, y = exp_x(w), differentiated across a pencil
/// of neighbouring geodesics. `step` is the pencil offset (Richardson with step/2).
inline double volume_density(const EmbeddedManifold& m, const ChartPoint& x, std::span<const double> v, double s,
                             double step = 0x1p-8) {
    m.check_point(x);
    if (!(s > 0 && s < m.delta())) throw DomainError("volume_density: s must lie in (0, delta)");
    const std::size_t d = m.dim();
    const int steps = std::max(64, int(std::ceil(kGeodesicStepsPerUnit * (s + 2 * step))));
    Vec w(d);
    for (std::size_t i = 0; i < d; ++i) w[i] = s * v[i];
    auto endpoint = [&](std::size_t axis, double off) {
        Vec ww = w;
        ww[axis] += off;
        const ChartPoint cp = exp_map(m, x, ww, steps);
        return m.embed(cp);
    };
    Mat jac(m.ambient_dim(), d);
    for (std::size_t i = 0; i < d; ++i) {
        const Vec p1 = endpoint(i, step), m1 = endpoint(i, -step);
        const Vec p2 = endpoint(i, step / 2), m2 = endpoint(i, -step / 2);
        for (std::size_t k = 0; k < m.ambient_dim(); ++k) {
            const double d1 = (p1[k] - m1[k]) / (2 * step);
            const double d2 = (p2[k] - m2[k]) / step;
            jac(k, i) = (4 * d2 - d1) / 3;
        }
    }
    return std::sqrt(determinant(gram(jac)));
}

}  // namespace ckl
