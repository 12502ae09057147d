#pragma once

// Recovering a_0..a_Q from samples of (K_eps f)(x) on a ladder of eps values,
// either by weighted least squares or by the sequential limit
//   a_n = lim_{eps -> 0} (K_eps f - sum_{k<n} a_k eps^k) / eps^n
// with one Richardson step per level.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "ckl/coeffs.hpp"
#include "ckl/error.hpp"
#include "ckl/linalg.hpp"
#include "ckl/manifold.hpp"
#include "ckl/operator.hpp"

namespace ckl {

enum class FitMethod { least_squares, richardson };

inline const char* to_string(FitMethod m) { return m == FitMethod::richardson ? "richardson" : "least_squares"; }

struct FitReport {
    std::vector<double> coefficients;     // a_0 .. a_Q
    std::vector<double> covariance_diag;  // per-coefficient sensitivity
    double max_residual = 0.0;
    double condition = 0.0;
    FitMethod method = FitMethod::least_squares;
};

inline constexpr double kMaxFitCondition = 1e12;

namespace detail {

inline LeastSquaresResult weighted_poly_fit(std::span<const double> eps, std::span<const double> y, int Q, Mat* design,
                                            Vec* rhs) {
    const std::size_t n = eps.size();
    Mat a(n, std::size_t(Q + 1));
    Vec b(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double w = 1.0 / eps[i];
        double p = 1.0;
        for (int q = 0; q <= Q; ++q) {
            a(i, std::size_t(q)) = p * w;
            p *= eps[i];
        }
        b[i] = y[i] * w;
    }
    LeastSquaresResult ls = least_squares(a, b);
    if (design) *design = a;
    if (rhs) *rhs = b;
    return ls;
}

}  // namespace detail

/// Least squares fit of sum_q a_q eps^q with residuals weighted by 1/eps.
/// Sensitivity per coefficient adds the statistical spread of the residuals,
/// the propagated tail bounds, and the shift caused by dropping the largest eps.
inline FitReport fit_polynomial(const EpsLadder& ladder, int Q) {
    if (Q < 0) throw DomainError("fit_polynomial: Q must be >= 0");
    const std::size_t n = ladder.samples.size();
    if (n < std::size_t(Q + 2)) throw DomainError("fit_polynomial: ladder needs at least Q+2 samples");
    Vec eps, y, tail;
    for (const LadderSample& s : ladder.samples) {
        eps.push_back(s.eps);
        y.push_back(s.value);
        tail.push_back(s.tail_bound);
    }
    Mat a;
    Vec b;
    const LeastSquaresResult ls = detail::weighted_poly_fit(eps, y, Q, &a, &b);
    if (!(ls.condition <= kMaxFitCondition))
        throw NumericalError("fit_polynomial: design condition " + std::to_string(ls.condition) +
                             " exceeds 1e12; request fewer coefficients");
    FitReport r;
    r.method = FitMethod::least_squares;
    r.coefficients = ls.coefficients;
    r.condition = ls.condition;
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double model = 0.0, p = 1.0;
        for (int q = 0; q <= Q; ++q) {
            model += ls.coefficients[std::size_t(q)] * p;
            p *= eps[i];
        }
        const double res = y[i] - model;
        r.max_residual = std::max(r.max_residual, std::abs(res));
        rss += (res / eps[i]) * (res / eps[i]);
    }
    const std::size_t dof = n - std::size_t(Q + 1);
    const double sigma2 = dof > 0 ? rss / double(dof) : 0.0;

    std::vector<double> dropped;
    if (n >= std::size_t(Q + 3)) {
        // ladder is ordered by decreasing eps: drop the first sample
        dropped = detail::weighted_poly_fit(std::span(eps).subspan(1), std::span(y).subspan(1), Q, nullptr, nullptr)
                      .coefficients;
    }
    for (int q = 0; q <= Q; ++q) {
        const std::size_t qi = std::size_t(q);
        double s = std::sqrt(sigma2 * ls.normal_inverse(qi, qi));
        // |delta a| <= sum_i |((A^T A)^{-1} A^T)_{qi}| tail_i / eps_i
        for (std::size_t i = 0; i < n; ++i) {
            double c = 0.0;
            for (int k = 0; k <= Q; ++k) c += ls.normal_inverse(qi, std::size_t(k)) * a(i, std::size_t(k));
            s += std::abs(c) * tail[i] / eps[i];
        }
        if (!dropped.empty()) s += std::abs(dropped[qi] - ls.coefficients[qi]);
        r.covariance_diag.push_back(s);
    }
    return r;
}

/// The sequential limit: at level n the sequence (y - sum_{k<n} a_k eps^k) / eps^n
/// is extrapolated linearly in eps between neighbouring samples, and the pair of
/// neighbouring extrapolants that agree best gives a_n (their gap is the sensitivity).
inline FitReport richardson_sequence(const EpsLadder& ladder, int Q) {
    if (Q < 0) throw DomainError("richardson_sequence: Q must be >= 0");
    const std::size_t n = ladder.samples.size();
    if (n < std::size_t(Q + 3)) throw DomainError("richardson_sequence: ladder needs at least Q+3 samples");
    const double ratio = ladder.samples[1].eps / ladder.samples[0].eps;
    if (!(ratio > 0 && ratio < 1)) throw DomainError("richardson_sequence: eps must decrease");
    for (std::size_t i = 1; i < n; ++i) {
        const double r = ladder.samples[i].eps / ladder.samples[i - 1].eps;
        if (std::abs(r - ratio) > 1e-9 * ratio) throw DomainError("richardson_sequence: ladder is not geometric in eps");
    }
    FitReport out;
    out.method = FitMethod::richardson;
    for (int level = 0; level <= Q; ++level) {
        Vec s(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double e = ladder.samples[i].eps;
            double v = ladder.samples[i].value;
            for (int k = 0; k < level; ++k) v -= out.coefficients[std::size_t(k)] * std::pow(e, k);
            s[i] = v / std::pow(e, level);
        }
        Vec rich(n - 1);
        for (std::size_t i = 0; i + 1 < n; ++i) rich[i] = (s[i + 1] - ratio * s[i]) / (1 - ratio);
        std::size_t best = 0;
        double gap = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i + 1 < rich.size(); ++i) {
            const double g = std::abs(rich[i + 1] - rich[i]);
            if (g < gap) {
                gap = g;
                best = i;
            }
        }
        out.coefficients.push_back(rich[best + 1]);
        out.covariance_diag.push_back(gap);
    }
    for (const LadderSample& smp : ladder.samples) {
        double model = 0.0;
        for (int q = 0; q <= Q; ++q) model += out.coefficients[std::size_t(q)] * std::pow(smp.eps, q);
        out.max_residual = std::max(out.max_residual, std::abs(smp.value - model));
    }
    return out;
}

struct ClosedFormComparison {
    double a0_fit = 0.0, a0_closed = 0.0, a0_err = 0.0;
    double a1_fit = 0.0, a1_closed = 0.0, a1_err = 0.0;  // absolute error
    double a1_rel_err = 0.0;
    bool a1_absolute = false;  // closed-form a_1 near zero: absolute tolerance applies
    bool pass_a0 = false, pass_a1 = false;
    [[nodiscard]] bool pass() const { return pass_a0 && pass_a1; }
};

/// Compares fitted a_0, a_1 with f(x) and -Delta f + (f/4)(d^2|H|^2 - 2R).
/// a_1 passes within `tol1_rel` relative error, or `tol1_abs` absolute when |a_1| < tol1_abs.
inline ClosedFormComparison compare_closed_form(const EmbeddedManifold& m, const ScalarField& f, const ChartPoint& x,
                                                const FitReport& fit, double tol0 = 1e-6, double tol1_rel = 0.02,
                                                double tol1_abs = 1e-3) {
    if (fit.coefficients.size() < 2) throw DomainError("compare_closed_form: fit must contain a_0 and a_1");
    ClosedFormComparison c;
    c.a0_fit = fit.coefficients[0];
    c.a1_fit = fit.coefficients[1];
    c.a0_closed = f(m, x.chart, x.coords);
    c.a1_closed = a1_closed_form(m, f, x);
    c.a0_err = std::abs(c.a0_fit - c.a0_closed);
    c.a1_err = std::abs(c.a1_fit - c.a1_closed);
    c.a1_rel_err = c.a1_closed != 0.0 ? c.a1_err / std::abs(c.a1_closed) : c.a1_err;
    c.a1_absolute = std::abs(c.a1_closed) < tol1_abs;
    c.pass_a0 = c.a0_err <= tol0;
    c.pass_a1 = c.a1_absolute ? c.a1_err <= tol1_abs : c.a1_rel_err <= tol1_rel;
    return c;
}

}  // namespace ckl
