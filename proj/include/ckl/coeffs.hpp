#pragma once

// Expansion coefficients a_q of (K_eps f)(x) ~ sum_q a_q eps^q.
//
// The engine works from Taylor data in polar normal coordinates s v:
//   f(exp_x(s v))     = sum_k f_k(v) s^k / k!
//   volume density    = sum_j rho_j(v) s^j / j!
//   |exp_x(s v) - x|^2 = s^2 + sum_{j>=4} q_j(v) s^j / j!
// all homogeneous polynomials in v. Closed forms for a_0, a_1 and eta_1 come
// from curvature and the Laplace-Beltrami operator instead.

#include <cmath>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "ckl/error.hpp"
#include "ckl/manifold.hpp"
#include "ckl/moments.hpp"

namespace ckl {

struct TaylorData {
    std::size_t dim = 0;
    std::vector<HomogeneousPoly> f_terms;    // f_0 .. f_L
    std::vector<HomogeneousPoly> rho_terms;  // rho_0 .. rho_L, rho_0 = 1
    std::vector<HomogeneousPoly> q_terms;    // q_terms[i] has degree i + 4

    [[nodiscard]] int max_q_degree() const { return int(q_terms.size()) + 3; }

    void validate() const {
        if (dim < 1) throw DomainError("TaylorData: dim must be >= 1");
        auto check = [&](const std::vector<HomogeneousPoly>& ts, int offset, const char* name) {
            for (std::size_t i = 0; i < ts.size(); ++i) {
                if (ts[i].dim() != dim) throw DomainError(std::string("TaylorData: ") + name + " dimension mismatch");
                if (!ts[i].is_zero() && ts[i].degree() != int(i) + offset)
                    throw DomainError(std::string("TaylorData: ") + name + " term " + std::to_string(i) +
                                      " has wrong degree");
            }
        };
        check(f_terms, 0, "f_terms");
        check(rho_terms, 0, "rho_terms");
        check(q_terms, 4, "q_terms");
        if (rho_terms.empty() || rho_terms[0].coeff(MultiIndex(dim, 0)) != 1.0 || rho_terms[0].terms().size() != 1)
            throw DomainError("TaylorData: rho_0 must be the constant 1");
    }
};

namespace detail {

inline HomogeneousPoly term_or_zero(const std::vector<HomogeneousPoly>& ts, std::size_t i, std::size_t dim,
                                    int degree) {
    if (i < ts.size() && !ts[i].is_zero()) return ts[i];
    return HomogeneousPoly(dim, degree);
}

inline double binomial(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

}  // namespace detail

/// Taylor data of the unit-speed normal coordinates on a round sphere of
/// radius r in R^{d+1}. The chord and the density are radial:
/// |y - x|^2 = 4 r^2 sin^2(s / 2r), density (r sin(s/r) / s)^{d-1}.
inline TaylorData round_sphere_taylor(std::size_t d, std::vector<HomogeneousPoly> f_terms, int max_degree,
                                      double r = 1.0) {
    if (max_degree < 4) throw DomainError("round_sphere_taylor: max_degree must be >= 4");
    TaylorData td;
    td.dim = d;
    td.f_terms = std::move(f_terms);
    // (sin x / x) series, then its (d-1)-th power
    const int L = max_degree;
    std::vector<double> sinc(L + 1, 0.0), pw(L + 1, 0.0);
    for (int k = 0; 2 * k <= L; ++k) sinc[2 * k] = ((k % 2) ? -1.0 : 1.0) / detail::factorial(2 * k + 1);
    pw[0] = 1.0;
    for (std::size_t e = 1; e < d; ++e) {
        std::vector<double> next(L + 1, 0.0);
        for (int i = 0; i <= L; ++i)
            for (int j = 0; i + j <= L; ++j) next[i + j] += pw[i] * sinc[j];
        pw = next;
    }
    for (int j = 0; j <= L; ++j) {
        if (j % 2 == 1 || pw[j] == 0.0) {
            td.rho_terms.emplace_back(d, j);
            continue;
        }
        td.rho_terms.push_back(HomogeneousPoly::radial(d, j / 2, detail::factorial(j) * pw[j] * std::pow(r, -j)));
    }
    for (int j = 4; j <= L; ++j) {
        if (j % 2 == 1) {
            td.q_terms.emplace_back(d, j);
            continue;
        }
        const int k = j / 2;
        const double c = 2.0 * ((k % 2) ? 1.0 : -1.0) * std::pow(r, 2 - j);
        td.q_terms.push_back(HomogeneousPoly::radial(d, k, c));
    }
    td.validate();
    return td;
}

/// Euclidean R^d: density 1 and chord equal to s^2.
inline TaylorData flat_taylor(std::size_t d, std::vector<HomogeneousPoly> f_terms, int max_degree) {
    TaylorData td;
    td.dim = d;
    td.f_terms = std::move(f_terms);
    td.rho_terms.push_back(HomogeneousPoly::constant(d, 1.0));
    for (int j = 1; j <= max_degree; ++j) td.rho_terms.emplace_back(d, j);
    for (int j = 4; j <= max_degree; ++j) td.q_terms.emplace_back(d, j);
    td.validate();
    return td;
}

/// alpha_l = sum_j C(l, j) f_j rho_{l-j}: the Taylor terms of f times the density.
inline std::vector<HomogeneousPoly> alpha_terms(const TaylorData& td, int max_l = -1) {
    if (max_l < 0) max_l = int(std::min(td.f_terms.size(), td.rho_terms.size())) - 1;
    std::vector<HomogeneousPoly> out;
    for (int l = 0; l <= max_l; ++l) {
        HomogeneousPoly a(td.dim, l);
        for (int j = 0; j <= l; ++j) {
            const HomogeneousPoly fj = detail::term_or_zero(td.f_terms, std::size_t(j), td.dim, j);
            const HomogeneousPoly rj = detail::term_or_zero(td.rho_terms, std::size_t(l - j), td.dim, l - j);
            if (fj.is_zero() || rj.is_zero()) continue;
            a = poly_add(a, poly_scale(poly_mul(fj, rj), detail::binomial(l, j)));
        }
        out.push_back(std::move(a));
    }
    return out;
}

/// b_{m,k} = B_{m,k}(q_1, q_2, ...) with q_1 = q_2 = q_3 = 0, for 1 <= k <= Q and
/// 4k <= m <= 2Q + 2k. Result indexed [m][k]; entries with m < 4k are zero.
inline std::map<int, std::map<int, HomogeneousPoly>> beta_terms(const TaylorData& td, int Q) {
    std::map<int, std::map<int, HomogeneousPoly>> out;
    for (int k = 1; k <= Q; ++k)
        for (int m = 4 * k; m <= 2 * Q + 2 * k; ++m) {
            const int needed = m - 4 * (k - 1);
            if (needed > td.max_q_degree())
                throw DomainError("beta_terms: q term of degree " + std::to_string(needed) +
                                  " is missing (have up to degree " + std::to_string(td.max_q_degree()) + ")");
            std::vector<HomogeneousPoly> xs;
            for (int i = 1; i <= m - k + 1; ++i)
                xs.push_back(i < 4 ? HomogeneousPoly(td.dim, i)
                                   : detail::term_or_zero(td.q_terms, std::size_t(i - 4), td.dim, i));
            out[m][k] = bell_partial(m, k, xs);
        }
    return out;
}

struct EtaW {
    std::vector<double> eta;                           // eta_0 .. eta_Q
    std::map<std::tuple<int, int, int>, double> w;     // (p, m, k) -> w_{p,m,k}
    bool flat = false;                                 // every q term vanished

    [[nodiscard]] double w_at(int p, int m, int k) const {
        const auto it = w.find({p, m, k});
        if (it == w.end())
            throw DomainError("w(" + std::to_string(p) + "," + std::to_string(m) + "," + std::to_string(k) +
                              ") not available");
        return it->second;
    }
};

/// eta_p = avg alpha_{2p}, w_{p,m,k} = avg(alpha_{2p-m} b_{m,k}) over the unit sphere.
inline EtaW eta_w(const TaylorData& td, int Q) {
    if (Q < 0) throw DomainError("eta_w: Q must be >= 0");
    td.validate();
    const int need = 2 * Q;
    if (int(td.f_terms.size()) <= need || int(td.rho_terms.size()) <= need)
        throw DomainError("eta_w: f_terms and rho_terms must reach degree " + std::to_string(need));
    const std::vector<HomogeneousPoly> alpha = alpha_terms(td, need);
    EtaW r;
    for (int p = 0; p <= Q; ++p) r.eta.push_back(poly_sphere_average(alpha[2 * p]));
    r.flat = true;
    for (const HomogeneousPoly& q : td.q_terms)
        if (!q.is_zero()) r.flat = false;
    if (Q == 0) return r;
    const auto beta = beta_terms(td, Q);
    for (int k = 1; k <= Q; ++k)
        for (int q = k; q <= Q; ++q) {
            const int p = q + k;
            for (int m = 4 * k; m <= 2 * p; ++m) {
                const HomogeneousPoly& b = beta.at(m).at(k);
                const HomogeneousPoly& a = alpha[2 * p - m];
                // odd total degree averages to exactly zero inside poly_sphere_average
                r.w[{p, m, k}] = (a.is_zero() || b.is_zero()) ? 0.0 : poly_sphere_average(poly_mul(a, b));
            }
        }
    return r;
}

enum class CoefficientSource { closed_form, engine, fitted };

struct ExpansionCoefficients {
    std::vector<double> values;       // a_0 .. a_Q
    CoefficientSource source = CoefficientSource::engine;
    std::vector<double> diagnostics;  // per coefficient residual or bound
};

inline ExpansionCoefficients assemble_a(const EtaW& ew, int d, int Q) {
    if (int(ew.eta.size()) <= Q) throw DomainError("assemble_a: eta missing for requested Q");
    ExpansionCoefficients out;
    out.source = CoefficientSource::engine;
    for (int q = 0; q <= Q; ++q) {
        const double four_q = std::pow(4.0, q);
        double a = four_q * pochhammer(0.5 * d, q) / detail::factorial(2 * q) * ew.eta[q];
        if (!ew.flat) {
            for (int k = 1; k <= q; ++k)
                for (int m = 4 * k; m <= 2 * q + 2 * k; ++m) {
                    const double sign = (k % 2) ? -1.0 : 1.0;
                    a += sign * four_q * pochhammer(0.5 * d, q + k) /
                         (detail::factorial(m) * detail::factorial(2 * q + 2 * k - m)) * ew.w_at(q + k, m, k);
                }
        }
        if (!std::isfinite(a)) throw NumericalError("assemble_a: non-finite coefficient");
        out.values.push_back(a);
        out.diagnostics.push_back(0.0);
    }
    return out;
}

inline ExpansionCoefficients expansion_from_taylor(const TaylorData& td, int Q) {
    return assemble_a(eta_w(td, Q), int(td.dim), Q);
}

/// a_1 = -Delta f + (f / 4)(d^2 |H|^2 - 2 R).
inline double a1_closed_form(const EmbeddedManifold& m, const ScalarField& f, const ChartPoint& x) {
    const CurvatureReport c = curvature_at(m, x);
    const double d = double(m.dim());
    const double fx = f(m, x.chart, x.coords);
    return -laplace_beltrami(m, f, x) + fx / 4.0 * (d * d * c.mean_curvature_norm_sq - 2.0 * c.scalar_curvature);
}

/// eta_1 = (1/d)(-Delta f - R f / 3).
inline double eta1_closed_form(const EmbeddedManifold& m, const ScalarField& f, const ChartPoint& x) {
    const CurvatureReport c = curvature_at(m, x);
    const double d = double(m.dim());
    const double fx = f(m, x.chart, x.coords);
    return (-laplace_beltrami(m, f, x) - c.scalar_curvature * fx / 3.0) / d;
}

inline ExpansionCoefficients closed_form_coefficients(const EmbeddedManifold& m, const ScalarField& f,
                                                      const ChartPoint& x) {
    ExpansionCoefficients out;
    out.source = CoefficientSource::closed_form;
    out.values = {f(m, x.chart, x.coords), a1_closed_form(m, f, x)};
    out.diagnostics = {0.0, 0.0};
    return out;
}

}  // namespace ckl
