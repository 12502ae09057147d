#pragma once

// Homogeneous polynomials in the direction variables v_1..v_d, partial
// exponential Bell polynomials, averages of monomials over the unit sphere
// S^{d-1}, Pochhammer symbols, the truncated radial Gaussian moments c_p(eps)
// and the low-order Taylor terms of the normal-coordinate volume density.

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "ckl/error.hpp"
#include "ckl/linalg.hpp"

namespace ckl {

using MultiIndex = std::vector<int>;

inline int total_degree(const MultiIndex& a) {
    int s = 0;
    for (int e : a) s += e;
    return s;
}

/// A homogeneous polynomial: every stored exponent has |alpha| == degree and
/// no stored coefficient is zero. The zero polynomial keeps a nominal degree.
class HomogeneousPoly {
public:
    HomogeneousPoly() = default;
    HomogeneousPoly(std::size_t dim, int degree) : dim_(dim), degree_(degree) {
        if (degree < 0) throw DomainError("HomogeneousPoly: negative degree");
    }

    static HomogeneousPoly constant(std::size_t dim, double c) {
        HomogeneousPoly p(dim, 0);
        p.add_term(MultiIndex(dim, 0), c);
        return p;
    }
    static HomogeneousPoly monomial(MultiIndex alpha, double c) {
        HomogeneousPoly p(alpha.size(), total_degree(alpha));
        p.add_term(std::move(alpha), c);
        return p;
    }
    /// v_i, 0-based.
    static HomogeneousPoly variable(std::size_t dim, std::size_t i) {
        MultiIndex a(dim, 0);
        a[i] = 1;
        return monomial(std::move(a), 1.0);
    }
    /// (v_1^2 + ... + v_d^2)^k
    static HomogeneousPoly radial(std::size_t dim, int k, double c = 1.0);

    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
    [[nodiscard]] int degree() const noexcept { return degree_; }
    [[nodiscard]] bool is_zero() const noexcept { return terms_.empty(); }
    [[nodiscard]] const std::map<MultiIndex, double>& terms() const noexcept { return terms_; }

    [[nodiscard]] double coeff(const MultiIndex& a) const {
        const auto it = terms_.find(a);
        return it == terms_.end() ? 0.0 : it->second;
    }

    void add_term(MultiIndex a, double c) {
        if (a.size() != dim_) throw DomainError("HomogeneousPoly: multi-index length differs from dim");
        for (int e : a)
            if (e < 0) throw DomainError("HomogeneousPoly: negative exponent");
        if (total_degree(a) != degree_) throw DomainError("HomogeneousPoly: term degree differs from poly degree");
        if (c == 0.0) return;
        auto [it, inserted] = terms_.emplace(std::move(a), c);
        if (!inserted) {
            it->second += c;
            if (it->second == 0.0) terms_.erase(it);
        }
    }

    [[nodiscard]] double evaluate(std::span<const double> v) const {
        double s = 0.0;
        for (const auto& [a, c] : terms_) {
            double t = c;
            for (std::size_t i = 0; i < dim_; ++i)
                for (int e = 0; e < a[i]; ++e) t *= v[i];
            s += t;
        }
        return s;
    }

private:
    std::size_t dim_ = 0;
    int degree_ = 0;
    std::map<MultiIndex, double> terms_;
};

inline HomogeneousPoly poly_mul(const HomogeneousPoly& a, const HomogeneousPoly& b) {
    if (a.dim() != b.dim()) throw DomainError("poly_mul: dimension mismatch");
    HomogeneousPoly r(a.dim(), a.degree() + b.degree());
    for (const auto& [ea, ca] : a.terms())
        for (const auto& [eb, cb] : b.terms()) {
            MultiIndex e(a.dim());
            for (std::size_t i = 0; i < e.size(); ++i) e[i] = ea[i] + eb[i];
            r.add_term(std::move(e), ca * cb);
        }
    return r;
}

/// Sum of two polynomials of the same degree (a zero operand adopts the other's degree).
inline HomogeneousPoly poly_add(const HomogeneousPoly& a, const HomogeneousPoly& b) {
    if (a.dim() != b.dim()) throw DomainError("poly_add: dimension mismatch");
    if (a.is_zero()) return b;
    if (b.is_zero()) return a;
    if (a.degree() != b.degree()) throw DomainError("poly_add: degree mismatch");
    HomogeneousPoly r = a;
    for (const auto& [e, c] : b.terms()) r.add_term(e, c);
    return r;
}

inline HomogeneousPoly poly_scale(const HomogeneousPoly& a, double s) {
    HomogeneousPoly r(a.dim(), a.degree());
    if (s == 0.0) return r;
    for (const auto& [e, c] : a.terms()) r.add_term(e, c * s);
    return r;
}

inline HomogeneousPoly HomogeneousPoly::radial(std::size_t dim, int k, double c) {
    HomogeneousPoly sq(dim, 2);
    for (std::size_t i = 0; i < dim; ++i) {
        MultiIndex a(dim, 0);
        a[i] = 2;
        sq.add_term(std::move(a), 1.0);
    }
    HomogeneousPoly r = constant(dim, c);
    for (int j = 0; j < k; ++j) r = poly_mul(r, sq);
    return r;
}

// ---------------------------------------------------------------------------
// Bell polynomials

namespace detail {

inline std::uint64_t factorial_u64(int n) {
    if (n < 0 || n > 20) throw DomainError("factorial: argument outside 0..20");
    std::uint64_t f = 1;
    for (int i = 2; i <= n; ++i) f *= std::uint64_t(i);
    return f;
}

inline double factorial(int n) { return double(factorial_u64(n)); }

// Calls visit(j) for every sequence j_1..j_{m-k+1} (stored 0-based) with
// sum j_i = k and sum i j_i = m, in lexicographic order of the DFS.
template <class Visit>
void bell_sequences(int m, int k, Visit&& visit) {
    const int len = m - k + 1;
    std::vector<int> j(len, 0);
    std::function<void(int, int, int)> rec = [&](int i, int left_k, int left_m) {
        if (i == 0) {
            // j_1 absorbs what is left
            if (left_k == left_m) {
                j[0] = left_k;
                visit(j);
                j[0] = 0;
            }
            return;
        }
        const int part = i + 1;
        for (int c = 0; c * part <= left_m && c <= left_k; ++c) {
            j[i] = c;
            rec(i - 1, left_k - c, left_m - c * part);
        }
        j[i] = 0;
    };
    rec(len - 1, k, m);
}

// m! / (prod j_i! (i!)^{j_i}) as an exact integer.
inline double bell_coefficient(int m, const std::vector<int>& j) {
    unsigned __int128 denom = 1;
    for (std::size_t i = 0; i < j.size(); ++i) {
        denom *= factorial_u64(j[i]);
        for (int r = 0; r < j[i]; ++r) denom *= factorial_u64(int(i) + 1);
    }
    const unsigned __int128 num = factorial_u64(m);
    if (num % denom != 0) throw NumericalError("bell coefficient is not integral");
    return double(std::uint64_t(num / denom));
}

inline void check_bell_args(int m, int k, std::size_t nx) {
    if (k < 1 || k > m) throw DomainError("bell_partial: need 1 <= k <= m");
    if (m > 20) throw DomainError("bell_partial: m above 20 overflows the exact factorial table");
    if (nx < std::size_t(m - k + 1)) throw DomainError("bell_partial: need at least m-k+1 arguments");
}

}  // namespace detail

/// Partial exponential Bell polynomial B_{m,k}(x_1, ..., x_{m-k+1}); xs[0] is x_1.
inline double bell_partial(int m, int k, std::span<const double> xs) {
    detail::check_bell_args(m, k, xs.size());
    double total = 0.0;
    detail::bell_sequences(m, k, [&](const std::vector<int>& j) {
        double t = detail::bell_coefficient(m, j);
        for (std::size_t i = 0; i < j.size(); ++i)
            for (int r = 0; r < j[i]; ++r) t *= xs[i];
        total += t;
    });
    return total;
}

/// Polynomial-valued B_{m,k}; xs[i] is the argument x_{i+1}.
inline HomogeneousPoly bell_partial(int m, int k, const std::vector<HomogeneousPoly>& xs) {
    detail::check_bell_args(m, k, xs.size());
    const std::size_t dim = xs.front().dim();
    HomogeneousPoly total(dim, m);
    detail::bell_sequences(m, k, [&](const std::vector<int>& j) {
        HomogeneousPoly t = HomogeneousPoly::constant(dim, detail::bell_coefficient(m, j));
        for (std::size_t i = 0; i < j.size() && !t.is_zero(); ++i)
            for (int r = 0; r < j[i]; ++r) {
                if (xs[i].is_zero()) {
                    t = HomogeneousPoly(dim, m);
                    break;
                }
                t = poly_mul(t, xs[i]);
            }
        if (!t.is_zero()) total = poly_add(total, t);
    });
    return total;
}

struct GeneratingCheck {
    double lhs = 0.0;
    double rhs = 0.0;
};

/// Both sides of exp(u sum_j x_j t^j / j!) = 1 + sum_m t^m/m! sum_k u^k B_{m,k}(x),
/// truncated at order M in t. The exponential is expanded as a power series in t
/// so that both sides carry exactly the same truncation.
inline GeneratingCheck bell_generating_check(std::span<const double> xs, double u, double t, int M) {
    if (M < 1 || M > 20) throw DomainError("bell_generating_check: M must be in 1..20");
    if (xs.size() < std::size_t(M)) throw DomainError("bell_generating_check: need M values");
    // e(t) = u sum x_j t^j / j!; exp(e) truncated by the recurrence
    // (exp e)' = e' exp e on Taylor coefficients.
    std::vector<double> e(M + 1, 0.0), y(M + 1, 0.0);
    for (int j = 1; j <= M; ++j) e[j] = u * xs[j - 1] / detail::factorial(j);
    y[0] = 1.0;
    for (int n = 1; n <= M; ++n) {
        double s = 0.0;
        for (int j = 1; j <= n; ++j) s += j * e[j] * y[n - j];
        y[n] = s / n;
    }
    GeneratingCheck r;
    double tp = 1.0;
    for (int n = 0; n <= M; ++n) {
        r.lhs += y[n] * tp;
        tp *= t;
    }
    r.rhs = 1.0;
    tp = 1.0;
    for (int m = 1; m <= M; ++m) {
        tp *= t;
        double inner = 0.0, uk = 1.0;
        for (int k = 1; k <= m; ++k) {
            uk *= u;
            inner += uk * bell_partial(m, k, xs.subspan(0, std::size_t(m - k + 1)));
        }
        r.rhs += tp / detail::factorial(m) * inner;
    }
    return r;
}

// ---------------------------------------------------------------------------
// Sphere moments

/// Average of v^alpha over the unit sphere S^{d-1} (alpha = 0 gives 1):
/// prod (alpha_i - 1)!! / (d (d+2) ... (d + |alpha| - 2)), zero if any alpha_i is odd.
inline double sphere_moment(const MultiIndex& alpha, int d) {
    if (d < 1) throw DomainError("sphere_moment: d must be >= 1");
    if (alpha.size() > std::size_t(d)) throw DomainError("sphere_moment: multi-index longer than d");
    double num = 1.0;
    int half = 0;
    for (int e : alpha) {
        if (e < 0) throw DomainError("sphere_moment: negative exponent");
        if (e % 2 != 0) return 0.0;
        for (int k = e - 1; k > 1; k -= 2) num *= k;
        half += e / 2;
    }
    double den = 1.0;
    for (int j = 0; j < half; ++j) den *= d + 2 * j;
    return num / den;
}

inline double poly_sphere_average(const HomogeneousPoly& p) {
    if (p.degree() % 2 != 0 || p.is_zero()) return 0.0;
    double s = 0.0;
    for (const auto& [a, c] : p.terms()) s += c * sphere_moment(a, int(p.dim()));
    return s;
}

/// Rising factorial q (q+1) ... (q+n-1).
inline double pochhammer(double q, int n) {
    if (n < 0) throw DomainError("pochhammer: n must be >= 0");
    double r = 1.0;
    for (int j = 0; j < n; ++j) r *= q + j;
    return r;
}

// ---------------------------------------------------------------------------
// c_p(eps) = (4 pi eps)^{-d/2} int_0^delta exp(-s^2/4eps) s^{2p+d-1} ds

struct CpEstimate {
    double value = 0.0;
    double main_term = 0.0;  // (4 eps)^p Gamma(p + d/2) / (2 pi^{d/2})
    double tail = 0.0;       // main_term - value, computed without cancellation
    double bound = 0.0;      // 2^{p + d/2} exp(-delta^2 / 8 eps) main_term
};

inline CpEstimate c_p(int p, double eps, double delta, int d) {
    if (p < 0) throw DomainError("c_p: p must be >= 0");
    if (d < 1) throw DomainError("c_p: d must be >= 1");
    if (!(eps > 0)) throw DomainError("c_p: eps must be > 0");
    if (!(delta > 0)) throw DomainError("c_p: delta must be > 0");
    const double a = p + 0.5 * d;
    const double x = delta * delta / (4 * eps);
    const double log_pref = p * std::log(4 * eps) - 0.5 * d * std::log(std::numbers::pi) - std::log(2.0);
    const double log_main = log_pref + std::lgamma(a);
    CpEstimate r;
    r.main_term = std::exp(log_main);
    r.value = r.main_term * boost::math::gamma_p(a, x);
    r.tail = r.main_term * boost::math::gamma_q(a, x);
    r.bound = std::exp(a * std::log(2.0) - delta * delta / (8 * eps) + log_main);
    if (!std::isfinite(r.main_term) || !std::isfinite(r.value) || !std::isfinite(r.bound) ||
        !std::isfinite(r.tail) || r.main_term == 0.0)
        throw NumericalError("c_p: overflow for p = " + std::to_string(p));
    if (r.tail > r.bound * (1 + 1e-12))
        throw NumericalError("c_p: truncation bound violated");
    return r;
}

// ---------------------------------------------------------------------------
// Volume density terms in normal coordinates

/// rho_0..rho_4 of the volume density rho(s v) = sum rho_j(v) s^j / j!.
/// ricci[i*d+j]; ricci_grad[(i*d+j)*d+k] = nabla_i R_jk;
/// riemann[((i*d+a)*d+j)*d+b] = R_iajb; ricci_hess[((i*d+j)*d+k)*d+l] = nabla_i nabla_j R_kl.
inline std::vector<HomogeneousPoly> gray_density_terms(std::size_t d, std::span<const double> ricci,
                                                        std::span<const double> ricci_grad,
                                                        std::span<const double> riemann,
                                                        std::span<const double> ricci_hess) {
    if (ricci.size() != d * d || ricci_grad.size() != d * d * d || riemann.size() != d * d * d * d ||
        ricci_hess.size() != d * d * d * d)
        throw DomainError("gray_density_terms: tensor dimension mismatch");
    auto idx = [&](std::initializer_list<std::size_t> ids) {
        MultiIndex a(d, 0);
        for (std::size_t i : ids) ++a[i];
        return a;
    };
    std::vector<HomogeneousPoly> rho;
    rho.push_back(HomogeneousPoly::constant(d, 1.0));
    rho.emplace_back(d, 1);
    HomogeneousPoly r2(d, 2), r3(d, 3), r4(d, 4);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            r2.add_term(idx({i, j}), -ricci[i * d + j] / 3.0);
            for (std::size_t k = 0; k < d; ++k) {
                r3.add_term(idx({i, j, k}), -0.5 * ricci_grad[(i * d + j) * d + k]);
                for (std::size_t l = 0; l < d; ++l) {
                    double rr = 0.0;
                    for (std::size_t a = 0; a < d; ++a)
                        for (std::size_t b = 0; b < d; ++b)
                            rr += riemann[((i * d + a) * d + j) * d + b] * riemann[((k * d + a) * d + l) * d + b];
                    const double c = -0.6 * ricci_hess[((i * d + j) * d + k) * d + l] +
                                     ricci[i * d + j] * ricci[k * d + l] / 3.0 - 2.0 / 15.0 * rr;
                    r4.add_term(idx({i, j, k, l}), c);
                }
            }
        }
    rho.push_back(std::move(r2));
    rho.push_back(std::move(r3));
    rho.push_back(std::move(r4));
    return rho;
}

}  // namespace ckl
