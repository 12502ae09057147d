#pragma once

// Second-order forward-mode jets. Catalog charts are written once as templates
// over the scalar type; instantiating them with Jet2 yields exact first and
// second derivatives, which the tests use as an oracle for the finite-difference
// path the library runs on.

#include <cmath>
#include <cstddef>
#include <vector>

namespace ckl {

struct Jet2 {
    double v = 0.0;
    std::vector<double> g;  // gradient, size d
    std::vector<double> h;  // Hessian, row-major d x d

    Jet2() = default;
    Jet2(double value, std::size_t d) : v(value), g(d, 0.0), h(d * d, 0.0) {}

    static Jet2 variable(double value, std::size_t d, std::size_t i) {
        Jet2 j(value, d);
        j.g[i] = 1.0;
        return j;
    }
    [[nodiscard]] std::size_t dim() const noexcept { return g.size(); }
};

namespace detail {
// r = chain(a) with outer derivatives f1 = f'(a.v), f2 = f''(a.v)
inline Jet2 chain(const Jet2& a, double f0, double f1, double f2) {
    const std::size_t d = a.dim();
    Jet2 r(f0, d);
    for (std::size_t i = 0; i < d; ++i) r.g[i] = f1 * a.g[i];
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            r.h[i * d + j] = f1 * a.h[i * d + j] + f2 * a.g[i] * a.g[j];
    return r;
}
}  // namespace detail

inline Jet2 operator+(const Jet2& a, const Jet2& b) {
    Jet2 r = a;
    r.v += b.v;
    for (std::size_t i = 0; i < r.g.size(); ++i) r.g[i] += b.g[i];
    for (std::size_t i = 0; i < r.h.size(); ++i) r.h[i] += b.h[i];
    return r;
}
inline Jet2 operator-(const Jet2& a) {
    Jet2 r = a;
    r.v = -r.v;
    for (double& x : r.g) x = -x;
    for (double& x : r.h) x = -x;
    return r;
}
inline Jet2 operator-(const Jet2& a, const Jet2& b) { return a + (-b); }
inline Jet2 operator*(const Jet2& a, const Jet2& b) {
    const std::size_t d = a.dim();
    Jet2 r(a.v * b.v, d);
    for (std::size_t i = 0; i < d; ++i) r.g[i] = a.g[i] * b.v + a.v * b.g[i];
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            r.h[i * d + j] = a.h[i * d + j] * b.v + a.v * b.h[i * d + j] + a.g[i] * b.g[j] +
                             a.g[j] * b.g[i];
    return r;
}
inline Jet2 operator+(const Jet2& a, double c) { Jet2 r = a; r.v += c; return r; }
inline Jet2 operator+(double c, const Jet2& a) { return a + c; }
inline Jet2 operator-(const Jet2& a, double c) { return a + (-c); }
inline Jet2 operator-(double c, const Jet2& a) { return (-a) + c; }
inline Jet2 operator*(const Jet2& a, double c) {
    Jet2 r = a;
    r.v *= c;
    for (double& x : r.g) x *= c;
    for (double& x : r.h) x *= c;
    return r;
}
inline Jet2 operator*(double c, const Jet2& a) { return a * c; }
inline Jet2 operator/(const Jet2& a, double c) { return a * (1.0 / c); }
inline Jet2 reciprocal(const Jet2& a) {
    const double inv = 1.0 / a.v;
    return detail::chain(a, inv, -inv * inv, 2.0 * inv * inv * inv);
}
inline Jet2 operator/(const Jet2& a, const Jet2& b) { return a * reciprocal(b); }
inline Jet2 operator/(double c, const Jet2& b) { return c * reciprocal(b); }

inline Jet2 sin(const Jet2& a) {
    return detail::chain(a, std::sin(a.v), std::cos(a.v), -std::sin(a.v));
}
inline Jet2 cos(const Jet2& a) {
    return detail::chain(a, std::cos(a.v), -std::sin(a.v), -std::cos(a.v));
}
inline Jet2 sqrt(const Jet2& a) {
    const double s = std::sqrt(a.v);
    return detail::chain(a, s, 0.5 / s, -0.25 / (s * a.v));
}
inline Jet2 pow(const Jet2& a, int n) {
    if (n == 0) return Jet2(1.0, a.dim());
    const double vn2 = n >= 2 ? std::pow(a.v, n - 2) : 0.0;
    const double vn1 = std::pow(a.v, n - 1);
    return detail::chain(a, std::pow(a.v, n), n * vn1, n * (n - 1) * vn2);
}

// Overloads so chart templates can call the same names for double.
inline double pow(double a, int n) { return std::pow(a, n); }

}  // namespace ckl
