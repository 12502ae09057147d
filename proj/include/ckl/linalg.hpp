#pragma once

// Small dense linear algebra for the d x d and n x d systems that show up in
// chart geometry: Cholesky, cyclic Jacobi, generalized symmetric eigenproblems
// and weighted least squares. Sizes here are tiny (d, n <= ~8), so everything
// is row-major std::vector storage without blocking.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ckl/error.hpp"

namespace ckl {

using Vec = std::vector<double>;

class Mat {
public:
    Mat() = default;
    Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Mat identity(std::size_t n) {
        Mat m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }

    double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

    [[nodiscard]] Vec col(std::size_t j) const {
        Vec c(rows_);
        for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
        return c;
    }
    void set_col(std::size_t j, std::span<const double> c) {
        for (std::size_t i = 0; i < rows_; ++i) (*this)(i, j) = c[i];
    }

    [[nodiscard]] Mat transpose() const {
        Mat t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    [[nodiscard]] const std::vector<double>& data() const noexcept { return data_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline Vec axpy(double alpha, std::span<const double> x, std::span<const double> y) {
    Vec r(y.begin(), y.end());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] += alpha * x[i];
    return r;
}

inline Vec sub(std::span<const double> a, std::span<const double> b) {
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

inline Vec scaled(std::span<const double> a, double s) {
    Vec r(a.begin(), a.end());
    for (double& v : r) v *= s;
    return r;
}

inline double dist_sq(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double t = a[i] - b[i];
        s += t * t;
    }
    return s;
}

inline Mat matmul(const Mat& a, const Mat& b) {
    Mat c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

inline Vec matvec(const Mat& a, std::span<const double> x) {
    Vec y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) y[i] += a(i, j) * x[j];
    return y;
}

/// A^T A for a tall matrix.
inline Mat gram(const Mat& a) {
    Mat g(a.cols(), a.cols());
    for (std::size_t i = 0; i < a.cols(); ++i)
        for (std::size_t j = i; j < a.cols(); ++j) {
            double s = 0.0;
            for (std::size_t r = 0; r < a.rows(); ++r) s += a(r, i) * a(r, j);
            g(i, j) = s;
            g(j, i) = s;
        }
    return g;
}

/// Lower-triangular L with A = L L^T. Throws NumericalError if A is not SPD.
inline Mat cholesky(const Mat& a) {
    const std::size_t n = a.rows();
    Mat l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (!(d > 0.0)) throw NumericalError("cholesky: matrix is not positive definite");
        l(j, j) = std::sqrt(d);
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / l(j, j);
        }
    }
    return l;
}

inline double determinant_spd(const Mat& a) {
    const Mat l = cholesky(a);
    double det = 1.0;
    for (std::size_t i = 0; i < l.rows(); ++i) det *= l(i, i) * l(i, i);
    return det;
}

/// General determinant by partial-pivot elimination.
inline double determinant(Mat a) {
    const std::size_t n = a.rows();
    double det = 1.0;
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(a(r, c)) > std::abs(a(piv, c))) piv = r;
        if (a(piv, c) == 0.0) return 0.0;
        if (piv != c) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(c, j), a(piv, j));
            det = -det;
        }
        det *= a(c, c);
        for (std::size_t r = c + 1; r < n; ++r) {
            const double f = a(r, c) / a(c, c);
            for (std::size_t j = c; j < n; ++j) a(r, j) -= f * a(c, j);
        }
    }
    return det;
}

/// Inverse of an SPD matrix through its Cholesky factor.
inline Mat inverse_spd(const Mat& a) {
    const std::size_t n = a.rows();
    const Mat l = cholesky(a);
    Mat inv(n, n);
    Vec e(n), y(n);
    for (std::size_t c = 0; c < n; ++c) {
        std::fill(e.begin(), e.end(), 0.0);
        e[c] = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            double s = e[i];
            for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * y[k];
            y[i] = s / l(i, i);
        }
        for (std::size_t ii = n; ii-- > 0;) {
            double s = y[ii];
            for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * inv(k, c);
            inv(ii, c) = s / l(ii, ii);
        }
    }
    return inv;
}

struct EigenResult {
    Vec values;    // sorted descending
    Mat vectors;   // column i belongs to values[i]
};

/// Cyclic Jacobi rotations for a real symmetric matrix.
inline EigenResult jacobi_eigen(Mat a, int max_sweeps = 64) {
    const std::size_t n = a.rows();
    Mat v = Mat::identity(n);
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0, total = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                total += a(i, j) * a(i, j);
                if (i != j) off += a(i, j) * a(i, j);
            }
        if (off <= 1e-30 * total || off == 0.0) break;
        for (std::size_t p = 0; p + 1 < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });
    EigenResult r{Vec(n), Mat(n, n)};
    for (std::size_t i = 0; i < n; ++i) {
        r.values[i] = a(order[i], order[i]);
        for (std::size_t k = 0; k < n; ++k) r.vectors(k, i) = v(k, order[i]);
    }
    return r;
}

/// Solves B w = lambda G w for symmetric B and SPD G. Eigenvectors are
/// G-orthonormal; eigenvalues sorted descending.
inline EigenResult generalized_eigen(const Mat& b, const Mat& g) {
    const std::size_t n = b.rows();
    const Mat l = cholesky(g);
    // C = L^{-1} B L^{-T}
    Mat linv(n, n);
    for (std::size_t c = 0; c < n; ++c)
        for (std::size_t i = 0; i < n; ++i) {
            double s = (i == c) ? 1.0 : 0.0;
            for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * linv(k, c);
            linv(i, c) = s / l(i, i);
        }
    Mat c = matmul(matmul(linv, b), linv.transpose());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double m = 0.5 * (c(i, j) + c(j, i));
            c(i, j) = m;
            c(j, i) = m;
        }
    EigenResult e = jacobi_eigen(c);
    e.vectors = matmul(linv.transpose(), e.vectors);
    return e;
}

struct LeastSquaresResult {
    Vec coefficients;
    double condition = 0.0;  // 2-norm condition number of the (scaled) design
    Mat normal_inverse;      // (A^T A)^{-1} of the design actually solved
};

/// Solves min ||A x - y|| by Householder QR. Columns are equilibrated before
/// the solve; the condition number reported is that of the equilibrated design.
inline LeastSquaresResult least_squares(const Mat& a_in, std::span<const double> y_in) {
    const std::size_t m = a_in.rows(), n = a_in.cols();
    if (m < n) throw DomainError("least_squares: fewer rows than unknowns");
    Vec scale(n, 1.0);
    Mat a = a_in;
    for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) s += a(i, j) * a(i, j);
        s = std::sqrt(s);
        if (s == 0.0) throw NumericalError("least_squares: zero design column");
        scale[j] = s;
        for (std::size_t i = 0; i < m; ++i) a(i, j) /= s;
    }
    const Mat scaled_design = a;
    Vec y(y_in.begin(), y_in.end());
    for (std::size_t k = 0; k < n; ++k) {
        double nrm = 0.0;
        for (std::size_t i = k; i < m; ++i) nrm += a(i, k) * a(i, k);
        nrm = std::sqrt(nrm);
        if (nrm == 0.0) throw NumericalError("least_squares: rank-deficient design");
        const double alpha = a(k, k) > 0 ? -nrm : nrm;
        Vec v(m, 0.0);
        for (std::size_t i = k; i < m; ++i) v[i] = a(i, k);
        v[k] -= alpha;
        const double vnorm2 = dot(v, v);
        if (vnorm2 == 0.0) continue;
        for (std::size_t j = k; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = k; i < m; ++i) s += v[i] * a(i, j);
            s = 2.0 * s / vnorm2;
            for (std::size_t i = k; i < m; ++i) a(i, j) -= s * v[i];
        }
        double s = 0.0;
        for (std::size_t i = k; i < m; ++i) s += v[i] * y[i];
        s = 2.0 * s / vnorm2;
        for (std::size_t i = k; i < m; ++i) y[i] -= s * v[i];
    }
    Vec x(n, 0.0);
    for (std::size_t ii = n; ii-- > 0;) {
        double s = y[ii];
        for (std::size_t j = ii + 1; j < n; ++j) s -= a(ii, j) * x[j];
        x[ii] = s / a(ii, ii);
    }
    LeastSquaresResult r;
    r.coefficients.resize(n);
    for (std::size_t j = 0; j < n; ++j) r.coefficients[j] = x[j] / scale[j];

    // (A^T A)^{-1} = R^{-1} R^{-T} from the triangular factor
    Mat rinv(n, n, 0.0);
    for (std::size_t c = 0; c < n; ++c)
        for (std::size_t ii = c + 1; ii-- > 0;) {
            double s = ii == c ? 1.0 : 0.0;
            for (std::size_t j = ii + 1; j <= c; ++j) s -= a(ii, j) * rinv(j, c);
            rinv(ii, c) = s / a(ii, ii);
        }
    Mat ninv(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = std::max(i, j); k < n; ++k) ninv(i, j) += rinv(i, k) * rinv(j, k);
    // ||A|| ||A^+|| from the two largest eigenvalues, both well determined
    const double lmax = jacobi_eigen(gram(scaled_design)).values.front();
    const double linv = jacobi_eigen(ninv).values.front();
    r.condition = std::isfinite(linv) ? std::sqrt(lmax * linv) : std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) ninv(i, j) /= scale[i] * scale[j];
    r.normal_inverse = std::move(ninv);
    return r;
}

}  // namespace ckl
