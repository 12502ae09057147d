#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "ckl/linalg.hpp"

using namespace ckl;
using Catch::Approx;

namespace {

Mat random_spd(std::size_t n, std::mt19937_64& gen) {
    std::normal_distribution<double> nd;
    Mat a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a(i, j) = nd(gen);
    Mat g = gram(a);
    for (std::size_t i = 0; i < n; ++i) g(i, i) += 0.5;
    return g;
}

Mat random_symmetric(std::size_t n, std::mt19937_64& gen) {
    std::normal_distribution<double> nd;
    Mat a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) a(i, j) = a(j, i) = nd(gen);
    return a;
}

}  // namespace

TEST_CASE("cholesky reproduces the matrix and rejects indefinite input", "[linalg]") {
    std::mt19937_64 gen(7);
    for (std::size_t n = 1; n <= 6; ++n) {
        const Mat g = random_spd(n, gen);
        const Mat l = cholesky(g);
        const Mat back = matmul(l, l.transpose());
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) REQUIRE(back(i, j) == Approx(g(i, j)).margin(1e-12));
        REQUIRE(determinant_spd(g) == Approx(determinant(g)).epsilon(1e-12));
        const Mat inv = inverse_spd(g);
        const Mat id = matmul(inv, g);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) REQUIRE(id(i, j) == Approx(i == j ? 1.0 : 0.0).margin(1e-10));
    }
    Mat bad(2, 2);
    bad(0, 0) = 1;
    bad(1, 1) = -1;
    REQUIRE_THROWS_AS(cholesky(bad), NumericalError);
}

TEST_CASE("jacobi eigen decomposition", "[linalg]") {
    std::mt19937_64 gen(11);
    for (std::size_t n = 1; n <= 7; ++n) {
        const Mat a = random_symmetric(n, gen);
        const EigenResult e = jacobi_eigen(a);
        for (std::size_t i = 0; i + 1 < n; ++i) REQUIRE(e.values[i] >= e.values[i + 1]);
        for (std::size_t i = 0; i < n; ++i) {
            const Vec v = e.vectors.col(i);
            const Vec av = matvec(a, v);
            for (std::size_t k = 0; k < n; ++k) REQUIRE(av[k] == Approx(e.values[i] * v[k]).margin(1e-12));
            REQUIRE(norm(v) == Approx(1.0).epsilon(1e-13));
        }
    }
}

TEST_CASE("generalized eigenproblem residual and G-orthonormality", "[linalg]") {
    std::mt19937_64 gen(3);
    for (std::size_t n = 1; n <= 5; ++n) {
        const Mat b = random_symmetric(n, gen);
        const Mat g = random_spd(n, gen);
        const EigenResult e = generalized_eigen(b, g);
        double bnorm = 0.0;
        for (double v : b.data()) bnorm = std::max(bnorm, std::abs(v));
        for (std::size_t i = 0; i < n; ++i) {
            const Vec w = e.vectors.col(i);
            const Vec bw = matvec(b, w), gw = matvec(g, w);
            double res = 0.0;
            for (std::size_t k = 0; k < n; ++k) res = std::max(res, std::abs(bw[k] - e.values[i] * gw[k]));
            REQUIRE(res <= 1e-10 * bnorm);
            for (std::size_t j = 0; j < n; ++j)
                REQUIRE(dot(w, matvec(g, e.vectors.col(j))) == Approx(i == j ? 1.0 : 0.0).margin(1e-11));
        }
    }
}

TEST_CASE("least squares recovers exact solutions and reports conditioning", "[linalg]") {
    Mat a(5, 3);
    const Vec x{1.5, -2.0, 0.25};
    for (std::size_t i = 0; i < 5; ++i) {
        const double t = 0.1 * double(i + 1);
        a(i, 0) = 1;
        a(i, 1) = t;
        a(i, 2) = t * t;
    }
    const Vec y = matvec(a, x);
    const LeastSquaresResult r = least_squares(a, y);
    for (std::size_t i = 0; i < 3; ++i) REQUIRE(r.coefficients[i] == Approx(x[i]).margin(1e-12));
    REQUIRE(r.condition > 1.0);
    REQUIRE_THROWS_AS(least_squares(Mat(2, 3), Vec(2)), DomainError);
}
