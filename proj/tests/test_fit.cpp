#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "ckl/catalog.hpp"
#include "ckl/fields.hpp"
#include "ckl/fit.hpp"

using namespace ckl;
using Catch::Approx;

namespace {

EpsLadder synthetic(const std::vector<double>& a, int count, double top = 0.1, double ratio = 0.5, double tail = 0.0) {
    EpsLadder l;
    double e = top;
    for (int i = 0; i < count; ++i, e *= ratio) {
        double v = 0.0, p = 1.0;
        for (double c : a) {
            v += c * p;
            p *= e;
        }
        l.samples.push_back({e, v, tail});
    }
    return l;
}

}  // namespace

TEST_CASE("least squares recovers exact polynomials", "[fit]") {
    const std::vector<double> a{1.0, -0.5, 0.3};
    const FitReport r = fit_polynomial(synthetic(a, 8), 2);
    REQUIRE(r.coefficients.size() == 3);
    for (std::size_t q = 0; q < 3; ++q) CHECK(r.coefficients[q] == Approx(a[q]).margin(1e-12));
    CHECK(r.max_residual <= 1e-12);
    CHECK(r.method == FitMethod::least_squares);
    for (double s : r.covariance_diag) CHECK(s <= 1e-9);
    CHECK(r.condition >= 1.0);

    // a higher-order term the model cannot see shows up in the sensitivity
    const FitReport r2 = fit_polynomial(synthetic({1.0, -0.5, 0.3, 40.0}, 8), 2);
    CHECK(r2.covariance_diag[1] >= std::abs(r2.coefficients[1] + 0.5) * 0.5);
}

TEST_CASE("tail bounds widen the sensitivity", "[fit]") {
    const FitReport clean = fit_polynomial(synthetic({1.0, 2.0}, 6), 1);
    const FitReport tailed = fit_polynomial(synthetic({1.0, 2.0}, 6, 0.1, 0.5, 1e-6), 1);
    CHECK(tailed.coefficients[1] == Approx(clean.coefficients[1]));
    CHECK(tailed.covariance_diag[0] >= 1e-6);
    CHECK(tailed.covariance_diag[1] > clean.covariance_diag[1] + 1e-6);
}

TEST_CASE("least squares is linear in the data", "[fit][property]") {
    std::mt19937_64 gen(4);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 50; ++trial) {
        EpsLadder u = synthetic({1.0}, 7), v = synthetic({1.0}, 7), w = synthetic({1.0}, 7);
        const double al = nd(gen), be = nd(gen);
        for (std::size_t i = 0; i < u.samples.size(); ++i) {
            u.samples[i].value = nd(gen);
            v.samples[i].value = nd(gen);
            w.samples[i].value = al * u.samples[i].value + be * v.samples[i].value;
        }
        const auto fu = fit_polynomial(u, 2), fv = fit_polynomial(v, 2), fw = fit_polynomial(w, 2);
        for (std::size_t q = 0; q < 3; ++q) {
            const double expect = al * fu.coefficients[q] + be * fv.coefficients[q];
            const double scale = std::abs(al * fu.coefficients[q]) + std::abs(be * fv.coefficients[q]) + 1;
            REQUIRE(std::abs(fw.coefficients[q] - expect) <= 1e-9 * scale);
        }
    }
}

TEST_CASE("Richardson sequence", "[fit]") {
    const FitReport r = richardson_sequence(synthetic({2.0, 3.0}, 6), 1);
    CHECK(r.coefficients[0] == Approx(2.0).margin(1e-12));
    CHECK(r.coefficients[1] == Approx(3.0).margin(1e-9));
    CHECK(r.method == FitMethod::richardson);
    CHECK(std::string(to_string(r.method)) == "richardson");

    const FitReport q = richardson_sequence(synthetic({1.0, -0.75, 0.4}, 10, 0.01), 1);
    CHECK(q.coefficients[0] == Approx(1.0).margin(1e-7));
    CHECK(q.coefficients[1] == Approx(-0.75).margin(1e-3));

    EpsLadder bent = synthetic({1.0, 1.0}, 6);
    bent.samples[3].eps *= 1.01;
    CHECK_THROWS_AS(richardson_sequence(bent, 1), DomainError);
    CHECK_THROWS_AS(richardson_sequence(synthetic({1.0}, 3), 1), DomainError);
}

TEST_CASE("fit validation", "[fit]") {
    CHECK_THROWS_AS(fit_polynomial(synthetic({1.0}, 3), 2), DomainError);
    CHECK_THROWS_AS(fit_polynomial(synthetic({1.0}, 5), -1), DomainError);
    // tightly clustered eps with many coefficients: ill-conditioned design
    CHECK_THROWS_AS(fit_polynomial(synthetic({1.0}, 14, 1e-3, 0.99), 8), NumericalError);
}

TEST_CASE("closed-form comparison", "[fit]") {
    const auto s2 = make_sphere(2);
    const ChartPoint x{0, Vec{std::acos(0.6), 0.3}};
    FitReport r;
    r.coefficients = {1.0, 5e-4};
    CHECK(compare_closed_form(s2, constant_field(1.0), x, r).pass());
    CHECK(compare_closed_form(s2, constant_field(1.0), x, r).a1_absolute);
    r.coefficients = {1.0, 2e-3};
    CHECK_FALSE(compare_closed_form(s2, constant_field(1.0), x, r).pass());

    const auto z = ambient_field(2);
    r.coefficients = {0.6, -1.2 * 1.019};
    const auto c = compare_closed_form(s2, z, x, r);
    CHECK(c.a1_closed == Approx(-1.2).margin(1e-8));
    CHECK(c.pass());
    r.coefficients = {0.6, -1.2 * 1.021};
    CHECK_FALSE(compare_closed_form(s2, z, x, r).pass());
    r.coefficients = {0.6 + 2e-6, -1.2};
    CHECK_FALSE(compare_closed_form(s2, z, x, r).pass_a0);
    r.coefficients = {0.6};
    CHECK_THROWS_AS(compare_closed_form(s2, z, x, r), DomainError);
}

TEST_CASE("end to end on the sphere", "[fit]") {
    const auto s2 = make_sphere(2);
    const ChartPoint x{0, Vec{std::acos(0.6), 0.3}};
    const auto z = ambient_field(2);
    const EpsLadder l = eps_sweep(s2, z, x, default_eps_ladder(s2, x));
    const FitReport r = fit_polynomial(l, 2);
    const auto c = compare_closed_form(s2, z, x, r);
    CHECK(c.pass());
    CHECK(c.a1_rel_err <= 1e-4);
}
