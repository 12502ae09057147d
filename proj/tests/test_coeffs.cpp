#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "ckl/catalog.hpp"
#include "ckl/coeffs.hpp"
#include "ckl/fields.hpp"

using namespace ckl;
using Catch::Approx;

namespace {

using Series = std::vector<double>;  // coefficients of s^0 .. s^N

Series series_mul(const Series& a, const Series& b) {
    Series c(a.size(), 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; i + j < a.size(); ++j) c[i + j] += a[i] * b[j];
    return c;
}

double fact(int n) { return std::tgamma(n + 1.0); }

// a_Q straight from the radial series: expand exp(-q(s) / 4 eps) term by term,
// multiply by f(s) rho(s), and integrate each power of s against the Gaussian.
// f_series, rho_series and q_series are radial functions of s.
double unreorganized_a(int d, int Q, const Series& f_series, const Series& rho_series, const Series& q_series) {
    const Series a = series_mul(f_series, rho_series);
    double total = 0.0;
    Series qk(a.size(), 0.0);
    qk[0] = 1.0;
    for (int k = 0; k <= Q; ++k) {
        const Series term = series_mul(a, qk);
        const int n = 2 * (Q + k);
        if (n < int(term.size()))
            total += term[std::size_t(n)] * std::pow(-0.25, k) / fact(k) * std::pow(4.0, Q + k) *
                     pochhammer(0.5 * d, Q + k);
        qk = series_mul(qk, q_series);
    }
    return total;
}

// radial series for the unit S^d: chord^2 - s^2 and the density (sin s / s)^{d-1}
Series sphere_q(int N) {
    Series q(std::size_t(N + 1), 0.0);
    // 2 - 2 cos s - s^2
    for (int j = 2; 2 * j <= N; ++j) q[std::size_t(2 * j)] = -2.0 * ((j % 2) ? -1.0 : 1.0) / fact(2 * j);
    return q;
}
Series sphere_rho(int d, int N) {
    Series sinc(std::size_t(N + 1), 0.0), r(std::size_t(N + 1), 0.0);
    for (int j = 0; 2 * j <= N; ++j) sinc[std::size_t(2 * j)] = ((j % 2) ? -1.0 : 1.0) / fact(2 * j + 1);
    r[0] = 1.0;
    for (int i = 0; i < d - 1; ++i) r = series_mul(r, sinc);
    return r;
}
Series cos_series(int N) {
    Series c(std::size_t(N + 1), 0.0);
    for (int j = 0; 2 * j <= N; ++j) c[std::size_t(2 * j)] = ((j % 2) ? -1.0 : 1.0) / fact(2 * j);
    return c;
}

// f~_k(v) for f = z restricted to geodesics from a point at height z0:
// f(exp(s v)) = z0 cos s + sqrt(1 - z0^2) (v . e_1) sin s
std::vector<HomogeneousPoly> height_terms(std::size_t d, double z0, int L) {
    const double w = std::sqrt(1 - z0 * z0);
    std::vector<HomogeneousPoly> out;
    for (int k = 0; k <= L; ++k) {
        if (k % 2 == 0) {
            out.push_back(HomogeneousPoly::radial(d, k / 2, z0 * (((k / 2) % 2) ? -1.0 : 1.0)));
        } else {
            HomogeneousPoly t = poly_mul(HomogeneousPoly::variable(d, 0), HomogeneousPoly::radial(d, (k - 1) / 2));
            out.push_back(poly_scale(t, w * ((((k - 1) / 2) % 2) ? -1.0 : 1.0)));
        }
    }
    return out;
}

HomogeneousPoly random_poly(std::size_t d, int deg, std::mt19937_64& gen) {
    std::normal_distribution<double> nd;
    std::uniform_int_distribution<std::size_t> pick(0, d - 1);
    HomogeneousPoly p(d, deg);
    for (int t = 0; t < 4; ++t) {
        MultiIndex e(d, 0);
        for (int j = 0; j < deg; ++j) ++e[pick(gen)];
        p.add_term(e, nd(gen));
    }
    if (deg == 0) return HomogeneousPoly::constant(d, nd(gen));
    return p;
}

}  // namespace

TEST_CASE("alpha terms examples", "[coeffs]") {
    TaylorData td = flat_taylor(2, {HomogeneousPoly::constant(2, 3.0), HomogeneousPoly::variable(2, 1)}, 4);
    td.rho_terms[2] = HomogeneousPoly::radial(2, 1, -1.0 / 3.0);
    const auto a = alpha_terms(td, 2);
    CHECK(a[0].coeff({0, 0}) == 3.0);
    CHECK(a[1].coeff({0, 1}) == 1.0);
    CHECK(a[2].coeff({2, 0}) == Approx(-1.0));
    CHECK(a[2].coeff({0, 2}) == Approx(-1.0));
}

TEST_CASE("beta terms examples", "[coeffs]") {
    std::mt19937_64 gen(5);
    TaylorData td = flat_taylor(3, {HomogeneousPoly::constant(3, 1.0)}, 8);
    td.q_terms[0] = random_poly(3, 4, gen);
    td.q_terms[1] = random_poly(3, 5, gen);
    td.q_terms[2] = random_poly(3, 6, gen);
    const auto beta = beta_terms(td, 2);
    const Vec v{0.3, -0.7, 0.5};
    CHECK(beta.at(4).at(1).evaluate(v) == Approx(td.q_terms[0].evaluate(v)));
    CHECK(beta.at(5).at(1).evaluate(v) == Approx(td.q_terms[1].evaluate(v)));
    CHECK(beta.at(8).at(2).evaluate(v) == Approx(35 * std::pow(td.q_terms[0].evaluate(v), 2)));
    CHECK_FALSE(beta.contains(7));
    CHECK(beta.at(8).size() == 1);

    TaylorData short_td = flat_taylor(3, {HomogeneousPoly::constant(3, 1.0)}, 5);
    try {
        beta_terms(short_td, 3);
        FAIL("expected an error");
    } catch (const DomainError& e) {
        CHECK(std::string(e.what()).find("degree 6") != std::string::npos);
    }
}

TEST_CASE("eta and w examples", "[coeffs]") {
    // f = s1^2 + 2 s2^2 on the plane: f~_2 = 2 s1^2 + 4 s2^2, eta_1 = 3 = -(1/d) Delta_analyst f
    TaylorData td = flat_taylor(2, {HomogeneousPoly::constant(2, 5.0), HomogeneousPoly(2, 1), HomogeneousPoly(2, 2)}, 4);
    td.f_terms[2].add_term({2, 0}, 2.0);
    td.f_terms[2].add_term({0, 2}, 4.0);
    const EtaW ew = eta_w(td, 1);
    CHECK(ew.eta[0] == 5.0);
    CHECK(ew.eta[1] == Approx(3.0));
    CHECK(ew.flat);

    // hypersurface with principal curvatures (4, 1, 1): q_4 = -2 (sum kappa v^2)^2
    HomogeneousPoly k(3, 2);
    k.add_term({2, 0, 0}, 4.0);
    k.add_term({0, 2, 0}, 1.0);
    k.add_term({0, 0, 2}, 1.0);
    TaylorData hs = flat_taylor(3, {HomogeneousPoly::constant(3, 2.0), HomogeneousPoly(3, 1), HomogeneousPoly(3, 2)}, 4);
    hs.q_terms[0] = poly_scale(poly_mul(k, k), -2.0);
    const EtaW ew2 = eta_w(hs, 1);
    CHECK_FALSE(ew2.flat);
    CHECK(ew2.w_at(2, 4, 1) == Approx(-2 * 2.0 * 4.8));
    CHECK_THROWS_AS(ew2.w_at(3, 4, 1), DomainError);

    CHECK_THROWS_AS(eta_w(td, 2), DomainError);
    CHECK_THROWS_AS(eta_w(td, -1), DomainError);
}

TEST_CASE("assemble_a first coefficient formula", "[coeffs]") {
    EtaW ew;
    ew.eta = {1.5, -0.4};
    ew.w[{2, 4, 1}] = 0.8;
    for (int d : {1, 2, 3, 5}) {
        const auto a = assemble_a(ew, d, 1);
        CHECK(a.values[0] == 1.5);
        CHECK(a.values[1] == Approx(d * -0.4 - d * (d + 2) / 24.0 * 0.8));
    }
    CHECK_THROWS_AS(assemble_a(ew, 2, 2), DomainError);
}

TEST_CASE("round sphere Taylor data", "[coeffs]") {
    const TaylorData td = round_sphere_taylor(2, {HomogeneousPoly::constant(2, 1.0)}, 8);
    const Vec v{0.6, 0.8};
    // 4 sin^2(s/2) = s^2 - 2 s^4/4! + 2 s^6/6! - ...
    CHECK(td.q_terms[0].evaluate(v) == Approx(-2.0));
    CHECK(td.q_terms[1].is_zero());
    CHECK(td.q_terms[2].evaluate(v) == Approx(2.0));
    // sin s / s = 1 - s^2/3! + s^4/5!
    CHECK(td.rho_terms[2].evaluate(v) / 2 == Approx(-1.0 / 6));
    CHECK(td.rho_terms[4].evaluate(v) / 24 == Approx(1.0 / 120));
    CHECK_THROWS_AS(round_sphere_taylor(2, {}, 3), DomainError);
}

TEST_CASE("engine on round spheres", "[coeffs]") {
    // S^3, f = 1, degree 8
    const auto a3 = expansion_from_taylor(
        round_sphere_taylor(3, {HomogeneousPoly::constant(3, 1.0), HomogeneousPoly(3, 1), HomogeneousPoly(3, 2),
                                HomogeneousPoly(3, 3), HomogeneousPoly(3, 4)},
                            8),
        2);
    CHECK(std::abs(a3.values[0] - 1.0) <= 1e-9);
    CHECK(std::abs(a3.values[1] + 0.75) <= 1e-9);

    // S^2, f = 1: K f = 1 - exp(-1/eps) exactly, so every a_q with q >= 1 vanishes
    std::vector<HomogeneousPoly> one{HomogeneousPoly::constant(2, 1.0)};
    for (int j = 1; j <= 6; ++j) one.emplace_back(2, j);
    const auto a2 = expansion_from_taylor(round_sphere_taylor(2, one, 8), 3);
    CHECK(a2.values[0] == Approx(1.0));
    for (int q = 1; q <= 3; ++q) CHECK(std::abs(a2.values[std::size_t(q)]) <= 1e-12);
}

TEST_CASE("engine matches the unreorganized radial series", "[coeffs][property]") {
    for (int d = 1; d <= 4; ++d)
        for (int Q = 0; Q <= 3; ++Q) {
            const int N = 4 * Q + 2;
            // f = 1 and f = cos s (the height function seen from the north pole)
            for (int which = 0; which < 2; ++which) {
                std::vector<HomogeneousPoly> f;
                Series fs(std::size_t(N + 1), 0.0);
                if (which == 0) {
                    fs[0] = 1.0;
                    f.push_back(HomogeneousPoly::constant(std::size_t(d), 1.0));
                    for (int j = 1; j <= 2 * Q; ++j) f.emplace_back(std::size_t(d), j);
                } else {
                    fs = cos_series(N);
                    f = height_terms(std::size_t(d), 1.0, 2 * Q);
                }
                const auto ours = expansion_from_taylor(round_sphere_taylor(std::size_t(d), f, 2 * Q + 4), Q);
                const double oracle = unreorganized_a(d, Q, fs, sphere_rho(d, N), sphere_q(N));
                REQUIRE(ours.values[std::size_t(Q)] == Approx(oracle).epsilon(1e-10).margin(1e-11));
            }
        }
}

TEST_CASE("engine a_1 agrees with the closed form", "[coeffs][property]") {
    // analytic: a_1 = -d z0 + z0 (2d - d^2) / 4 for f = z on the unit S^d
    for (int d = 2; d <= 4; ++d)
        for (double z0 : {-0.9, -0.2, 0.0, 0.35, 0.6, 1.0}) {
            const auto a = expansion_from_taylor(round_sphere_taylor(std::size_t(d), height_terms(std::size_t(d), z0, 2), 6), 1);
            REQUIRE(a.values[0] == Approx(z0).margin(1e-15));
            REQUIRE(a.values[1] == Approx(-d * z0 + z0 * (2.0 * d - d * d) / 4).margin(1e-12));
        }
    // numerical closed form on the catalog sphere
    const auto s2 = make_sphere(2);
    const auto z = ambient_field(2);
    for (double theta : {0.4, std::acos(0.6), 2.0}) {
        const ChartPoint x{0, Vec{theta, 0.3}};
        const auto a = expansion_from_taylor(
            round_sphere_taylor(2, height_terms(2, std::cos(theta), 2), 6), 1);
        CHECK(std::abs(a.values[1] - a1_closed_form(s2, z, x)) <= 1e-9);
        CHECK(eta1_closed_form(s2, z, x) == Approx(-std::cos(theta) - 2 * std::cos(theta) / 6).margin(1e-9));
    }
    const ChartPoint x3{0, Vec{1.0, 1.2, 0.3}};
    CHECK(a1_closed_form(make_sphere(3), constant_field(1.0), x3) == Approx(-0.75).margin(1e-9));
}

TEST_CASE("engine is linear in f", "[coeffs][property]") {
    std::mt19937_64 gen(11);
    std::normal_distribution<double> nd;
    for (std::size_t d : {2u, 3u}) {
        for (int trial = 0; trial < 10; ++trial) {
            std::vector<HomogeneousPoly> f, g, h;
            const double al = nd(gen), be = nd(gen);
            for (int k = 0; k <= 4; ++k) {
                f.push_back(random_poly(d, k, gen));
                g.push_back(random_poly(d, k, gen));
                h.push_back(poly_add(poly_scale(f.back(), al), poly_scale(g.back(), be)));
            }
            const auto af = expansion_from_taylor(round_sphere_taylor(d, f, 8), 2);
            const auto ag = expansion_from_taylor(round_sphere_taylor(d, g, 8), 2);
            const auto ah = expansion_from_taylor(round_sphere_taylor(d, h, 8), 2);
            for (std::size_t q = 0; q <= 2; ++q) {
                const double expect = al * af.values[q] + be * ag.values[q];
                const double scale = std::abs(al * af.values[q]) + std::abs(be * ag.values[q]) + 1.0;
                REQUIRE(std::abs(ah.values[q] - expect) <= 1e-12 * scale);
            }
        }
    }
}

TEST_CASE("flat data uses the Gaussian moments only", "[coeffs]") {
    for (std::size_t d : {1u, 2u, 3u}) {
        // f = |s|^2 + |s|^4: K f = 2 d eps + 4 d (d + 2) eps^2
        std::vector<HomogeneousPoly> f{HomogeneousPoly(d, 0), HomogeneousPoly(d, 1), HomogeneousPoly::radial(d, 1, 2.0),
                                       HomogeneousPoly(d, 3), HomogeneousPoly::radial(d, 2, 24.0)};
        const EtaW ew = eta_w(flat_taylor(d, f, 6), 2);
        CHECK(ew.flat);
        const auto a = assemble_a(ew, int(d), 2);
        CHECK(a.values[0] == 0.0);
        CHECK(a.values[1] == Approx(2.0 * d));
        CHECK(a.values[2] == Approx(4.0 * d * (d + 2)));
    }
}
