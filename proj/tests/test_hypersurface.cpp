#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "ckl/catalog.hpp"
#include "ckl/fields.hpp"
#include "ckl/hypersurface.hpp"

using namespace ckl;
using Catch::Approx;

namespace {

const std::vector<std::string> kHypersurfaces{"sphere2", "sphere3", "torus", "spheroid", "plane", "quadric411"};

// uniform point in a shrunken copy of a chart domain
ChartPoint random_point(const EmbeddedManifold& m, std::size_t chart, std::mt19937_64& gen) {
    const Box& dom = m.chart(chart).domain;
    Vec s(m.dim());
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double pad = dom.periodic[i] ? 0.0 : 0.02 * (dom.hi[i] - dom.lo[i]);
        std::uniform_real_distribution<double> u(dom.lo[i] + pad, dom.hi[i] - pad);
        s[i] = u(gen);
    }
    return {chart, s};
}

// a helix in R^3: codimension two
EmbeddedManifold helix() {
    auto f = [](const auto& s, const auto& zero) {
        using std::cos;
        using std::sin;
        using T = std::decay_t<decltype(zero)>;
        return std::vector<T>{cos(s[0]), sin(s[0]), s[0] * 0.5};
    };
    return EmbeddedManifold(1, 3, {detail::make_chart(detail::box(1, -1.0, 1.0), f)}, 0.5, "helix");
}

}  // namespace

TEST_CASE("shape operator examples", "[hypersurface]") {
    const auto s2 = make_sphere(2);
    for (const ChartPoint& p : {ChartPoint{0, Vec{1.0, 0.3}}, ChartPoint{1, Vec{0.1, -0.2}}, ChartPoint{2, Vec{0.0, 0.3}}}) {
        const ShapeData sd = shape_at(s2, p);
        const Vec x = s2.embed(p);
        // outward normal gives kappa = -1
        const double orient = dot(sd.normal, x) > 0 ? 1.0 : -1.0;
        CHECK(std::abs(dot(sd.normal, x)) == Approx(1.0));
        for (double k : sd.principal_curvatures) CHECK(orient * k == Approx(-1.0).margin(1e-7));
    }
    const auto q = make_quadric411();
    const ShapeData sq = shape_at(q, ChartPoint{0, Vec{0.0, 0.0, 0.0}});
    const double sign = sq.principal_curvatures[0] > 0 ? 1.0 : -1.0;
    Vec kq = sq.principal_curvatures;
    for (double& k : kq) k *= sign;
    std::sort(kq.begin(), kq.end(), std::greater<>());
    CHECK(kq[0] == Approx(4.0).margin(1e-8));
    CHECK(kq[1] == Approx(1.0).margin(1e-8));
    CHECK(kq[2] == Approx(1.0).margin(1e-8));

    const ShapeData sp = shape_at(make_catalog("plane"), ChartPoint{0, Vec{0.3, -0.5}});
    for (double k : sp.principal_curvatures) CHECK(std::abs(k) <= 1e-9);

    const ShapeData st = shape_at(make_catalog("torus"), ChartPoint{0, Vec{0.0, 0.0}});
    const double k0 = std::abs(st.principal_curvatures[0]), k1 = std::abs(st.principal_curvatures[1]);
    CHECK(std::max(k0, k1) == Approx(1.0).margin(1e-7));
    CHECK(std::min(k0, k1) == Approx(1.0 / 3).margin(1e-7));

    CHECK_THROWS_AS(shape_at(helix(), ChartPoint{0, Vec{0.3}}), DomainError);
}

TEST_CASE("mean curvature and residual examples", "[hypersurface]") {
    const ShapeData k411 = ShapeData::from_curvatures({1, 4, 1});
    CHECK(k411.principal_curvatures == Vec{4, 1, 1});
    CHECK(mean_curvatures(k411, 1) == Approx(2.0));
    CHECK(mean_curvatures(k411, 2) == Approx(3.0));
    CHECK(mean_curvatures(k411, 3) == Approx(4.0));
    CHECK(equicurvature_residual(k411) == 0.0);
    CHECK_THROWS_AS(mean_curvatures(k411, 0), DomainError);
    CHECK_THROWS_AS(mean_curvatures(k411, 4), DomainError);

    for (int i = 1; i <= 4; ++i)
        CHECK(mean_curvatures(ShapeData::from_curvatures({-0.7, -0.7, -0.7, -0.7}), i) == Approx(std::pow(-0.7, i)));

    const ShapeData torus_eq = ShapeData::from_curvatures({1.0, 1.0 / 3});
    CHECK(mean_curvatures(torus_eq, 1) == Approx(2.0 / 3));
    CHECK(equicurvature_residual(torus_eq) == Approx(4.0 / 9));

    CHECK(equicurvature_residual(ShapeData::from_curvatures({-1, -1})) == 0.0);
    CHECK(equicurvature_residual(ShapeData::from_curvatures({1, 1, 1})) == Approx(-3.0));
    CHECK(umbilic_spread(ShapeData::from_curvatures({0.5, 2, -1})) == Approx(3.0));
}

TEST_CASE("classification", "[hypersurface]") {
    const Thresholds th;
    const ChartPoint p{0, Vec{0.0, 0.0}};
    CHECK(classify(p, {}, ShapeData::from_curvatures({0, 0}), th).classification == PointClass::flat);
    const auto u = classify(p, {}, ShapeData::from_curvatures({-1, -1}), th);
    CHECK(u.classification == PointClass::umbilic);
    CHECK(u.equicurved);
    CHECK(u.umbilic);
    CHECK_FALSE(u.flat);
    const auto e = classify(ChartPoint{0, Vec{0, 0, 0}}, {}, ShapeData::from_curvatures({4, 1, 1}), th);
    CHECK(e.classification == PointClass::equicurved);
    CHECK_FALSE(e.umbilic);
    const auto g = classify(p, {}, ShapeData::from_curvatures({1, 1.0 / 3}), th);
    CHECK(g.classification == PointClass::generic);
    CHECK(std::string(to_string(PointClass::equicurved)) == "equicurved");
    // d = 3 umbilic but not equicurved
    const auto s3 = classify(ChartPoint{0, Vec{0, 0, 0}}, {}, ShapeData::from_curvatures({1, 1, 1}), th);
    CHECK(s3.umbilic);
    CHECK_FALSE(s3.equicurved);
}

TEST_CASE("shape data invariants at random points", "[hypersurface][property]") {
    std::mt19937_64 gen(99);
    for (const std::string& id : kHypersurfaces) {
        const auto m = make_catalog(id);
        INFO(id);
        int checked = 0;
        for (int trial = 0; trial < 1000; ++trial) {
            const ChartPoint p = random_point(m, trial % m.charts().size(), gen);
            ShapeData sd;
            CurvatureReport cr;
            Mat jac;
            try {
                sd = shape_at(m, p);
                cr = curvature_at(m, p);
                jac = m.jacobian(p.chart, p.coords).second;
            } catch (const NumericalError&) {
                continue;  // degenerate chart point
            }
            ++checked;
            const std::size_t d = m.dim();
            REQUIRE(norm(sd.normal) == Approx(1.0).epsilon(1e-12));
            for (std::size_t i = 0; i < d; ++i) REQUIRE(std::abs(dot(sd.normal, jac.col(i))) <= 1e-8 * norm(jac.col(i)));
            for (std::size_t i = 1; i < d; ++i) REQUIRE(sd.principal_curvatures[i - 1] >= sd.principal_curvatures[i]);

            double e1 = 0.0, e2 = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                e1 += sd.principal_curvatures[i];
                for (std::size_t j = i + 1; j < d; ++j) e2 += sd.principal_curvatures[i] * sd.principal_curvatures[j];
            }
            REQUIRE(std::abs(sd.e1 - e1) <= 1e-10 * (1 + std::abs(e1)));
            REQUIRE(std::abs(sd.e2 - e2) <= 1e-10 * (1 + std::abs(e2)));
            // Gauss equation against the intrinsic scalar curvature
            REQUIRE(std::abs(2 * sd.e2 - cr.scalar_curvature) <= 1e-7 * std::max(1.0, std::abs(cr.scalar_curvature)));

            // principal directions: unit, mutually orthogonal, and eigenvectors of (b, g)
            const Mat g = sd.metric;
            double bnorm = 0.0;
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j < d; ++j) bnorm += sd.b(i, j) * sd.b(i, j);
            bnorm = std::sqrt(bnorm);
            for (std::size_t i = 0; i < d; ++i) {
                const Vec& u = sd.principal_directions[i];
                REQUIRE(norm(u) == Approx(1.0).epsilon(1e-9));
                for (std::size_t j = i + 1; j < d; ++j) REQUIRE(std::abs(dot(u, sd.principal_directions[j])) <= 1e-8);
                // chart components w with J w = u: solve g w = J^T u
                Vec rhs(d, 0.0);
                for (std::size_t k = 0; k < d; ++k) rhs[k] = dot(jac.col(k), u);
                const Vec w = matvec(inverse_spd(g), rhs);
                const Vec bw = matvec(sd.b, w), gw = matvec(g, w);
                double res = 0.0;
                for (std::size_t k = 0; k < d; ++k) res += std::pow(bw[k] - sd.principal_curvatures[i] * gw[k], 2);
                REQUIRE(std::sqrt(res) <= 1e-10 * std::max(bnorm, 1e-300) + 1e-14);
            }

            // nu-flip: kappa -> -kappa leaves residual, spread, H^2, R and class alone
            Vec neg = sd.principal_curvatures;
            for (double& k : neg) k = -k;
            const ShapeData fl = ShapeData::from_curvatures(neg);
            REQUIRE(equicurvature_residual(fl) == Approx(equicurvature_residual(sd)).margin(1e-12));
            REQUIRE(umbilic_spread(fl) == Approx(umbilic_spread(sd)).margin(1e-12));
            REQUIRE(fl.e1 * fl.e1 == Approx(sd.e1 * sd.e1).margin(1e-12));
            REQUIRE(fl.e2 == Approx(sd.e2).margin(1e-12));
            const Thresholds th;
            REQUIRE(classify(p, {}, fl, th).classification == classify(p, {}, sd, th).classification);

            if (d == 2) {
                const double diff = sd.principal_curvatures[0] - sd.principal_curvatures[1];
                REQUIRE(equicurvature_residual(sd) == Approx(diff * diff).margin(1e-10));
                REQUIRE(equicurvature_residual(sd) >= -1e-12);
            }
        }
        CHECK(checked >= 900);
    }
}

TEST_CASE("grid parsing", "[hypersurface]") {
    CHECK(parse_grid("200x100", 2) == std::vector<std::size_t>{200, 100});
    CHECK(parse_grid("50x50x50", 3) == std::vector<std::size_t>{50, 50, 50});
    CHECK_THROWS_AS(parse_grid("200x100", 3), DomainError);
    CHECK_THROWS_AS(parse_grid("200xab", 2), DomainError);
    CHECK_THROWS_AS(parse_grid("1x5", 2), DomainError);
    CHECK_THROWS_AS(parse_grid("", 2), DomainError);
    try {
        parse_grid("20y", 1);
        FAIL("expected an error");
    } catch (const DomainError& e) {
        CHECK(std::string(e.what()).find("'grid'") != std::string::npos);
    }
}

TEST_CASE("equicurved scans", "[hypersurface]") {
    const Thresholds th;
    SECTION("sphere") {
        const ScanResult r = scan_equicurved(make_sphere(2), {40, 20}, th);
        REQUIRE_FALSE(r.results.empty());
        for (const auto& e : r.results) {
            REQUIRE(std::abs(e.residual) < 1e-10);
            REQUIRE(e.equicurved);
        }
    }
    SECTION("quadric") {
        const ScanResult r = scan_equicurved(make_quadric411(), {10, 10, 10}, th);
        bool found = false;
        for (const auto& z : r.zero_set) {
            if (norm(z.ambient) > 1e-8) continue;
            found = true;
            Vec k = z.kappa;
            for (double& v : k) v = std::abs(v);
            std::sort(k.begin(), k.end(), std::greater<>());
            CHECK(k[0] == Approx(4.0).margin(1e-8));
            CHECK(k[1] == Approx(1.0).margin(1e-8));
            CHECK(k[2] == Approx(1.0).margin(1e-8));
        }
        CHECK(found);
    }
    SECTION("spheroid") {
        const ScanResult r = scan_equicurved(make_spheroid(1.0, 1.6), {200, 100}, th);
        REQUIRE(r.zero_set.size() == 2);
        std::vector<double> zs;
        for (const auto& z : r.zero_set) {
            CHECK(std::hypot(z.ambient[0], z.ambient[1]) <= 1e-6);
            zs.push_back(z.ambient[2]);
        }
        std::sort(zs.begin(), zs.end());
        CHECK(zs[0] == Approx(-1.6).margin(1e-6));
        CHECK(zs[1] == Approx(1.6).margin(1e-6));
    }
    SECTION("torus") {
        const ScanResult r = scan_equicurved(make_catalog("torus"), {40, 20}, th);
        CHECK(r.zero_set.empty());
        double lo = 1e300;
        for (const auto& e : r.results) lo = std::min(lo, e.residual);
        CHECK(lo > 0.05);
    }
    SECTION("zero set is a subset of the results") {
        const ScanResult r = scan_equicurved(make_spheroid(1.0, 1.6), {16, 8}, th);
        for (const auto& z : r.zero_set) {
            bool present = false;
            for (const auto& e : r.results)
                present = present || (e.point.chart == z.point.chart && e.point.coords == z.point.coords);
            CHECK(present);
            CHECK(std::abs(z.residual) < th.tol_eq(ShapeData::from_curvatures(z.kappa)));
        }
    }
    CHECK_THROWS_AS(scan_equicurved(make_sphere(2), {4, 4, 4}, th), DomainError);
    CHECK_THROWS_AS(scan_equicurved(helix(), {4}, th), DomainError);
}

TEST_CASE("propositions", "[hypersurface]") {
    const PropositionReport plane = check_propositions(shape_at(make_catalog("plane"), ChartPoint{0, Vec{0.2, 0.1}}));
    CHECK(plane.pass());
    CHECK(plane.implications[0] == Implication::holds);
    CHECK(plane.implications[1] == Implication::holds);

    const PropositionReport quad = check_propositions(shape_at(make_quadric411(), ChartPoint{0, Vec{0.0, 0.0, 0.0}}));
    CHECK(quad.pass());
    CHECK(quad.exercised() == 0);
    CHECK(std::string(to_string(quad.implications[0])) == "not applicable");

    const PropositionReport zero3 = check_propositions(ShapeData::from_curvatures({0, 0, 0}));
    CHECK(zero3.exercised() == 3);
    CHECK(zero3.pass());

    // minimal and equicurved: forced to vanish
    const PropositionReport minimal = check_propositions(ShapeData::from_curvatures({1e-9, -1e-9, 0}));
    CHECK(minimal.implications[0] == Implication::holds);
    // scalar-flat and equicurved
    const PropositionReport sflat = check_propositions(ShapeData::from_curvatures({2e-8, 0, 0}));
    CHECK(sflat.implications[1] == Implication::holds);
    CHECK(sflat.pass());

    // umbilic in d = 3 with c != 0 is never equicurved
    const PropositionReport umb = check_propositions(ShapeData::from_curvatures({0.5, 0.5, 0.5}));
    CHECK(umb.implications[2] == Implication::not_applicable);
    CHECK(umb.pass());

    // a synthetic violation is reported as such
    ShapeData bad = ShapeData::from_curvatures({1, -1});
    bad.e1 = 0.0;
    bad.e2 = 0.0;
    const PropositionReport v = check_propositions(bad);
    CHECK(v.implications[0] == Implication::violated);
    CHECK_FALSE(v.pass());
}

TEST_CASE("limit criterion", "[hypersurface]") {
    const auto s2 = make_sphere(2);
    const ChartPoint x{0, Vec{std::acos(0.6), 0.3}};
    {
        const auto f = constant_field(1.0);
        const auto r = limit_criterion_check(s2, f, x, eps_sweep(s2, f, x, default_eps_ladder(s2, x)));
        CHECK(r.pass);
        CHECK(r.absolute);
        CHECK(std::abs(r.limit) <= 1e-3);
    }
    {
        const auto f = ambient_field(2);
        const auto r = limit_criterion_check(s2, f, x, eps_sweep(s2, f, x, default_eps_ladder(s2, x)));
        CHECK(r.pass);
        CHECK(r.laplacian == Approx(1.2).epsilon(1e-6));
        CHECK(r.limit == Approx(1.2).epsilon(0.02));
    }
    {
        const auto t = make_catalog("torus");
        const ChartPoint xt{0, Vec{0.0, 0.0}};
        const auto f = constant_field(1.0);
        const auto r = limit_criterion_check(t, f, xt, eps_sweep(t, f, xt, default_eps_ladder(t, xt)));
        CHECK_FALSE(r.pass);
        CHECK(r.gap >= 0.05);
        CHECK(r.limit == Approx(-1.0 / 9).epsilon(0.02));
    }
    EpsLadder short_ladder;
    short_ladder.samples = {{0.1, 1.0, 0.0}, {0.05, 1.0, 0.0}, {0.025, 1.0, 0.0}};
    CHECK_THROWS_AS(limit_criterion_check(s2, constant_field(1.0), x, short_ladder), DomainError);
}
