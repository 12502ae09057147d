#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "ckl/catalog.hpp"
#include "ckl/fields.hpp"

using namespace ckl;
using Catch::Approx;

TEST_CASE("catalog ids build the advertised manifolds", "[catalog]") {
    for (const std::string& id : catalog_ids()) {
        const auto m = make_catalog(id);
        CHECK(m.catalog_id() == id);
        CHECK(m.dim() < m.ambient_dim());
        CHECK(m.delta() > 0);
    }
    CHECK(make_catalog("sphere3").dim() == 3);
    CHECK(make_catalog("quadric411").ambient_dim() == 4);
    CHECK(make_catalog("torus").delta() == Approx(0.9));
    CHECK(make_catalog("spheroid").delta() == Approx(0.5));
    CHECK(make_catalog("sphere2").delta() == Approx(std::numbers::pi - 0.1));
    CHECK_FALSE(make_catalog("plane").compact());
    CHECK_THROWS_AS(make_catalog("klein-bottle"), DomainError);
}

TEST_CASE("polynomial syntaxes agree", "[catalog]") {
    const Polynomial a = parse_polynomial("0.5*x1^2+0.5*x2^2+2*x3^2", 3);
    const Polynomial b = parse_polynomial("0.5:(2,0,0)+0.5:(0,2,0)+2:(0,0,2)", 3);
    const Polynomial c = parse_polynomial("-x1*x2 + 3e-1*x3 - 2", 3);
    for (const std::vector<double>& x : {std::vector<double>{0.3, -1.2, 0.7}, std::vector<double>{1, 2, 3}}) {
        CHECK(eval_poly(a, x, 0.0) == Approx(eval_poly(b, x, 0.0)));
        CHECK(eval_poly(c, x, 0.0) == Approx(-x[0] * x[1] + 0.3 * x[2] - 2));
    }
    CHECK_THROWS_AS(parse_polynomial("1:(2,0)", 3), DomainError);
    CHECK_THROWS_AS(parse_polynomial("x4^2", 3), DomainError);
    CHECK_THROWS_AS(parse_polynomial("2*y1", 3), DomainError);
    CHECK_THROWS_AS(parse_polynomial("", 3), DomainError);
}

TEST_CASE("manifold spec files", "[catalog]") {
    const auto sphere = manifold_from_spec("type=sphere radius=2.0\n");
    CHECK(sphere.dim() == 2);
    CHECK(*sphere.known_volume() == Approx(16 * std::numbers::pi));
    CHECK(sphere.delta() == Approx(2 * std::numbers::pi - 0.1));

    const auto torus = manifold_from_spec("# comment\ntype=torus\nR=3 r=0.5 delta=0.4");
    CHECK(torus.delta() == Approx(0.4));
    CHECK(*torus.known_volume() == Approx(4 * std::numbers::pi * std::numbers::pi * 1.5));

    const auto graph = manifold_from_spec("type=graph d=3 poly=0.5*x1^2+0.5*x2^2+2*x3^2");
    CHECK(graph.dim() == 3);
    CHECK(graph.embed(0, Vec{1.0, 0.0, 1.0})[3] == Approx(2.5));
    CHECK_FALSE(graph.compact());

    const auto spheroid = manifold_from_spec("type=spheroid a=1.0 c=1.6");
    CHECK(spheroid.embed(0, Vec{0.0, 0.0})[2] == Approx(1.6));

    CHECK_THROWS_AS(manifold_from_spec("radius=1"), DomainError);
    CHECK_THROWS_AS(manifold_from_spec("type=cube"), DomainError);
    CHECK_THROWS_AS(manifold_from_spec("type=sphere radius=1 radius=2"), DomainError);
    CHECK_THROWS_AS(manifold_from_spec("type=sphere R=2"), DomainError);
    CHECK_THROWS_AS(manifold_from_spec("type=sphere radius=abc"), DomainError);
    CHECK_THROWS_AS(manifold_from_spec("type=sphere radius=-1"), DomainError);
    CHECK_THROWS_AS(manifold_from_spec("type=torus R=1 r=2"), DomainError);
    CHECK_THROWS_AS(manifold_from_spec("type=graph d=2"), DomainError);
    CHECK_THROWS_AS(manifold_from_spec("type=sphere delta=0"), DomainError);
    CHECK_THROWS_AS(manifold_from_spec("type=sphere junk"), DomainError);

    try {
        manifold_from_spec("type=graph d=2");
        FAIL("expected an error");
    } catch (const DomainError& e) {
        CHECK(std::string(e.what()).find("'poly'") != std::string::npos);
    }
}

TEST_CASE("load_manifold accepts ids and files", "[catalog]") {
    CHECK(load_manifold("torus").catalog_id() == "torus");
    const std::string path = "ckl_test_spec.txt";
    {
        std::ofstream out(path);
        out << "type=sphere\nradius=1.0\ndim=3\n";
    }
    const auto m = load_manifold(path);
    std::remove(path.c_str());
    CHECK(m.dim() == 3);
    CHECK_THROWS_AS(load_manifold("/nonexistent/spec.txt"), DomainError);
}

TEST_CASE("function specs", "[catalog]") {
    const auto s2 = make_sphere(2);
    const Vec p{1.0, 0.4};
    CHECK(parse_function("const:1", s2)(s2, 0, p) == 1.0);
    CHECK(parse_function("const2.5", s2)(s2, 0, p) == 2.5);
    CHECK(parse_function("ambient:3", s2)(s2, 0, p) == Approx(std::cos(1.0)));
    CHECK(parse_function("ambient:1", s2)(s2, 0, p) == Approx(std::sin(1.0) * std::cos(0.4)));
    CHECK(parse_function("poly:2:(2,0)", s2)(s2, 0, p) == Approx(2.0));
    CHECK(parse_function("const:1", s2).id == "const:1");
    CHECK_THROWS_AS(parse_function("ambient:4", s2), DomainError);
    CHECK_THROWS_AS(parse_function("ambient:0", s2), DomainError);
    CHECK_THROWS_AS(parse_function("sin:1", s2), DomainError);
    CHECK_THROWS_AS(parse_function("const:x", s2), DomainError);
    CHECK_THROWS_AS(parse_function("poly:1:(1,1,1)", s2), DomainError);
}
