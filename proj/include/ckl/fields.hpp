#pragma once

// Scalar test functions on a manifold, parsed from short specs:
//   const:<c>            constant (also accepted as const<c>)
//   ambient:<i>          i-th ambient coordinate, 1-based
//   poly:<monomials>     polynomial in chart coordinates, e.g. poly:2:(2,0)

#include <cstdio>
#include <string>

#include "ckl/catalog.hpp"
#include "ckl/error.hpp"
#include "ckl/manifold.hpp"

namespace ckl {

inline ScalarField constant_field(double c) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "const:%.17g", c);
    return {buf, [c](std::size_t, std::span<const double>, std::span<const double>) { return c; }};
}

inline ScalarField ambient_field(std::size_t index0) {
    return {"ambient:" + std::to_string(index0 + 1),
            [index0](std::size_t, std::span<const double>, std::span<const double> y) { return y[index0]; }};
}

inline ScalarField chart_poly_field(Polynomial p, std::string id) {
    return {std::move(id), [p](std::size_t, std::span<const double> s, std::span<const double>) {
                return eval_poly(p, std::vector<double>(s.begin(), s.end()), 0.0);
            }};
}

inline ScalarField parse_function(const std::string& spec, const EmbeddedManifold& m) {
    const std::string s = detail::trim(spec);
    auto rest_after = [&](const std::string& prefix) { return s.substr(prefix.size()); };
    if (s.rfind("const:", 0) == 0) return constant_field(detail::parse_double(rest_after("const:"), "f"));
    if (s.rfind("const", 0) == 0 && s.size() > 5) return constant_field(detail::parse_double(rest_after("const"), "f"));
    if (s.rfind("ambient:", 0) == 0) {
        const int i = detail::parse_int(rest_after("ambient:"), "f");
        if (i < 1 || std::size_t(i) > m.ambient_dim())
            throw DomainError("field 'f': ambient index " + std::to_string(i) + " out of range 1.." +
                              std::to_string(m.ambient_dim()));
        return ambient_field(std::size_t(i - 1));
    }
    if (s.rfind("poly:", 0) == 0) return chart_poly_field(parse_polynomial(rest_after("poly:"), m.dim(), "f"), s);
    throw DomainError("field 'f': unrecognized function spec '" + spec + "' (expected const:, ambient: or poly:)");
}

}  // namespace ckl
