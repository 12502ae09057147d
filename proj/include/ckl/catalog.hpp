#pragma once

// Built-in manifolds (plane, round spheres, spheroid, torus, polynomial graphs)
// and the key=value manifold spec format. Each embedding is a template over the
// scalar type so the same code produces values and exact jets.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ckl/error.hpp"
#include "ckl/jet.hpp"
#include "ckl/manifold.hpp"

namespace ckl {

/// One monomial c * x1^e1 * ... * xd^ed.
struct Monomial {
    double c = 0.0;
    std::vector<int> e;
};
using Polynomial = std::vector<Monomial>;

template <class T>
T eval_poly(const Polynomial& p, const std::vector<T>& x, const T& zero) {
    T acc = zero;
    for (const Monomial& m : p) {
        T term = zero + m.c;
        for (std::size_t i = 0; i < m.e.size(); ++i)
            if (m.e[i] > 0) term = term * pow(x[i], m.e[i]);
        acc = acc + term;
    }
    return acc;
}

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return std::string(s.substr(a, b - a));
}

inline double parse_double(const std::string& s, const std::string& field) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DomainError("field '" + field + "': cannot parse number '" + s + "'");
    }
}

inline int parse_int(const std::string& s, const std::string& field) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DomainError("field '" + field + "': cannot parse integer '" + s + "'");
    }
}

// Splits on '+' at parenthesis depth 0, keeping the sign of '-' separated terms.
inline std::vector<std::string> split_terms(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    int depth = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char ch = s[i];
        if (ch == '(') ++depth;
        if (ch == ')') --depth;
        const bool exponent_sign = i > 0 && (s[i - 1] == 'e' || s[i - 1] == 'E' || s[i - 1] == '^');
        if (depth == 0 && (ch == '+' || ch == '-') && !cur.empty() && !exponent_sign &&
            trim(cur) != "") {
            out.push_back(trim(cur));
            cur.clear();
            if (ch == '-') cur.push_back('-');
            continue;
        }
        cur.push_back(ch);
    }
    if (!trim(cur).empty()) out.push_back(trim(cur));
    return out;
}

}  // namespace detail

/// Parses either `0.5*x1^2+2*x1*x3` or `0.5:(2,0,0)+2:(1,0,1)` in `dim` variables.
inline Polynomial parse_polynomial(const std::string& text, std::size_t dim, const std::string& field = "poly") {
    const std::string src = detail::trim(text);
    if (src.empty()) throw DomainError("field '" + field + "': empty polynomial");
    Polynomial p;
    for (const std::string& term : detail::split_terms(src)) {
        Monomial m{1.0, std::vector<int>(dim, 0)};
        const auto colon = term.find(':');
        if (colon != std::string::npos) {
            m.c = detail::parse_double(detail::trim(term.substr(0, colon)), field);
            std::string tup = detail::trim(term.substr(colon + 1));
            if (tup.size() < 2 || tup.front() != '(' || tup.back() != ')')
                throw DomainError("field '" + field + "': exponent tuple must be parenthesized in '" + term + "'");
            std::stringstream ss(tup.substr(1, tup.size() - 2));
            std::string item;
            std::size_t i = 0;
            while (std::getline(ss, item, ',')) {
                if (i >= dim) throw DomainError("field '" + field + "': exponent tuple longer than dimension");
                m.e[i] = detail::parse_int(detail::trim(item), field);
                if (m.e[i] < 0) throw DomainError("field '" + field + "': negative exponent");
                ++i;
            }
            if (i != dim) throw DomainError("field '" + field + "': exponent tuple length must equal dimension");
        } else {
            std::stringstream ss(term);
            std::string factor;
            bool negate = false;
            while (std::getline(ss, factor, '*')) {
                factor = detail::trim(factor);
                if (factor.empty()) throw DomainError("field '" + field + "': empty factor in '" + term + "'");
                if (factor.front() == '-') {
                    negate = !negate;
                    factor = detail::trim(factor.substr(1));
                }
                if (!factor.empty() && factor.front() == 'x') {
                    const auto caret = factor.find('^');
                    const int idx = detail::parse_int(factor.substr(1, caret == std::string::npos ? std::string::npos : caret - 1), field);
                    const int ex = caret == std::string::npos ? 1 : detail::parse_int(factor.substr(caret + 1), field);
                    if (idx < 1 || std::size_t(idx) > dim)
                        throw DomainError("field '" + field + "': variable x" + std::to_string(idx) + " out of range");
                    if (ex < 0) throw DomainError("field '" + field + "': negative exponent");
                    m.e[idx - 1] += ex;
                } else {
                    m.c *= detail::parse_double(factor, field);
                }
            }
            if (negate) m.c = -m.c;
        }
        p.push_back(std::move(m));
    }
    return p;
}

namespace detail {

template <class F>
ExactJetFn make_exact(F f, std::size_t d) {
    return [f, d](std::span<const double> s) {
        std::vector<Jet2> x;
        for (std::size_t i = 0; i < d; ++i) x.push_back(Jet2::variable(s[i], d, i));
        return f(x, Jet2(0.0, d));
    };
}

template <class F>
EmbedFn make_embed(F f) {
    return [f](std::span<const double> s) {
        return f(std::vector<double>(s.begin(), s.end()), 0.0);
    };
}

template <class F>
Chart make_chart(Box box, F f) {
    const std::size_t d = box.dim();
    return Chart{std::move(box), make_embed(f), make_exact(f, d)};
}

inline Box box(std::size_t d, double lo, double hi) {
    return Box{Vec(d, lo), Vec(d, hi), std::vector<bool>(d, false)};
}

// Hyperspherical chart (psi_1..psi_{d-1}, phi) with per-axis scales for the
// first d ambient coordinates (`a`) and the last one (`c`).
inline Chart polar_chart(std::size_t d, double a, double c) {
    Box b = box(d, 0.0, std::numbers::pi);
    b.lo[d - 1] = -std::numbers::pi;
    b.hi[d - 1] = std::numbers::pi;
    b.periodic[d - 1] = true;
    auto f = [d, a, c](const auto& s, const auto& zero) {
        using std::cos;
        using std::sin;
        using T = std::decay_t<decltype(zero)>;
        std::vector<T> x(d + 1, zero);
        T prod = zero + 1.0;
        // x_d = cos psi_1, x_{d-1} = sin psi_1 cos psi_2, ...
        for (std::size_t j = 0; j + 1 < d; ++j) {
            x[d - j] = prod * cos(s[j]);
            prod = prod * sin(s[j]);
        }
        x[1] = prod * sin(s[d - 1]);
        x[0] = prod * cos(s[d - 1]);
        for (std::size_t k = 0; k < d; ++k) x[k] = x[k] * a;
        x[d] = x[d] * c;
        return x;
    };
    return make_chart(std::move(b), f);
}

// Graph chart over a cube for the cap x_d = sign * c sqrt(1 - |u|^2 / a^2).
// The south cap swaps the first two chart axes so both caps share the
// orientation of the polar chart.
inline Chart cap_chart(std::size_t d, double a, double c, bool north) {
    const double half = 0.9 * a / std::sqrt(double(d));
    auto f = [d, a, c, north](const auto& s, const auto& zero) {
        using std::sqrt;
        using T = std::decay_t<decltype(zero)>;
        std::vector<T> u(s.begin(), s.end());
        if (!north && d >= 2) std::swap(u[0], u[1]);
        T r2 = zero;
        for (std::size_t i = 0; i < d; ++i) r2 = r2 + u[i] * u[i];
        std::vector<T> x(u);
        const T h = sqrt(1.0 - r2 / (a * a)) * c;
        x.push_back(north ? h : -h);
        return x;
    };
    return make_chart(box(d, -half, half), f);
}

inline double sphere_area(std::size_t d, double r) {
    const double k = double(d + 1);
    return 2.0 * std::pow(std::numbers::pi, k / 2) / std::tgamma(k / 2) * std::pow(r, double(d));
}

}  // namespace detail

inline EmbeddedManifold make_plane(double half_width = 2.0) {
    auto f = [](const auto& s, const auto& zero) {
        using T = std::decay_t<decltype(zero)>;
        return std::vector<T>{s[0], s[1], zero};
    };
    EmbeddedManifold m(2, 3, {detail::make_chart(detail::box(2, -half_width, half_width), f)}, half_width,
                       "plane");
    m.set_compact(false);
    return m;
}

/// Round sphere S^d of radius r in R^{d+1}. Chart 0 is hyperspherical and
/// covers the sphere; charts 1 and 2 are graph caps over the poles.
inline EmbeddedManifold make_sphere(std::size_t d, double r = 1.0) {
    if (d < 1) throw DomainError("sphere: dim must be >= 1");
    if (!(r > 0)) throw DomainError("sphere: radius must be > 0");
    std::vector<Chart> charts{detail::polar_chart(d, r, r)};
    if (d >= 2) {
        charts.push_back(detail::cap_chart(d, r, r, true));
        charts.push_back(detail::cap_chart(d, r, r, false));
    }
    EmbeddedManifold m(d, d + 1, std::move(charts), std::numbers::pi * r - 0.1,
                       "sphere" + std::to_string(d));
    m.set_known_volume(detail::sphere_area(d, r));
    return m;
}

/// Spheroid of revolution with equatorial radius a and polar semi-axis c.
inline EmbeddedManifold make_spheroid(double a, double c) {
    if (!(a > 0 && c > 0)) throw DomainError("spheroid: a and c must be > 0");
    std::vector<Chart> charts{detail::polar_chart(2, a, c), detail::cap_chart(2, a, c, true),
                              detail::cap_chart(2, a, c, false)};
    EmbeddedManifold m(2, 3, std::move(charts), 0.5, "spheroid");
    double area = 4 * std::numbers::pi * a * a;
    if (c > a) {
        const double e = std::sqrt(1 - a * a / (c * c));
        area = 2 * std::numbers::pi * a * a * (1 + c / (a * e) * std::asin(e));
    } else if (c < a) {
        const double e = std::sqrt(1 - c * c / (a * a));
        area = 2 * std::numbers::pi * a * a * (1 + (1 - e * e) / e * std::atanh(e));
    }
    m.set_known_volume(area);
    return m;
}

/// Torus of revolution ((R + r cos v) cos u, (R + r cos v) sin u, r sin v).
inline EmbeddedManifold make_torus(double R, double r) {
    if (!(R > r && r > 0)) throw DomainError("torus: need R > r > 0");
    Box b{{-std::numbers::pi, -std::numbers::pi}, {std::numbers::pi, std::numbers::pi}, {true, true}};
    auto f = [R, r](const auto& s, const auto& zero) {
        using std::cos;
        using std::sin;
        using T = std::decay_t<decltype(zero)>;
        const T rho = cos(s[1]) * r + R;
        return std::vector<T>{rho * cos(s[0]), rho * sin(s[0]), sin(s[1]) * r};
    };
    EmbeddedManifold m(2, 3, {detail::make_chart(std::move(b), f)}, 0.9, "torus");
    m.set_known_volume(4 * std::numbers::pi * std::numbers::pi * R * r);
    return m;
}

/// Graph x -> (x, P(x)) over [-L, L]^d.
inline EmbeddedManifold make_graph(std::size_t d, Polynomial poly, double half_width,
                                   std::string id = "graph-polynomial", double delta = -1) {
    if (!(half_width > 0)) throw DomainError("graph: box half-width must be > 0");
    for (const Monomial& mono : poly)
        if (mono.e.size() != d) throw DomainError("graph: monomial dimension mismatch");
    auto f = [poly](const auto& s, const auto& zero) {
        using T = std::decay_t<decltype(zero)>;
        std::vector<T> x(s.begin(), s.end());
        const T z = eval_poly(poly, x, zero);
        x.push_back(z);
        return x;
    };
    if (delta <= 0) delta = half_width;  // half the box side
    EmbeddedManifold m(d, d + 1, {detail::make_chart(detail::box(d, -half_width, half_width), f)}, delta,
                       std::move(id));
    m.set_compact(false);
    return m;
}

/// z = (x1^2 + x2^2 + 4 x3^2) / 2, principal curvatures (4, 1, 1) at the origin.
inline EmbeddedManifold make_quadric411() {
    return make_graph(3, parse_polynomial("0.5*x1^2+0.5*x2^2+2*x3^2", 3), 2.0, "quadric411");
}

inline std::vector<std::string> catalog_ids() {
    return {"plane", "sphere2", "sphere3", "spheroid", "torus", "quadric411"};
}

inline EmbeddedManifold make_catalog(const std::string& id) {
    if (id == "plane") return make_plane();
    if (id == "sphere2") return make_sphere(2);
    if (id == "sphere3") return make_sphere(3);
    if (id == "spheroid") return make_spheroid(1.0, 1.6);
    if (id == "torus") return make_torus(2.0, 1.0);
    if (id == "quadric411") return make_quadric411();
    throw DomainError("unknown catalog id '" + id + "'");
}

/// key=value pairs separated by whitespace or newlines; '#' starts a comment.
inline std::map<std::string, std::string> parse_key_values(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::stringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::stringstream ss(line);
        std::string tok;
        while (ss >> tok) {
            const auto eq = tok.find('=');
            if (eq == std::string::npos || eq == 0)
                throw DomainError("manifold spec: expected key=value, got '" + tok + "'");
            const std::string key = tok.substr(0, eq);
            if (kv.count(key)) throw DomainError("manifold spec: duplicate key '" + key + "'");
            kv[key] = tok.substr(eq + 1);
        }
    }
    return kv;
}

inline EmbeddedManifold manifold_from_spec(const std::string& text) {
    const auto kv = parse_key_values(text);
    auto get = [&](const std::string& k) -> const std::string* {
        const auto it = kv.find(k);
        return it == kv.end() ? nullptr : &it->second;
    };
    auto num = [&](const std::string& k, double fallback) {
        const std::string* v = get(k);
        return v ? detail::parse_double(*v, k) : fallback;
    };
    auto required = [&](const std::string& k) {
        const std::string* v = get(k);
        if (!v) throw DomainError("manifold spec: missing field '" + k + "'");
        return *v;
    };
    const std::string type = required("type");
    const std::map<std::string, std::vector<std::string>> allowed{
        {"sphere", {"type", "radius", "dim", "delta"}},
        {"spheroid", {"type", "a", "c", "delta"}},
        {"torus", {"type", "R", "r", "delta"}},
        {"plane", {"type", "box", "delta"}},
        {"graph", {"type", "d", "poly", "box", "delta"}},
    };
    const auto at = allowed.find(type);
    if (at == allowed.end()) throw DomainError("manifold spec: field 'type' has unknown value '" + type + "'");
    for (const auto& [k, v] : kv) {
        (void)v;
        if (std::find(at->second.begin(), at->second.end(), k) == at->second.end())
            throw DomainError("manifold spec: field '" + k + "' is not valid for type " + type);
    }

    auto rebuild_delta = [&](EmbeddedManifold m) {
        if (!get("delta")) return m;
        const double delta = num("delta", 0.0);
        if (!(delta > 0)) throw DomainError("manifold spec: field 'delta' must be > 0");
        EmbeddedManifold out(m.dim(), m.ambient_dim(), m.charts(), delta, m.catalog_id(), m.cover());
        out.set_compact(m.compact());
        if (m.known_volume()) out.set_known_volume(*m.known_volume());
        return out;
    };

    if (type == "sphere") {
        const int dim = get("dim") ? detail::parse_int(*get("dim"), "dim") : 2;
        if (dim < 1) throw DomainError("manifold spec: field 'dim' must be >= 1");
        return rebuild_delta(make_sphere(std::size_t(dim), num("radius", 1.0)));
    }
    if (type == "spheroid") return rebuild_delta(make_spheroid(num("a", 1.0), num("c", 1.0)));
    if (type == "torus") return rebuild_delta(make_torus(num("R", 2.0), num("r", 1.0)));
    if (type == "plane") return rebuild_delta(make_plane(num("box", 2.0)));
    const int d = detail::parse_int(required("d"), "d");
    if (d < 1) throw DomainError("manifold spec: field 'd' must be >= 1");
    const double half = num("box", 2.0);
    const double delta = get("delta") ? num("delta", 0.0) : -1.0;
    if (get("delta") && !(delta > 0)) throw DomainError("manifold spec: field 'delta' must be > 0");
    return make_graph(std::size_t(d), parse_polynomial(required("poly"), std::size_t(d)), half,
                      "graph-polynomial", delta);
}

/// A catalog id or the path of a spec file.
inline EmbeddedManifold load_manifold(const std::string& arg) {
    for (const std::string& id : catalog_ids())
        if (arg == id) return make_catalog(id);
    std::ifstream in(arg);
    if (!in) throw DomainError("field 'manifold': '" + arg + "' is neither a catalog id nor a readable file");
    std::stringstream ss;
    ss << in.rdbuf();
    return manifold_from_spec(ss.str());
}

}  // namespace ckl
