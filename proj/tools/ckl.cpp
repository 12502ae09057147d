// ckl: command-line front end.
//
//   ckl catalog
//   ckl curvature --manifold M --point c:s1,s2
//   ckl operator --manifold M --point P --f F [--eps list] [--order n] [--mc n] [--seed n]
//   ckl expand --manifold M [--point P] --f F [--eps-count n] [--Q n] [--method lsq|richardson]
//   ckl equicurved-scan --manifold M --grid 200x100 [--tol-eq t]
//   ckl verify
//
// --out json|csv|- picks the format on stdout; any other value is a file path
// whose extension picks the format. Exit 0 on success, 1 on invalid input,
// 2 on numerical failure; failures print one JSON object on stderr.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "ckl/catalog.hpp"
#include "ckl/coeffs.hpp"
#include "ckl/fields.hpp"
#include "ckl/fit.hpp"
#include "ckl/hypersurface.hpp"
#include "ckl/io.hpp"
#include "ckl/moments.hpp"
#include "ckl/operator.hpp"

using namespace ckl;
using nlohmann::json;

namespace {

// Input error tied to a named option.
struct FieldError : DomainError {
    std::string field;
    FieldError(std::string f, const std::string& msg) : DomainError(msg), field(std::move(f)) {}
};

// ---------------------------------------------------------------------------
// output

struct Sink {
    std::string format;  // json | csv | table
    std::string path;    // empty: stdout
};

Sink resolve_out(const std::string& out, const std::string& fallback) {
    if (out.empty() || out == "-") return {fallback, ""};
    if (out == "json" || out == "csv") return {out, ""};
    const auto dot = out.rfind('.');
    const std::string ext = dot == std::string::npos ? "" : out.substr(dot + 1);
    if (ext == "json" || ext == "csv") return {ext, out};
    throw FieldError("out", "field 'out': expected json, csv, - or a path ending in .json/.csv, got '" + out + "'");
}

void write(const Sink& sink, const std::string& text) {
    if (sink.path.empty()) {
        std::cout << text;
        std::cout.flush();
        return;
    }
    std::ofstream f(sink.path, std::ios::binary);
    if (!f) throw FieldError("out", "field 'out': cannot open '" + sink.path + "' for writing");
    f << text;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json vec_json(std::span<const double> v) { return json(std::vector<double>(v.begin(), v.end())); }

json mat_json(const Mat& m) {
    json rows = json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        json r = json::array();
        for (std::size_t j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
        rows.push_back(r);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// argument parsing

EmbeddedManifold manifold_arg(const std::string& spec) {
    if (spec.empty()) throw FieldError("manifold", "field 'manifold': required");
    try {
        return load_manifold(spec);
    } catch (const FieldError&) {
        throw;
    } catch (const DomainError& e) {
        const std::string msg = e.what();
        throw FieldError("manifold", msg.find("field '") == std::string::npos ? "field 'manifold': " + msg : msg);
    }
}

/// "c:s1,s2,..."; an empty string means the centre of chart 0.
ChartPoint point_arg(const std::string& text, const EmbeddedManifold& m) {
    ChartPoint p;
    if (text.empty()) {
        const Box& b = m.chart(0).domain;
        p.chart = 0;
        for (std::size_t i = 0; i < m.dim(); ++i) p.coords.push_back(0.5 * (b.lo[i] + b.hi[i]));
        return p;
    }
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw FieldError("point", "field 'point': expected <chart>:<s1>,<s2>,...");
    try {
        const int c = detail::parse_int(text.substr(0, colon), "point");
        if (c < 0 || std::size_t(c) >= m.charts().size())
            throw DomainError("field 'point': chart " + std::to_string(c) + " does not exist");
        p.chart = std::size_t(c);
        std::stringstream ss(text.substr(colon + 1));
        std::string item;
        while (std::getline(ss, item, ',')) p.coords.push_back(detail::parse_double(item, "point"));
        if (p.coords.size() != m.dim())
            throw DomainError("field 'point': expected " + std::to_string(m.dim()) + " coordinates, got " +
                              std::to_string(p.coords.size()));
        m.check_point(p);
    } catch (const DomainError& e) {
        const std::string msg = e.what();
        throw FieldError("point", msg.find("field '") == std::string::npos ? "field 'point': " + msg : msg);
    }
    return p;
}

ScalarField function_arg(const std::string& spec, const EmbeddedManifold& m) {
    if (spec.empty()) throw FieldError("f", "field 'f': required");
    try {
        return parse_function(spec, m);
    } catch (const DomainError& e) {
        throw FieldError("f", e.what());
    }
}

std::vector<double> eps_arg(const std::string& text) {
    std::vector<double> eps;
    std::stringstream ss(text);
    std::string item;
    try {
        while (std::getline(ss, item, ',')) {
            const double e = detail::parse_double(item, "eps");
            if (!(e > 0) || !std::isfinite(e)) throw DomainError("field 'eps': values must be positive, got " + item);
            eps.push_back(e);
        }
    } catch (const DomainError& e) {
        throw FieldError("eps", e.what());
    }
    if (eps.empty()) throw FieldError("eps", "field 'eps': empty list");
    std::sort(eps.begin(), eps.end(), std::greater<>());
    if (std::adjacent_find(eps.begin(), eps.end()) != eps.end())
        throw FieldError("eps", "field 'eps': duplicate values");
    return eps;
}

json point_json(const EmbeddedManifold& m, const ChartPoint& x) {
    return {{"chart", x.chart}, {"coords", vec_json(x.coords)}, {"ambient", vec_json(m.embed(x))}};
}

// ---------------------------------------------------------------------------
// subcommands

struct Options {
    std::string out;
    std::string manifold;
    std::string point;
    std::string f;
    std::string eps;
    int order = kDefaultOrder;
    std::size_t mc = 0;
    std::uint64_t seed = 42;
    int eps_count = 8;
    int Q = 2;
    std::string method = "lsq";
    std::string grid;
    double tol_eq = 1e-6;
};

void cmd_catalog(const Options& o) {
    const Sink sink = resolve_out(o.out, "json");
    json arr = json::array();
    std::ostringstream csv;
    csv << "id,dim,ambient_dim,charts,delta,compact,volume\n";
    for (const std::string& id : catalog_ids()) {
        const auto m = make_catalog(id);
        const auto vol = m.known_volume();
        arr.push_back({{"id", id},
                       {"dim", m.dim()},
                       {"ambient_dim", m.ambient_dim()},
                       {"charts", m.charts().size()},
                       {"delta", m.delta()},
                       {"compact", m.compact()},
                       {"volume", vol ? json(*vol) : json(nullptr)}});
        csv << id << ',' << m.dim() << ',' << m.ambient_dim() << ',' << m.charts().size() << ','
            << fmt_double(m.delta()) << ',' << (m.compact() ? 1 : 0) << ',' << (vol ? fmt_double(*vol) : "") << '\n';
    }
    write(sink, sink.format == "csv" ? csv.str() : dump(arr));
}

void cmd_curvature(const Options& o) {
    const Sink sink = resolve_out(o.out, "json");
    const auto m = manifold_arg(o.manifold);
    const ChartPoint x = point_arg(o.point, m);
    const CurvatureReport c = curvature_at(m, x);
    json j = point_json(m, x);
    j["metric"] = mat_json(c.metric);
    j["mean_curvature_norm_sq"] = c.mean_curvature_norm_sq;
    j["scalar_curvature"] = c.scalar_curvature;
    std::ostringstream csv;
    csv << "quantity,value\nmean_curvature_norm_sq," << fmt_double(c.mean_curvature_norm_sq) << "\nscalar_curvature,"
        << fmt_double(c.scalar_curvature) << '\n';
    if (m.ambient_dim() == m.dim() + 1) {
        const ShapeData sd = shape_at(m, x);
        const EquicurvatureResult r = classify(x, m.embed(x), sd, Thresholds{});
        j["normal"] = vec_json(sd.normal);
        j["principal_curvatures"] = vec_json(sd.principal_curvatures);
        j["e1"] = sd.e1;
        j["e2"] = sd.e2;
        j["residual"] = r.residual;
        j["spread"] = r.spread;
        j["class"] = to_string(r.classification);
        for (std::size_t i = 0; i < sd.dim(); ++i)
            csv << "kappa_" << i + 1 << ',' << fmt_double(sd.principal_curvatures[i]) << '\n';
        csv << "e1," << fmt_double(sd.e1) << "\ne2," << fmt_double(sd.e2) << "\nresidual," << fmt_double(r.residual)
            << "\nspread," << fmt_double(r.spread) << "\nclass," << to_string(r.classification) << '\n';
    }
    write(sink, sink.format == "csv" ? csv.str() : dump(j));
}

void cmd_operator(const Options& o) {
    const Sink sink = resolve_out(o.out, "json");
    const auto m = manifold_arg(o.manifold);
    const ChartPoint x = point_arg(o.point, m);
    const ScalarField f = function_arg(o.f, m);
    if (o.order < 2 || o.order > 4096) throw FieldError("order", "field 'order': must lie in [2, 4096]");
    if (o.mc != 0 && o.mc < 1000) throw FieldError("mc", "field 'mc': need at least 1000 samples");
    const std::vector<double> eps = o.eps.empty() ? default_eps_ladder(m, x) : eps_arg(o.eps);
    const EpsLadder ladder = eps_sweep(m, f, x, eps, o.order);

    json samples = json::array();
    std::ostringstream csv;
    csv << "eps,value,tail_bound" << (o.mc ? ",mc_estimate,mc_std_error" : "") << '\n';
    for (const LadderSample& s : ladder.samples) {
        json js{{"eps", s.eps}, {"value", s.value}, {"tail_bound", s.tail_bound}};
        csv << fmt_double(s.eps) << ',' << fmt_double(s.value) << ',' << fmt_double(s.tail_bound);
        if (o.mc) {
            const MonteCarloEstimate mc = monte_carlo_operator(m, f, x, s.eps, o.mc, o.seed);
            js["mc"] = {{"estimate", mc.estimate}, {"std_error", mc.std_error}, {"acceptance", mc.acceptance}};
            csv << ',' << fmt_double(mc.estimate) << ',' << fmt_double(mc.std_error);
        }
        csv << '\n';
        samples.push_back(js);
    }
    json j{{"manifold", m.catalog_id()}, {"point", point_json(m, x)}, {"f", f.id}, {"order", o.order}};
    if (o.mc) j["seed"] = o.seed;
    j["samples"] = samples;
    write(sink, sink.format == "csv" ? csv.str() : dump(j));
}

void cmd_expand(const Options& o) {
    const Sink sink = resolve_out(o.out, "json");
    const auto m = manifold_arg(o.manifold);
    const ChartPoint x = point_arg(o.point, m);
    const ScalarField f = function_arg(o.f, m);
    if (o.Q < 1 || o.Q > 4) throw FieldError("Q", "field 'Q': must lie in [1, 4]");
    if (o.eps_count < o.Q + 2 || o.eps_count > 16)
        throw FieldError("eps-count", "field 'eps-count': must lie in [Q + 2, 16]");
    FitMethod method;
    if (o.method == "lsq" || o.method == "least_squares")
        method = FitMethod::least_squares;
    else if (o.method == "richardson")
        method = FitMethod::richardson;
    else
        throw FieldError("method", "field 'method': expected lsq or richardson, got '" + o.method + "'");

    const std::vector<double> eps = default_eps_ladder(m, x, o.eps_count);
    if (int(eps.size()) < o.Q + 2)
        throw FieldError("eps-count", "field 'eps-count': the ladder floor leaves too few eps values");
    const EpsLadder ladder = eps_sweep(m, f, x, eps);
    const FitReport fit = method == FitMethod::richardson ? richardson_sequence(ladder, o.Q) : fit_polynomial(ladder, o.Q);
    const ClosedFormComparison c = compare_closed_form(m, f, x, fit);
    const double rel0 = c.a0_closed != 0.0 ? c.a0_err / std::abs(c.a0_closed) : c.a0_err;

    json j{{"manifold", m.catalog_id()},
           {"point", point_json(m, x)},
           {"f", f.id},
           {"method", to_string(fit.method)},
           {"eps", eps},
           {"a", fit.coefficients},
           {"sensitivity", fit.covariance_diag},
           {"closed_form", {{"a0", c.a0_closed}, {"a1", c.a1_closed}}},
           {"rel_err", {rel0, c.a1_rel_err}},
           {"a1_absolute", c.a1_absolute},
           {"pass", c.pass()}};
    if (sink.format == "csv") {
        std::ostringstream csv;
        csv << "q,a,sensitivity,closed_form,rel_err\n";
        for (std::size_t q = 0; q < fit.coefficients.size(); ++q) {
            csv << q << ',' << fmt_double(fit.coefficients[q]) << ','
                << (q < fit.covariance_diag.size() ? fmt_double(fit.covariance_diag[q]) : "") << ',';
            if (q == 0) csv << fmt_double(c.a0_closed) << ',' << fmt_double(rel0);
            if (q == 1) csv << fmt_double(c.a1_closed) << ',' << fmt_double(c.a1_rel_err);
            if (q > 1) csv << ',';
            csv << '\n';
        }
        write(sink, csv.str());
    } else {
        write(sink, dump(j));
    }
}

void cmd_scan(const Options& o) {
    const Sink sink = resolve_out(o.out, "csv");
    const auto m = manifold_arg(o.manifold);
    if (m.ambient_dim() != m.dim() + 1)
        throw FieldError("manifold", "field 'manifold': equicurved-scan needs a hypersurface");
    if (o.grid.empty()) throw FieldError("grid", "field 'grid': required, e.g. 200x100");
    std::vector<std::size_t> cells;
    try {
        cells = parse_grid(o.grid, m.dim());
    } catch (const DomainError& e) {
        throw FieldError("grid", e.what());
    }
    if (!(o.tol_eq > 0)) throw FieldError("tol-eq", "field 'tol-eq': must be > 0");
    Thresholds th;
    th.eq = o.tol_eq;
    const ScanResult r = scan_equicurved(m, cells, th);
    const std::size_t d = m.dim();

    auto is_zero = [&](const EquicurvatureResult& e) {
        for (const auto& z : r.zero_set)
            if (z.point.chart == e.point.chart && z.point.coords == e.point.coords) return true;
        return false;
    };
    if (sink.format == "csv") {
        std::ostringstream csv;
        csv << "chart";
        for (std::size_t i = 1; i <= d; ++i) csv << ",s" << i;
        for (std::size_t i = 1; i <= d; ++i) csv << ",kappa_" << i;
        csv << ",e1,e2,residual,spread,class,zero\n";
        for (const EquicurvatureResult& e : r.results) {
            csv << e.point.chart;
            for (double s : e.point.coords) csv << ',' << fmt_double(s);
            for (double k : e.kappa) csv << ',' << fmt_double(k);
            csv << ',' << fmt_double(e.e1) << ',' << fmt_double(e.e2) << ',' << fmt_double(e.residual) << ','
                << fmt_double(e.spread) << ',' << to_string(e.classification) << ',' << (is_zero(e) ? 1 : 0) << '\n';
        }
        write(sink, csv.str());
        return;
    }
    double min_res = std::numeric_limits<double>::infinity(), max_res = 0.0;
    for (const auto& e : r.results) {
        min_res = std::min(min_res, std::abs(e.residual));
        max_res = std::max(max_res, std::abs(e.residual));
    }
    json zs = json::array();
    for (const auto& z : r.zero_set)
        zs.push_back({{"chart", z.point.chart},
                      {"coords", vec_json(z.point.coords)},
                      {"ambient", vec_json(z.ambient)},
                      {"kappa", vec_json(z.kappa)},
                      {"residual", z.residual},
                      {"class", to_string(z.classification)}});
    json j{{"manifold", m.catalog_id()},
           {"grid", cells},
           {"points", r.results.size()},
           {"min_abs_residual", r.results.empty() ? json(nullptr) : json(min_res)},
           {"max_abs_residual", max_res},
           {"zero_set", zs}};
    write(sink, dump(j));
}

// ---------------------------------------------------------------------------
// verify: a fast self-test table

struct Check {
    std::string name;
    std::function<std::string(bool&)> run;
};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

std::vector<Check> verify_checks() {
    std::vector<Check> c;
    c.push_back({"sphere kernel closed form", [](bool& ok) {
                     const auto s2 = make_sphere(2);
                     std::vector<double> eps;
                     for (int k = 0; k <= 6; ++k) eps.push_back(0.1 * std::pow(2.0, -k));
                     const EpsLadder l = eps_sweep(s2, constant_field(1.0), {0, Vec{1.1, 0.4}}, eps);
                     double worst = 0.0;
                     for (const auto& s : l.samples) worst = std::max(worst, std::abs(s.value - (1 - std::exp(-1 / s.eps))));
                     ok = worst <= 1e-8;
                     return "max err " + num(worst);
                 }});
    c.push_back({"fitted a1 on S^2, f = z", [](bool& ok) {
                     const auto s2 = make_sphere(2);
                     const ChartPoint x{0, Vec{std::acos(0.6), 0.3}};
                     const auto f = ambient_field(2);
                     const FitReport r = fit_polynomial(eps_sweep(s2, f, x, default_eps_ladder(s2, x)), 2);
                     const ClosedFormComparison cmp = compare_closed_form(s2, f, x, r);
                     ok = cmp.pass();
                     return "a1 " + num(cmp.a1_fit) + " vs " + num(cmp.a1_closed);
                 }});
    c.push_back({"coefficient engine on S^3", [](bool& ok) {
                     std::vector<HomogeneousPoly> f{HomogeneousPoly::constant(3, 1.0)};
                     for (int j = 1; j <= 4; ++j) f.emplace_back(3, j);
                     const auto a = expansion_from_taylor(round_sphere_taylor(3, f, 8), 1).values;
                     ok = std::abs(a[0] - 1) <= 1e-9 && std::abs(a[1] + 0.75) <= 1e-9;
                     return "a1 " + num(a[1]);
                 }});
    c.push_back({"chord expansion on S^2", [](bool& ok) {
                     const Vec grid{0.03, 0.04, 0.05, 0.065, 0.08, 0.1, 0.13, 0.16, 0.2, 0.25, 0.3, 0.4};
                     const ChordExpansion e =
                         chord_expansion_check(make_sphere(2), {0, {1.2, 0.3}}, Vec{0.6, 0.8}, grid);
                     ok = std::abs(e.g2 - 2) <= 1e-6 && std::abs(e.g4 + 2 * e.bvv_norm_sq) <= 1e-4 &&
                          e.residual_exponent >= 4.9;
                     return "g4 " + num(e.g4) + ", slope " + num(e.residual_exponent);
                 }});
    c.push_back({"Bell generating identity", [](bool& ok) {
                     double worst = 0.0;
                     const Vec xs{0.3, -1.2, 0.7, 1.9, -0.4, 0.8, -1.5, 0.2};
                     for (int M = 1; M <= 8; ++M) {
                         const GeneratingCheck g = bell_generating_check(xs, 1.3, 0.07, M);
                         worst = std::max(worst, std::abs(g.lhs - g.rhs));
                     }
                     const Vec x{0.5, -1.5, 2.5, 0.25};
                     ok = worst <= 1e-11 && bell_partial(4, 1, x) == x[3] &&
                          std::abs(bell_partial(4, 2, std::span<const double>(x).subspan(0, 3)) -
                                   (3 * x[1] * x[1] + 4 * x[0] * x[2])) <= 1e-13;
                     return "max err " + num(worst);
                 }});
    c.push_back({"c_p truncation bound", [](bool& ok) {
                     ok = true;
                     int n = 0;
                     for (int p = 0; p <= 4; ++p)
                         for (int d = 1; d <= 4; ++d)
                             for (double delta : {0.3, 0.5, 1.0})
                                 for (int k = 0; k <= 10; ++k, ++n) {
                                     const CpEstimate e = c_p(p, std::pow(10.0, -3.0 + 0.2 * k), delta, d);
                                     ok = ok && e.tail <= e.bound;
                                 }
                     return std::to_string(n) + " grid points";
                 }});
    c.push_back({"spheroid umbilics are the poles", [](bool& ok) {
                     const ScanResult r = scan_equicurved(make_spheroid(1.0, 1.6), {40, 20});
                     int poles = 0;
                     for (const auto& z : r.zero_set)
                         if (std::hypot(z.ambient[0], z.ambient[1]) <= 1e-6) ++poles;
                     ok = r.zero_set.size() == 2 && poles == 2;
                     return std::to_string(r.zero_set.size()) + " zeros";
                 }});
    c.push_back({"torus has no equicurved points", [](bool& ok) {
                     const ScanResult r = scan_equicurved(make_torus(2, 1), {40, 20});
                     double lo = std::numeric_limits<double>::infinity();
                     for (const auto& e : r.results) lo = std::min(lo, std::abs(e.residual));
                     ok = r.zero_set.empty() && lo > 0.05;
                     return "min residual " + num(lo);
                 }});
    c.push_back({"quadric origin kappa (4,1,1)", [](bool& ok) {
                     const ShapeData sd = shape_at(make_quadric411(), {0, Vec{0.0, 0.0, 0.0}});
                     Vec k = sd.principal_curvatures;
                     if (k[0] < 0)
                         for (double& v : k) v = -v;
                     std::sort(k.begin(), k.end(), std::greater<>());
                     ok = std::abs(k[0] - 4) <= 1e-8 && std::abs(k[1] - 1) <= 1e-8 && std::abs(k[2] - 1) <= 1e-8 &&
                          check_propositions(sd).pass();
                     return "residual " + num(equicurvature_residual(sd));
                 }});
    c.push_back({"limit criterion fails on the torus", [](bool& ok) {
                     const auto t = make_torus(2, 1);
                     const ChartPoint x{0, Vec{0.0, 0.0}};
                     const auto one = constant_field(1.0);
                     const auto r = limit_criterion_check(t, one, x, eps_sweep(t, one, x, default_eps_ladder(t, x)));
                     ok = !r.pass && r.gap >= 0.05;
                     return "gap " + num(r.gap);
                 }});
    return c;
}

int cmd_verify(const Options& o) {
    const Sink sink = resolve_out(o.out, "table");
    std::ostringstream table, csv;
    json arr = json::array();
    csv << "check,result,detail\n";
    int failed = 0;
    for (const Check& c : verify_checks()) {
        bool ok = false;
        std::string detail;
        try {
            detail = c.run(ok);
        } catch (const std::exception& e) {
            ok = false;
            detail = std::string("error: ") + e.what();
        }
        if (!ok) ++failed;
        char line[512];
        std::snprintf(line, sizeof line, "%-36s %-4s  %s\n", c.name.c_str(), ok ? "PASS" : "FAIL", detail.c_str());
        table << line;
        csv << c.name << ',' << (ok ? "PASS" : "FAIL") << ",\"" << detail << "\"\n";
        arr.push_back({{"check", c.name}, {"pass", ok}, {"detail", detail}});
    }
    table << (failed ? std::to_string(failed) + " check(s) failed\n" : "all checks passed\n");
    write(sink, sink.format == "json" ? dump(arr) : sink.format == "csv" ? csv.str() : table.str());
    return failed ? 2 : 0;
}

// ---------------------------------------------------------------------------

int fail(int code, const std::string& kind, const std::string& field, const std::string& message) {
    json j{{"error", kind}, {"field", field}, {"message", message}};
    std::cerr << j.dump() << '\n';
    return code;
}

/// Field named by a library message of the form "field 'x': ...".
std::string field_of(const std::string& msg) {
    const auto p = msg.find("field '");
    if (p == std::string::npos) return "input";
    const auto q = msg.find('\'', p + 7);
    return q == std::string::npos ? "input" : msg.substr(p + 7, q - p - 7);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gaussian integral operator expansions on embedded manifolds"};
    app.require_subcommand(1);
    Options o;

    auto add_out = [&](CLI::App* s) { s->add_option("--out", o.out, "json, csv, - (stdout) or a file path"); };
    auto add_point = [&](CLI::App* s) {
        s->add_option("--manifold", o.manifold, "catalog id or key=value spec file");
        s->add_option("--point", o.point, "chart:s1,s2,... (default: centre of chart 0)");
    };

    auto* catalog = app.add_subcommand("catalog", "list the built-in manifolds");
    add_out(catalog);

    auto* curvature = app.add_subcommand("curvature", "metric, curvature and principal curvatures at a point");
    add_point(curvature);
    add_out(curvature);

    auto* op = app.add_subcommand("operator", "evaluate K_eps f(x) over a list of eps");
    add_point(op);
    op->add_option("--f", o.f, "const:<c>, ambient:<i> or poly:<terms>");
    op->add_option("--eps", o.eps, "comma-separated eps values (default: adaptive ladder)");
    op->add_option("--order", o.order, "minimum Gauss-Legendre points per axis");
    op->add_option("--mc", o.mc, "also run a Monte Carlo estimate with this many samples");
    op->add_option("--seed", o.seed, "Monte Carlo seed");
    add_out(op);

    auto* expand = app.add_subcommand("expand", "fit a_0 .. a_Q and compare with the closed forms");
    add_point(expand);
    expand->add_option("--f", o.f, "const:<c>, ambient:<i> or poly:<terms>");
    expand->add_option("--eps-count", o.eps_count, "number of eps values in the ladder");
    expand->add_option("--Q", o.Q, "highest coefficient");
    expand->add_option("--method", o.method, "lsq or richardson");
    add_out(expand);

    auto* scan = app.add_subcommand("equicurved-scan", "grid scan of e1^2 - 4 e2 on a hypersurface");
    scan->add_option("--manifold", o.manifold, "catalog id or key=value spec file");
    scan->add_option("--grid", o.grid, "cells per axis, e.g. 200x100");
    scan->add_option("--tol-eq", o.tol_eq, "equicurvature tolerance scale");
    add_out(scan);

    auto* verify = app.add_subcommand("verify", "run the built-in self checks");
    add_out(verify);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::string field = "arguments";
        const std::string msg = e.what();
        const auto dash = msg.find("--");
        if (dash != std::string::npos) {
            auto end = msg.find_first_of(" :,", dash);
            field = msg.substr(dash + 2, end == std::string::npos ? std::string::npos : end - dash - 2);
        }
        return fail(1, "validation", field, msg);
    }

    try {
        if (*catalog) cmd_catalog(o);
        if (*curvature) cmd_curvature(o);
        if (*op) cmd_operator(o);
        if (*expand) cmd_expand(o);
        if (*scan) cmd_scan(o);
        if (*verify) return cmd_verify(o);
        return 0;
    } catch (const FieldError& e) {
        return fail(1, "validation", e.field, e.what());
    } catch (const DomainError& e) {
        return fail(1, "validation", field_of(e.what()), e.what());
    } catch (const NumericalError& e) {
        return fail(2, "numerical", field_of(e.what()), e.what());
    } catch (const std::exception& e) {
        return fail(2, "numerical", "input", e.what());
    }
}
