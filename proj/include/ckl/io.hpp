#pragma once

// JSON serialization of Taylor data and number formatting for byte-stable output.

#include <cstdio>
#include <string>

#include "json.hpp"

#include "ckl/coeffs.hpp"
#include "ckl/error.hpp"
#include "ckl/moments.hpp"

namespace ckl {

/// %.17g: round-trips every double and prints identically across runs.
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline nlohmann::json poly_to_json(const HomogeneousPoly& p) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [alpha, c] : p.terms()) arr.push_back({{"alpha", alpha}, {"c", c}});
    return arr;
}

inline HomogeneousPoly poly_from_json(const nlohmann::json& j, std::size_t dim, int degree, const std::string& where) {
    if (!j.is_array()) throw DomainError("TaylorData JSON: '" + where + "' must be an array of terms");
    HomogeneousPoly p(dim, degree);
    for (const auto& term : j) {
        if (!term.is_object() || !term.contains("alpha") || !term.contains("c"))
            throw DomainError("TaylorData JSON: every term in '" + where + "' needs 'alpha' and 'c'");
        MultiIndex a = term.at("alpha").get<MultiIndex>();
        if (a.size() != dim) throw DomainError("TaylorData JSON: alpha length in '" + where + "' differs from dim");
        if (total_degree(a) != degree)
            throw DomainError("TaylorData JSON: term of degree " + std::to_string(total_degree(a)) + " in '" + where +
                              "', expected " + std::to_string(degree));
        p.add_term(std::move(a), term.at("c").get<double>());
    }
    return p;
}

inline nlohmann::json taylor_to_json(const TaylorData& td) {
    nlohmann::json j;
    j["dim"] = td.dim;
    for (const char* key : {"f_terms", "rho_terms", "q_terms"}) j[key] = nlohmann::json::array();
    for (const auto& p : td.f_terms) j["f_terms"].push_back(poly_to_json(p));
    for (const auto& p : td.rho_terms) j["rho_terms"].push_back(poly_to_json(p));
    for (const auto& p : td.q_terms) j["q_terms"].push_back(poly_to_json(p));
    return j;
}

/// q_terms start at degree 4: entry i holds the degree i+4 term.
inline TaylorData taylor_from_json(const nlohmann::json& j) {
    try {
        TaylorData td;
        const int dim = j.at("dim").get<int>();
        if (dim < 1) throw DomainError("TaylorData JSON: 'dim' must be >= 1");
        td.dim = std::size_t(dim);
        auto read = [&](const char* key, int offset, std::vector<HomogeneousPoly>& out) {
            if (!j.contains(key)) return;
            const auto& arr = j.at(key);
            for (std::size_t i = 0; i < arr.size(); ++i)
                out.push_back(poly_from_json(arr[i], td.dim, int(i) + offset, std::string(key) + "[" + std::to_string(i) + "]"));
        };
        read("f_terms", 0, td.f_terms);
        read("rho_terms", 0, td.rho_terms);
        read("q_terms", 4, td.q_terms);
        td.validate();
        return td;
    } catch (const nlohmann::json::exception& e) {
        throw DomainError(std::string("TaylorData JSON: ") + e.what());
    }
}

}  // namespace ckl
