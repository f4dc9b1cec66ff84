#ifndef MAGLOC_CONFIG_IO_HPP
#define MAGLOC_CONFIG_IO_HPP

#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "field_model.hpp"

namespace magloc {

using json = nlohmann::json;

namespace detail {

inline void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("bad value for " + where + "." + key);
    }
}

inline Trig parse_trig(const std::string& s) {
    if (s == "one") return Trig::one;
    if (s == "cos") return Trig::cos;
    if (s == "sin") return Trig::sin;
    throw ConfigError("periodic term factor must be one of one|cos|sin, got '" + s + "'");
}

inline const char* trig_name(Trig t) {
    switch (t) {
        case Trig::one: return "one";
        case Trig::cos: return "cos";
        case Trig::sin: return "sin";
    }
    return "one";
}

}  // namespace detail

inline PeriodicField periodic_from_json(const json& j, const std::string& where) {
    if (j.is_null()) return PeriodicField(0.0);
    if (j.is_string()) {
        if (j.get<std::string>() == "zero") return PeriodicField(0.0);
        throw ConfigError(where + ": only the named expression 'zero' is predefined");
    }
    if (j.is_number()) return PeriodicField(j.get<double>());
    detail::reject_unknown(j, {"const", "terms"}, where);
    double c = detail::get_or<double>(j, "const", 0.0, where);
    std::vector<TrigTerm> terms;
    if (j.contains("terms")) {
        if (!j["terms"].is_array()) throw ConfigError(where + ".terms must be an array");
        for (const auto& t : j["terms"]) {
            detail::reject_unknown(t, {"amp", "fx", "kx", "fy", "ky"}, where + ".terms[]");
            TrigTerm tt;
            tt.amp = detail::get_or<double>(t, "amp", 0.0, where);
            tt.fx = detail::parse_trig(detail::get_or<std::string>(t, "fx", "one", where));
            tt.fy = detail::parse_trig(detail::get_or<std::string>(t, "fy", "one", where));
            tt.kx = detail::get_or<int>(t, "kx", 0, where);
            tt.ky = detail::get_or<int>(t, "ky", 0, where);
            terms.push_back(tt);
        }
    }
    return PeriodicField(c, terms);
}

inline json periodic_to_json(const PeriodicField& f) {
    json terms = json::array();
    for (const auto& t : f.terms())
        terms.push_back({{"amp", t.amp}, {"fx", detail::trig_name(t.fx)}, {"kx", t.kx},
                         {"fy", detail::trig_name(t.fy)}, {"ky", t.ky}});
    return {{"const", f.constant()}, {"terms", terms}};
}

inline FieldModelConfig config_from_json(const json& j) {
    FieldModelConfig c;
    detail::reject_unknown(j, {"model", "profile", "dist", "fields"}, "config");
    if (j.contains("model")) {
        const json& m = j["model"];
        detail::reject_unknown(m, {"b0", "B0", "mu", "rho", "c_ran", "k_max", "K0", "coefficient_cap"}, "model");
        c.b0 = detail::get_or<double>(m, "b0", c.b0, "model");
        c.B0 = detail::get_or<double>(m, "B0", c.B0, "model");
        c.mu = detail::get_or<double>(m, "mu", c.mu, "model");
        c.rho = detail::get_or<double>(m, "rho", c.rho, "model");
        c.c_ran = detail::get_or<double>(m, "c_ran", c.c_ran, "model");
        c.k_max = detail::get_or<int>(m, "k_max", c.k_max, "model");
        c.K0 = detail::get_or<double>(m, "K0", c.K0, "model");
        c.coefficient_cap = detail::get_or<double>(m, "coefficient_cap", c.coefficient_cap, "model");
    }
    if (j.contains("profile")) {
        const json& p = j["profile"];
        detail::reject_unknown(p, {"family", "delta"}, "profile");
        std::string fam = detail::get_or<std::string>(p, "family", "plateau", "profile");
        if (fam == "plateau") c.profile.family = ProfileFamily::plateau;
        else if (fam == "scaled-bump") c.profile.family = ProfileFamily::scaled_bump;
        else throw ConfigError("profile.family must be plateau or scaled-bump");
        c.profile.delta = detail::get_or<double>(p, "delta", c.profile.delta, "profile");
    }
    if (j.contains("dist")) {
        const json& d = j["dist"];
        detail::reject_unknown(d, {"tau", "c_v", "shape", "lo", "hi", "at", "c2"}, "dist");
        std::string shape = detail::get_or<std::string>(d, "shape", "beta", "dist");
        if (shape == "beta") c.dist.shape = DistShape::beta;
        else if (shape == "point") c.dist.shape = DistShape::point;
        else throw ConfigError("dist.shape must be beta or point");
        c.dist.tau = detail::get_or<int>(d, "tau", c.dist.tau, "dist");
        c.dist.c_v = detail::get_or<double>(d, "c_v", c.dist.c_v, "dist");
        c.dist.lo = detail::get_or<double>(d, "lo", c.dist.lo, "dist");
        c.dist.hi = detail::get_or<double>(d, "hi", c.dist.hi, "dist");
        c.dist.at = detail::get_or<double>(d, "at", c.dist.at, "dist");
        c.dist.c2 = detail::get_or<double>(d, "c2", c.dist.c2, "dist");
    }
    if (j.contains("fields")) {
        const json& f = j["fields"];
        detail::reject_unknown(f, {"b_var", "v"}, "fields");
        if (f.contains("b_var")) c.b_var = periodic_from_json(f["b_var"], "fields.b_var");
        if (f.contains("v")) c.v = periodic_from_json(f["v"], "fields.v");
    }
    c.check();
    return c;
}

inline json config_to_json(const FieldModelConfig& c) {
    return {{"model",
             {{"b0", c.b0}, {"B0", c.B0}, {"mu", c.mu}, {"rho", c.rho}, {"c_ran", c.c_ran}, {"k_max", c.k_max},
              {"K0", c.K0}, {"coefficient_cap", c.coefficient_cap}}},
            {"profile",
             {{"family", c.profile.family == ProfileFamily::plateau ? "plateau" : "scaled-bump"},
              {"delta", c.profile.delta}}},
            {"dist",
             {{"shape", c.dist.shape == DistShape::beta ? "beta" : "point"}, {"tau", c.dist.tau}, {"c_v", c.dist.c_v},
              {"lo", c.dist.lo}, {"hi", c.dist.hi}, {"at", c.dist.at}, {"c2", c.dist.c2}}},
            {"fields", {{"b_var", periodic_to_json(c.b_var)}, {"v", periodic_to_json(c.v)}}}};
}

inline json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("malformed JSON in " + path + ": " + e.what());
    }
}

inline FieldModelConfig load_config(const std::string& path) { return config_from_json(load_json_file(path)); }

inline json sample_to_json(const FieldSample& s) {
    json coeffs = json::array();
    for (const auto& l : s.layers) {
        double h = std::ldexp(1.0, -l.k);
        for (long j = l.j0; j < l.j0 + l.nj; ++j)
            for (long i = l.i0; i < l.i0 + l.ni; ++i)
                coeffs.push_back({{"k", l.k}, {"z", {i * h, j * h}}, {"omega", l.at(i, j)}});
    }
    return {{"seed", s.seed},
            {"kind", s.kind},
            {"region", {s.region.lo.x, s.region.lo.y, s.region.hi.x, s.region.hi.y}},
            {"coefficients", coeffs}};
}

}  // namespace magloc

#endif
