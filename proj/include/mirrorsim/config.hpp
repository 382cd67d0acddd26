#pragma once

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mirrorsim/dynamics.hpp"
#include "mirrorsim/field.hpp"
#include "mirrorsim/geometry.hpp"
#include "mirrorsim/particle.hpp"

namespace mirrorsim {

// Anything wrong with user-supplied configuration.  The CLI maps this to
// exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DiagnosticsConfig {
    double mu_spacing = 2.0;
    double cell_size = 0.25;
    std::vector<double> R_list = {4.0, 8.0, 16.0, 32.0, 64.0};
    // Pairs (t, delta) for time-averaged field reports.
    std::vector<std::pair<double, double>> average_windows;
};

struct RunConfig {
    Geometry geometry;
    InitialDataParams initial;
    int n_per_slab = 64;
    std::uint64_t seed = 2027;
    FieldConfig field;
    // True when no softening was given: it is then derived from the sampled
    // cloud as 0.2 x mean nearest-neighbor spacing.
    bool softening_auto = true;
    StepConfig stepping;
    DiagnosticsConfig diagnostics;
    std::string output_dir = "out";
};

namespace detail {

using json = nlohmann::json;

inline void reject_unknown(const json& obj, const std::string& path,
                           std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : obj.items()) {
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) { ok = true; break; }
        if (!ok)
            throw ConfigError("config error: unknown key '" + path + key + "'");
    }
}

inline const json* find(const json& obj, const char* key) {
    const auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

inline double as_number(const json& v, const std::string& path) {
    if (!v.is_number())
        throw ConfigError("config error: '" + path + "' must be a number");
    return v.get<double>();
}

inline int as_int(const json& v, const std::string& path) {
    if (!v.is_number_integer())
        throw ConfigError("config error: '" + path + "' must be an integer");
    return v.get<int>();
}

inline bool as_bool(const json& v, const std::string& path) {
    if (!v.is_boolean())
        throw ConfigError("config error: '" + path + "' must be a boolean");
    return v.get<bool>();
}

inline std::string as_string(const json& v, const std::string& path) {
    if (!v.is_string())
        throw ConfigError("config error: '" + path + "' must be a string");
    return v.get<std::string>();
}

inline void read_geometry(const json& obj, Geometry& g) {
    reject_unknown(obj, "geometry.", {"A", "A_bar", "theta", "L", "M"});
    if (const json* v = find(obj, "A")) g.A = as_number(*v, "geometry.A");
    if (const json* v = find(obj, "A_bar")) g.A_bar = as_number(*v, "geometry.A_bar");
    if (const json* v = find(obj, "theta")) g.theta = as_number(*v, "geometry.theta");
    if (const json* v = find(obj, "L")) g.L = as_int(*v, "geometry.L");
    if (const json* v = find(obj, "M")) g.M = as_int(*v, "geometry.M");
}

inline void read_initial(const json& obj, RunConfig& cfg) {
    reject_unknown(obj, "initial.",
                   {"C0", "lambda", "C1", "alpha", "N_cutoff", "n_per_slab", "seed"});
    if (const json* v = find(obj, "C0")) cfg.initial.C0 = as_number(*v, "initial.C0");
    if (const json* v = find(obj, "lambda")) cfg.initial.lambda = as_number(*v, "initial.lambda");
    if (const json* v = find(obj, "C1")) cfg.initial.C1 = as_number(*v, "initial.C1");
    if (const json* v = find(obj, "alpha")) cfg.initial.alpha = as_number(*v, "initial.alpha");
    if (const json* v = find(obj, "N_cutoff")) {
        if (v->is_null())
            cfg.initial.N_cutoff = std::numeric_limits<double>::infinity();
        else
            cfg.initial.N_cutoff = as_number(*v, "initial.N_cutoff");
    }
    if (const json* v = find(obj, "n_per_slab")) cfg.n_per_slab = as_int(*v, "initial.n_per_slab");
    if (const json* v = find(obj, "seed")) {
        if (!v->is_number_integer() || v->get<std::int64_t>() < 0)
            throw ConfigError("config error: 'initial.seed' must be a non-negative integer");
        cfg.seed = v->get<std::uint64_t>();
    }
}

inline void read_field(const json& obj, RunConfig& cfg) {
    reject_unknown(obj, "field.", {"softening", "near_radius", "method"});
    if (const json* v = find(obj, "softening")) {
        if (v->is_null()) {
            cfg.softening_auto = true;
        } else {
            cfg.field.softening = as_number(*v, "field.softening");
            cfg.softening_auto = false;
        }
    }
    if (const json* v = find(obj, "near_radius"))
        cfg.field.near_radius = as_number(*v, "field.near_radius");
    if (const json* v = find(obj, "method")) {
        const std::string m = as_string(*v, "field.method");
        if (m == "direct")
            cfg.field.method = FieldMethod::direct;
        else if (m == "hybrid")
            cfg.field.method = FieldMethod::hybrid;
        else
            throw ConfigError("config error: 'field.method' must be \"direct\" or \"hybrid\"");
    }
}

inline void read_stepping(const json& obj, StepConfig& s) {
    reject_unknown(obj, "stepping.",
                   {"dt", "t_end", "record_every", "max_speed_floor",
                    "electric_kicks", "magnetic_rotation"});
    if (const json* v = find(obj, "dt")) s.dt = as_number(*v, "stepping.dt");
    if (const json* v = find(obj, "t_end")) s.t_end = as_number(*v, "stepping.t_end");
    if (const json* v = find(obj, "record_every"))
        s.record_every = as_int(*v, "stepping.record_every");
    if (const json* v = find(obj, "max_speed_floor"))
        s.max_speed_floor = as_number(*v, "stepping.max_speed_floor");
    if (const json* v = find(obj, "electric_kicks"))
        s.electric_kicks = as_bool(*v, "stepping.electric_kicks");
    if (const json* v = find(obj, "magnetic_rotation"))
        s.magnetic_rotation = as_bool(*v, "stepping.magnetic_rotation");
}

inline void read_diagnostics(const json& obj, DiagnosticsConfig& d) {
    reject_unknown(obj, "diagnostics.",
                   {"mu_spacing", "cell_size", "R_list", "average_windows"});
    if (const json* v = find(obj, "mu_spacing"))
        d.mu_spacing = as_number(*v, "diagnostics.mu_spacing");
    if (const json* v = find(obj, "cell_size"))
        d.cell_size = as_number(*v, "diagnostics.cell_size");
    if (const json* v = find(obj, "R_list")) {
        if (!v->is_array() || v->empty())
            throw ConfigError("config error: 'diagnostics.R_list' must be a non-empty array");
        d.R_list.clear();
        for (const auto& e : *v) d.R_list.push_back(as_number(e, "diagnostics.R_list[]"));
    }
    if (const json* v = find(obj, "average_windows")) {
        if (!v->is_array())
            throw ConfigError("config error: 'diagnostics.average_windows' must be an array");
        d.average_windows.clear();
        for (const auto& e : *v) {
            if (!e.is_array() || e.size() != 2)
                throw ConfigError(
                    "config error: 'diagnostics.average_windows' entries must be [t, delta] pairs");
            d.average_windows.emplace_back(as_number(e[0], "diagnostics.average_windows[][0]"),
                                           as_number(e[1], "diagnostics.average_windows[][1]"));
        }
    }
}

}  // namespace detail

inline RunConfig parse_config(const nlohmann::json& root) {
    if (!root.is_object())
        throw ConfigError("config error: top level must be a JSON object");
    detail::reject_unknown(root, "",
                           {"geometry", "initial", "field", "stepping", "diagnostics",
                            "output_dir"});
    RunConfig cfg;
    try {
        if (const auto* v = detail::find(root, "geometry")) detail::read_geometry(*v, cfg.geometry);
        if (const auto* v = detail::find(root, "initial")) detail::read_initial(*v, cfg);
        if (const auto* v = detail::find(root, "field")) detail::read_field(*v, cfg);
        if (const auto* v = detail::find(root, "stepping")) detail::read_stepping(*v, cfg.stepping);
        if (const auto* v = detail::find(root, "diagnostics"))
            detail::read_diagnostics(*v, cfg.diagnostics);
        if (const auto* v = detail::find(root, "output_dir"))
            cfg.output_dir = detail::as_string(*v, "output_dir");

        validate(cfg.geometry);
        validate(cfg.initial);
        if (!cfg.softening_auto) validate(cfg.field);
        validate(cfg.stepping);
        if (cfg.n_per_slab < 1)
            throw ConfigError("config error: initial.n_per_slab must be >= 1");
        if (!(cfg.diagnostics.mu_spacing > 0.0))
            throw ConfigError("config error: diagnostics.mu_spacing must be positive");
        if (!(cfg.diagnostics.cell_size > 0.0))
            throw ConfigError("config error: diagnostics.cell_size must be positive");
        for (double r : cfg.diagnostics.R_list)
            if (!(r > 0.0))
                throw ConfigError("config error: diagnostics.R_list entries must be positive");
        for (const auto& [t, delta] : cfg.diagnostics.average_windows)
            if (!(t >= 0.0) || !(delta > 0.0))
                throw ConfigError(
                    "config error: diagnostics.average_windows needs t >= 0 and delta > 0");
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config error: ") + e.what());
    }
    return cfg;
}

// Applies one "dotted.path=json-literal" override before validation.
inline void apply_override(nlohmann::json& root, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("config error: override '" + assignment + "' is not of the form key=value");
    const std::string path = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);

    nlohmann::json parsed = nlohmann::json::parse(value, nullptr, false);
    if (parsed.is_discarded())
        parsed = value;   // bare strings stay strings

    nlohmann::json* node = &root;
    std::size_t begin = 0;
    while (true) {
        const std::size_t dot = path.find('.', begin);
        const std::string key = path.substr(begin, dot == std::string::npos ? dot : dot - begin);
        if (key.empty())
            throw ConfigError("config error: override path '" + path + "' has an empty segment");
        if (dot == std::string::npos) {
            (*node)[key] = parsed;
            break;
        }
        node = &(*node)[key];
        begin = dot + 1;
    }
}

inline RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config error: cannot open '" + path + "'");
    nlohmann::json root = nlohmann::json::parse(is, nullptr, false);
    if (root.is_discarded())
        throw ConfigError("config error: '" + path + "' is not valid JSON");
    for (const std::string& o : overrides) apply_override(root, o);
    return parse_config(root);
}

}  // namespace mirrorsim
