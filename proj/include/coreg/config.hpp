#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "coreg/circumferential.hpp"
#include "coreg/dtw.hpp"

namespace coreg {

class InvalidConfig : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Every tunable of the registration engine. The defaults are the values
/// the engine ships with; a config file only needs the keys it overrides.
struct EngineConfig {
    LongWeights long_weights;
    CircWeights circ_weights;
    double sigma = 2.0;                      // feature smoothing, in frames
    double lambda = 0.5;                     // rotation smoothness weight
    double delta_max_deg_per_mm = 30.0;      // hard cap on rotation rate
    double calcium_anchor_threshold = 0.05;  // min calcified fraction for anchors
    bool strict_sidebranch_zeroing = false;  // zero calcium-only anchor rows
    std::uint64_t bootstrap_seed = 1729;
    int bootstrap_resamples = 2000;

    friend bool operator==(const EngineConfig&, const EngineConfig&) = default;
};

namespace detail {

inline void require_keys(const nlohmann::json& j,
                         std::initializer_list<const char*> allowed,
                         const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : allowed) known |= (it.key() == k);
        if (!known) {
            throw InvalidConfig("unknown key '" + it.key() + "' in " + where);
        }
    }
}

inline double get_number(const nlohmann::json& j, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number()) throw InvalidConfig(std::string(key) + " must be a number");
    return j[key].get<double>();
}

}  // namespace detail

inline void validate(const EngineConfig& c) {
    const LongWeights& lw = c.long_weights;
    const CircWeights& cw = c.circ_weights;
    if (lw.w_lumen < 0 || lw.w_sb < 0 || lw.w_calc < 0 || lw.w_pos < 0) {
        throw InvalidConfig("long_weights must be non-negative");
    }
    if (lw.w_lumen + lw.w_sb + lw.w_calc + lw.w_pos <= 0) {
        throw InvalidConfig("at least one longitudinal weight must be positive");
    }
    if (cw.w_sb < 0 || cw.w_calc < 0 || cw.w_ecc < 0) {
        throw InvalidConfig("circ_weights must be non-negative");
    }
    if (cw.w_sb + cw.w_calc + cw.w_ecc <= 0) {
        throw InvalidConfig("at least one circumferential weight must be positive");
    }
    if (c.sigma < 0) throw InvalidConfig("sigma must be >= 0");
    if (c.lambda < 0) throw InvalidConfig("lambda must be >= 0");
    if (!(c.delta_max_deg_per_mm > 0)) throw InvalidConfig("delta_max_deg_per_mm must be > 0");
    if (c.calcium_anchor_threshold < 0 || c.calcium_anchor_threshold > 1) {
        throw InvalidConfig("calcium_anchor_threshold must be in [0,1]");
    }
    if (c.bootstrap_resamples < 1) throw InvalidConfig("bootstrap_resamples must be >= 1");
}

/// Reads an EngineConfig from JSON. Keys not listed in EngineConfig are
/// rejected so a typo in a tuned weight cannot silently fall back to the
/// default.
inline EngineConfig engine_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw InvalidConfig("config must be a JSON object");
    detail::require_keys(j,
                         {"long_weights", "circ_weights", "sigma", "lambda",
                          "delta_max_deg_per_mm", "calcium_anchor_threshold",
                          "strict_sidebranch_zeroing", "bootstrap_seed",
                          "bootstrap_resamples"},
                         "config");
    EngineConfig c;
    if (j.contains("long_weights")) {
        const auto& w = j["long_weights"];
        if (!w.is_object()) throw InvalidConfig("long_weights must be an object");
        detail::require_keys(
            w, {"lumen_area", "side_branch_area", "calcium_degree", "norm_position"},
            "long_weights");
        c.long_weights.w_lumen = detail::get_number(w, "lumen_area", c.long_weights.w_lumen);
        c.long_weights.w_sb = detail::get_number(w, "side_branch_area", c.long_weights.w_sb);
        c.long_weights.w_calc = detail::get_number(w, "calcium_degree", c.long_weights.w_calc);
        c.long_weights.w_pos = detail::get_number(w, "norm_position", c.long_weights.w_pos);
    }
    if (j.contains("circ_weights")) {
        const auto& w = j["circ_weights"];
        if (!w.is_object()) throw InvalidConfig("circ_weights must be an object");
        detail::require_keys(w, {"side_branch", "calcium", "eccentricity"}, "circ_weights");
        c.circ_weights.w_sb = detail::get_number(w, "side_branch", c.circ_weights.w_sb);
        c.circ_weights.w_calc = detail::get_number(w, "calcium", c.circ_weights.w_calc);
        c.circ_weights.w_ecc = detail::get_number(w, "eccentricity", c.circ_weights.w_ecc);
    }
    c.sigma = detail::get_number(j, "sigma", c.sigma);
    c.lambda = detail::get_number(j, "lambda", c.lambda);
    c.delta_max_deg_per_mm = detail::get_number(j, "delta_max_deg_per_mm", c.delta_max_deg_per_mm);
    c.calcium_anchor_threshold =
        detail::get_number(j, "calcium_anchor_threshold", c.calcium_anchor_threshold);
    if (j.contains("strict_sidebranch_zeroing")) {
        if (!j["strict_sidebranch_zeroing"].is_boolean()) {
            throw InvalidConfig("strict_sidebranch_zeroing must be a boolean");
        }
        c.strict_sidebranch_zeroing = j["strict_sidebranch_zeroing"].get<bool>();
    }
    if (j.contains("bootstrap_seed")) {
        if (!j["bootstrap_seed"].is_number_unsigned() && !j["bootstrap_seed"].is_number_integer()) {
            throw InvalidConfig("bootstrap_seed must be an integer");
        }
        c.bootstrap_seed = j["bootstrap_seed"].get<std::uint64_t>();
    }
    if (j.contains("bootstrap_resamples")) {
        if (!j["bootstrap_resamples"].is_number_integer()) {
            throw InvalidConfig("bootstrap_resamples must be an integer");
        }
        c.bootstrap_resamples = j["bootstrap_resamples"].get<int>();
    }
    validate(c);
    return c;
}

inline nlohmann::json engine_config_to_json(const EngineConfig& c) {
    return nlohmann::json{
        {"long_weights",
         {{"lumen_area", c.long_weights.w_lumen},
          {"side_branch_area", c.long_weights.w_sb},
          {"calcium_degree", c.long_weights.w_calc},
          {"norm_position", c.long_weights.w_pos}}},
        {"circ_weights",
         {{"side_branch", c.circ_weights.w_sb},
          {"calcium", c.circ_weights.w_calc},
          {"eccentricity", c.circ_weights.w_ecc}}},
        {"sigma", c.sigma},
        {"lambda", c.lambda},
        {"delta_max_deg_per_mm", c.delta_max_deg_per_mm},
        {"calcium_anchor_threshold", c.calcium_anchor_threshold},
        {"strict_sidebranch_zeroing", c.strict_sidebranch_zeroing},
        {"bootstrap_seed", c.bootstrap_seed},
        {"bootstrap_resamples", c.bootstrap_resamples}};
}

inline EngineConfig load_engine_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidConfig("cannot open config file: " + path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw InvalidConfig("config file is not valid JSON: " + path);
    return engine_config_from_json(j);
}

}  // namespace coreg
