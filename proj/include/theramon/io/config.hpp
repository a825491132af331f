#pragma once

// Run configuration (JSON). Every section is optional; omitted values keep
// their defaults.
//
// {
//   "constants": {"k": 0.05, "r": 8.0},
//   "grids": {"alpha": [1, 1.5, 2], "gamma": [0.1, 0.2, 0.4], "tau": [6, 8, 10]},
//   "precision_hyperprior": {"concentration": 1, "a_grid": [...], "b_grid": [...]},
//   "chain": {"sweeps": 500, "burn_in": 100, "thin": 5, "seed": 1},
//   "collapse": {"mode": "closed_form", "draws": 1000},
//   "quantiles": [0.05, 0.5, 0.95],
//   "w0_policy": "last_observed"
// }

#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "theramon/inference/collapse.hpp"
#include "theramon/inference/population.hpp"
#include "theramon/inference/predict.hpp"
#include "theramon/io/json_fields.hpp"
#include "theramon/io/text.hpp"
#include "theramon/model/types.hpp"

namespace theramon::io {

inline constexpr const char* kConfigEnv = "THERAMON_CONFIG";

struct RunConfig {
    model::ModelConstants consts;
    model::HyperpriorConfig hyper;
    inference::ChainSettings chain;
    inference::CollapseMode collapse_mode = inference::CollapseMode::closed_form;
    std::size_t collapse_draws = 1000;
    std::vector<double> quantiles{0.05, 0.5, 0.95};
    inference::W0Policy w0_policy = inference::W0Policy::last_observed;

    void validate() const {
        consts.validate();
        hyper.validate();
        if (chain.thin == 0) throw FieldError("chain.thin", "must be >= 1");
        if (chain.burn_in > chain.sweeps) throw FieldError("chain.burn_in", "must not exceed chain.sweeps");
        if (collapse_draws == 0) throw FieldError("collapse.draws", "must be >= 1");
        try {
            inference::check_levels(quantiles);
        } catch (const ConfigError& e) {
            throw FieldError("quantiles", e.what());
        }
    }
};

inline inference::W0Policy parse_w0_policy(const json& v, const std::string& path) {
    const auto s = as_string(v, path);
    if (s == "last_observed") return inference::W0Policy::last_observed;
    if (s == "reference" || s == "r") return inference::W0Policy::reference_level;
    throw FieldError(path, "expected \"last_observed\" or \"reference\"");
}

inline const char* w0_policy_name(inference::W0Policy p) {
    return p == inference::W0Policy::last_observed ? "last_observed" : "reference";
}

inline inference::ChainSettings parse_chain(const json& j, inference::ChainSettings c, const std::string& path) {
    allow_keys(j, {"sweeps", "burn_in", "thin", "seed"}, path);
    if (auto* v = optional(j, "sweeps")) c.sweeps = as_count(*v, field_path(path, "sweeps"));
    if (auto* v = optional(j, "burn_in")) c.burn_in = as_count(*v, field_path(path, "burn_in"));
    if (auto* v = optional(j, "thin")) c.thin = as_count(*v, field_path(path, "thin"));
    if (auto* v = optional(j, "seed")) c.seed = as_count(*v, field_path(path, "seed"));
    if (c.thin == 0) throw FieldError(field_path(path, "thin"), "must be >= 1");
    if (c.burn_in > c.sweeps) throw FieldError(field_path(path, "burn_in"), "must not exceed sweeps");
    return c;
}

inline RunConfig parse_config(const json& j) {
    RunConfig cfg;
    allow_keys(j, {"constants", "grids", "precision_hyperprior", "chain", "collapse", "quantiles", "w0_policy"}, "");
    if (auto* s = optional(j, "constants")) {
        allow_keys(*s, {"k", "r"}, "constants");
        if (auto* v = optional(*s, "k")) cfg.consts.k = as_number(*v, "constants.k");
        if (auto* v = optional(*s, "r")) cfg.consts.r = as_number(*v, "constants.r");
    }
    if (auto* s = optional(j, "grids")) {
        allow_keys(*s, {"alpha", "gamma", "tau"}, "grids");
        if (auto* v = optional(*s, "alpha")) cfg.consts.alpha_grid = as_numbers(*v, "grids.alpha");
        if (auto* v = optional(*s, "gamma")) cfg.consts.gamma_grid = as_numbers(*v, "grids.gamma");
        if (auto* v = optional(*s, "tau")) cfg.consts.tau_grid = as_numbers(*v, "grids.tau");
    }
    if (auto* s = optional(j, "precision_hyperprior")) {
        allow_keys(*s, {"concentration", "a_grid", "b_grid"}, "precision_hyperprior");
        if (auto* v = optional(*s, "concentration"))
            cfg.hyper.concentration = as_number(*v, "precision_hyperprior.concentration");
        if (auto* v = optional(*s, "a_grid")) cfg.hyper.a_grid = as_numbers(*v, "precision_hyperprior.a_grid");
        if (auto* v = optional(*s, "b_grid")) cfg.hyper.b_grid = as_numbers(*v, "precision_hyperprior.b_grid");
    }
    if (auto* s = optional(j, "chain")) cfg.chain = parse_chain(*s, cfg.chain, "chain");
    if (auto* s = optional(j, "collapse")) {
        allow_keys(*s, {"mode", "draws"}, "collapse");
        if (auto* v = optional(*s, "mode")) {
            const auto m = as_string(*v, "collapse.mode");
            if (m == "closed_form")
                cfg.collapse_mode = inference::CollapseMode::closed_form;
            else if (m == "sampled")
                cfg.collapse_mode = inference::CollapseMode::sampled;
            else
                throw FieldError("collapse.mode", "expected \"closed_form\" or \"sampled\"");
        }
        if (auto* v = optional(*s, "draws")) cfg.collapse_draws = as_count(*v, "collapse.draws");
    }
    if (auto* v = optional(j, "quantiles")) cfg.quantiles = as_numbers(*v, "quantiles");
    if (auto* v = optional(j, "w0_policy")) cfg.w0_policy = parse_w0_policy(*v, "w0_policy");
    try {
        cfg.validate();
    } catch (const FieldError&) {
        throw;
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    return parse_config(parse_json(read_file(path), path.string()));
}

/// Explicit path, else $THERAMON_CONFIG, else built-in defaults.
inline RunConfig resolve_config(const std::optional<std::filesystem::path>& path) {
    if (path) return load_config(*path);
    if (const char* env = std::getenv(kConfigEnv); env && *env) return load_config(env);
    return {};
}

}  // namespace theramon::io
