#pragma once

// JSON encodings of model and inference values shared by the CLI and the
// HTTP service.

#include <string>
#include <vector>

#include "theramon/inference/case_update.hpp"
#include "theramon/inference/collapse.hpp"
#include "theramon/inference/diagnostics.hpp"
#include "theramon/inference/predict.hpp"
#include "theramon/io/json_fields.hpp"
#include "theramon/model/types.hpp"

namespace theramon::io {

inline json constants_to_json(const model::ModelConstants& c) {
    return {{"k", c.k},
            {"r", c.r},
            {"grids", {{"alpha", c.alpha_grid}, {"gamma", c.gamma_grid}, {"tau", c.tau_grid}}}};
}

inline model::ModelConstants constants_from_json(const json& j, const std::string& path) {
    allow_keys(j, {"k", "r", "grids"}, path);
    model::ModelConstants c;
    c.k = as_number(required(j, "k", path), field_path(path, "k"));
    c.r = as_number(required(j, "r", path), field_path(path, "r"));
    const auto gp = field_path(path, "grids");
    const auto& g = required(j, "grids", path);
    allow_keys(g, {"alpha", "gamma", "tau"}, gp);
    c.alpha_grid = as_numbers(required(g, "alpha", gp), field_path(gp, "alpha"));
    c.gamma_grid = as_numbers(required(g, "gamma", gp), field_path(gp, "gamma"));
    c.tau_grid = as_numbers(required(g, "tau", gp), field_path(gp, "tau"));
    try {
        c.validate();
    } catch (const ConfigError& e) {
        throw FieldError(path, e.what());
    }
    return c;
}

/// Cycle observation in log units:
/// {"cycle_index", "dose_std", "t0", "w0", "times": [...], "wbc_log": [...]}
inline model::CycleObservation cycle_from_json(const json& j, const std::string& path) {
    allow_keys(j, {"cycle_index", "dose_std", "t0", "w0", "times", "wbc_log"}, path);
    model::CycleObservation c;
    const auto ci = as_count(required(j, "cycle_index", path), field_path(path, "cycle_index"));
    if (ci < 1) throw FieldError(field_path(path, "cycle_index"), "must be >= 1");
    c.cycle_index = static_cast<int>(ci);
    c.dose_std = as_number(required(j, "dose_std", path), field_path(path, "dose_std"));
    if (c.dose_std < 0.0) throw FieldError(field_path(path, "dose_std"), "must be >= 0");
    if (auto* v = optional(j, "t0")) c.t0 = as_number(*v, field_path(path, "t0"));
    c.w0 = as_number(required(j, "w0", path), field_path(path, "w0"));
    c.times = as_numbers(required(j, "times", path), field_path(path, "times"));
    c.wbc_log = as_numbers(required(j, "wbc_log", path), field_path(path, "wbc_log"));
    if (c.times.size() != c.wbc_log.size()) throw FieldError(field_path(path, "wbc_log"), "length differs from times");
    for (std::size_t k = 0; k < c.times.size(); ++k) {
        if (!(c.times[k] > 0.0)) throw FieldError(index_path(field_path(path, "times"), k), "must be > 0");
        if (k > 0 && !(c.times[k] > c.times[k - 1]))
            throw FieldError(index_path(field_path(path, "times"), k), "times must be strictly increasing");
    }
    return c;
}

inline json cycle_to_json(const model::CycleObservation& c) {
    return {{"cycle_index", c.cycle_index}, {"dose_std", c.dose_std}, {"t0", c.t0},
            {"w0", c.w0},                   {"times", c.times},       {"wbc_log", c.wbc_log}};
}

/// {"cycles": [{"cycle_index": 3, "dose_std": 10, "offsets": [...]}, ...]}
inline inference::DosePlan plan_from_json(const json& j, const std::string& path) {
    require_object(j, path);
    const auto cp = field_path(path, "cycles");
    const auto& arr = required(j, "cycles", path);
    if (!arr.is_array()) throw FieldError(cp, "expected an array");
    inference::DosePlan plan;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const auto p = index_path(cp, i);
        allow_keys(arr[i], {"cycle_index", "dose_std", "offsets"}, p);
        inference::PlannedCycle c;
        c.cycle_index = static_cast<int>(as_count(required(arr[i], "cycle_index", p), field_path(p, "cycle_index")));
        c.dose_std = as_number(required(arr[i], "dose_std", p), field_path(p, "dose_std"));
        c.offsets = as_numbers(required(arr[i], "offsets", p), field_path(p, "offsets"));
        plan.cycles.push_back(std::move(c));
    }
    return plan;
}

inline json plan_to_json(const inference::DosePlan& plan) {
    json cycles = json::array();
    for (const auto& c : plan.cycles)
        cycles.push_back({{"cycle_index", c.cycle_index}, {"dose_std", c.dose_std}, {"offsets", c.offsets}});
    return {{"cycles", cycles}};
}

inline json prior_to_json(const inference::CasePrior& p) {
    return {{"format", "theramon-prior"},
            {"version", 1},
            {"pmf_alpha", p.pmf_alpha},
            {"pmf_gamma", p.pmf_gamma},
            {"pmf_tau", p.pmf_tau},
            {"a", p.a},
            {"b", p.b},
            {"draws_used", p.draws_used},
            {"digest", p.db_digest},
            {"constants", constants_to_json(p.consts)}};
}

inline inference::CasePrior prior_from_json(const json& j, const std::string& path) {
    allow_keys(j, {"format", "version", "pmf_alpha", "pmf_gamma", "pmf_tau", "a", "b", "draws_used", "digest",
                   "constants"},
               path);
    if (as_string(required(j, "format", path), field_path(path, "format")) != "theramon-prior")
        throw ParseError("not a case prior");
    if (as_count(required(j, "version", path), field_path(path, "version")) != 1)
        throw VersionError("unsupported case prior version");
    inference::CasePrior p;
    p.pmf_alpha = as_numbers(required(j, "pmf_alpha", path), field_path(path, "pmf_alpha"));
    p.pmf_gamma = as_numbers(required(j, "pmf_gamma", path), field_path(path, "pmf_gamma"));
    p.pmf_tau = as_numbers(required(j, "pmf_tau", path), field_path(path, "pmf_tau"));
    p.a = as_number(required(j, "a", path), field_path(path, "a"));
    p.b = as_number(required(j, "b", path), field_path(path, "b"));
    p.draws_used = as_count(required(j, "draws_used", path), field_path(path, "draws_used"));
    p.db_digest = as_string(required(j, "digest", path), field_path(path, "digest"));
    p.consts = constants_from_json(required(j, "constants", path), field_path(path, "constants"));
    p.validate();
    return p;
}

inline json marginals_to_json(const std::vector<double>& pa, const std::vector<double>& pg,
                              const std::vector<double>& pt, const model::ModelConstants& c) {
    auto one = [](const std::vector<double>& grid, const std::vector<double>& pmf) {
        return json{{"levels", grid}, {"pmf", pmf}};
    };
    return {{"alpha", one(c.alpha_grid, pa)}, {"gamma", one(c.gamma_grid, pg)}, {"tau", one(c.tau_grid, pt)}};
}

inline json diagnostics_summary(const inference::TraceReport& rep) {
    json out{{"available", rep.available}};
    if (!rep.available) {
        out["note"] = rep.note;
        return out;
    }
    json cols = json::object();
    for (const auto& c : rep.columns) {
        json col{{"mean", c.mean}, {"sd", c.sd}, {"stationary", c.stationary}, {"half_gap", c.half_gap}};
        if (c.acf && !c.acf->empty())
            col["lag1_autocorrelation"] = c.acf->front();
        else
            col["lag1_autocorrelation"] = nullptr;
        cols[c.name] = col;
    }
    out["columns"] = cols;
    return out;
}

inline json bands_to_json(const inference::PredictiveCloud& cloud) {
    json rows = json::array();
    for (const auto& b : cloud.bands) rows.push_back({{"cycle_index", b.cycle_index}, {"t", b.t}, {"quantiles", b.quantiles}});
    return {{"levels", cloud.levels}, {"rows", rows}};
}

}  // namespace theramon::io
