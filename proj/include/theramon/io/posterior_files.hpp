#pragma once

// Posterior and prior artifacts. Posteriors are sample files whose metadata
// carries enough to rebuild the typed value; the case prior is JSON.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "theramon/errors.hpp"
#include "theramon/inference/case_update.hpp"
#include "theramon/inference/collapse.hpp"
#include "theramon/inference/population.hpp"
#include "theramon/io/json_codec.hpp"
#include "theramon/io/samples_file.hpp"
#include "theramon/io/text.hpp"

namespace theramon::io {

namespace detail {

using Meta = std::map<std::string, std::string>;

inline const std::string& need(const graph::SampleStore& s, const std::string& key) {
    auto it = s.metadata().find(key);
    if (it == s.metadata().end()) throw ParseError("samples metadata lacks '" + key + "'");
    return it->second;
}

inline double need_double(const graph::SampleStore& s, const std::string& key) {
    auto v = parse_double(need(s, key));
    if (!v) throw ParseError("samples metadata '" + key + "' is not a number");
    return *v;
}

inline void put_constants(Meta& m, const model::ModelConstants& c) {
    m["const.k"] = format_double(c.k);
    m["const.r"] = format_double(c.r);
    m["grid.alpha"] = join_doubles(c.alpha_grid);
    m["grid.gamma"] = join_doubles(c.gamma_grid);
    m["grid.tau"] = join_doubles(c.tau_grid);
}

inline model::ModelConstants get_constants(const graph::SampleStore& s) {
    model::ModelConstants c;
    c.k = need_double(s, "const.k");
    c.r = need_double(s, "const.r");
    c.alpha_grid = split_doubles(need(s, "grid.alpha"), "grid.alpha");
    c.gamma_grid = split_doubles(need(s, "grid.gamma"), "grid.gamma");
    c.tau_grid = split_doubles(need(s, "grid.tau"), "grid.tau");
    c.validate();
    return c;
}

inline void expect_kind(const graph::SampleStore& s, const std::string& kind, const std::string& source) {
    const auto k = s.meta("kind");
    if (k != kind) throw DataError(source + ": expected a " + kind + " posterior, found '" + k + "'");
}

inline inference::ChainSettings chain_of(const graph::SampleStore& s) {
    return {s.sweep_count(), s.burn_in(), s.thin(), s.seed()};
}

}  // namespace detail

/// Warns loudly when a stored artifact was produced from another database.
inline void check_digest(const std::string& stored, const std::optional<std::string>& expected,
                         const WarningSink& sink, const std::string& source) {
    if (expected && stored != *expected)
        warn(sink, "WARNING: " + source + " was computed from database digest " + stored +
                       " but the current database has digest " + *expected + "; continuing");
}

inline graph::SampleStore population_store(const inference::PopulationPosterior& pop) {
    auto s = pop.store;
    auto& m = s.metadata();
    m["kind"] = "population";
    m["digest"] = pop.db_digest;
    m["hyper.concentration"] = format_double(pop.hyper.concentration);
    m["hyper.a_grid"] = join_doubles(pop.hyper.a_grid);
    m["hyper.b_grid"] = join_doubles(pop.hyper.b_grid);
    detail::put_constants(m, pop.consts);
    return s;
}

inline inference::PopulationPosterior population_from_store(graph::SampleStore s, const std::string& source) {
    detail::expect_kind(s, "population", source);
    inference::PopulationPosterior pop;
    pop.consts = detail::get_constants(s);
    pop.hyper.concentration = detail::need_double(s, "hyper.concentration");
    pop.hyper.a_grid = split_doubles(detail::need(s, "hyper.a_grid"), "hyper.a_grid");
    pop.hyper.b_grid = split_doubles(detail::need(s, "hyper.b_grid"), "hyper.b_grid");
    pop.db_digest = detail::need(s, "digest");
    pop.chain = detail::chain_of(s);
    pop.draws = inference::hyperparams_from_store(s, pop.consts);
    if (pop.draws.empty()) throw DataError(source + ": population posterior has no draws");
    pop.store = std::move(s);
    return pop;
}

inline void save_population(const inference::PopulationPosterior& pop, const std::filesystem::path& path) {
    save_samples(population_store(pop), path);
}

inline inference::PopulationPosterior load_population(const std::filesystem::path& path,
                                                      const std::optional<std::string>& expected_digest = {},
                                                      const WarningSink& sink = {}) {
    auto pop = population_from_store(load_samples(path), path.string());
    check_digest(pop.db_digest, expected_digest, sink, path.string());
    return pop;
}

inline graph::SampleStore case_store(const inference::CasePosterior& post) {
    auto s = post.store;
    auto& m = s.metadata();
    m["kind"] = "case";
    m["patient"] = post.patient_id;
    std::vector<double> win(post.window.begin(), post.window.end());
    m["window"] = join_doubles(win);
    m["last_w0"] = post.last_w0 ? format_double(*post.last_w0) : "none";
    m["from_prior"] = post.from_prior ? "1" : "0";
    m["digest"] = post.prior.db_digest;
    m["prior.pmf_alpha"] = join_doubles(post.prior.pmf_alpha);
    m["prior.pmf_gamma"] = join_doubles(post.prior.pmf_gamma);
    m["prior.pmf_tau"] = join_doubles(post.prior.pmf_tau);
    m["prior.a"] = format_double(post.prior.a);
    m["prior.b"] = format_double(post.prior.b);
    m["prior.draws_used"] = std::to_string(post.prior.draws_used);
    detail::put_constants(m, post.prior.consts);
    return s;
}

inline inference::CasePosterior case_from_store(graph::SampleStore s, const std::string& source) {
    detail::expect_kind(s, "case", source);
    inference::CasePosterior post;
    post.patient_id = detail::need(s, "patient");
    for (double w : split_doubles(detail::need(s, "window"), "window")) post.window.push_back(static_cast<int>(w));
    if (const auto& lw = detail::need(s, "last_w0"); lw != "none") post.last_w0 = detail::need_double(s, "last_w0");
    post.from_prior = detail::need(s, "from_prior") == "1";
    auto& pr = post.prior;
    pr.consts = detail::get_constants(s);
    pr.db_digest = detail::need(s, "digest");
    pr.pmf_alpha = split_doubles(detail::need(s, "prior.pmf_alpha"), "prior.pmf_alpha");
    pr.pmf_gamma = split_doubles(detail::need(s, "prior.pmf_gamma"), "prior.pmf_gamma");
    pr.pmf_tau = split_doubles(detail::need(s, "prior.pmf_tau"), "prior.pmf_tau");
    pr.a = detail::need_double(s, "prior.a");
    pr.b = detail::need_double(s, "prior.b");
    pr.draws_used = static_cast<std::size_t>(detail::need_double(s, "prior.draws_used"));
    pr.validate();
    post.draws = inference::detail::params_from_store(s);
    if (post.from_prior) {
        post.pmf_alpha = pr.pmf_alpha;
        post.pmf_gamma = pr.pmf_gamma;
        post.pmf_tau = pr.pmf_tau;
    } else {
        post.pmf_alpha = inference::level_frequencies(s.column("alpha"), pr.consts.alpha_grid);
        post.pmf_gamma = inference::level_frequencies(s.column("gamma"), pr.consts.gamma_grid);
        post.pmf_tau = inference::level_frequencies(s.column("tau"), pr.consts.tau_grid);
    }
    post.store = std::move(s);
    return post;
}

inline void save_case_posterior(const inference::CasePosterior& post, const std::filesystem::path& path) {
    save_samples(case_store(post), path);
}

inline inference::CasePosterior load_case_posterior(const std::filesystem::path& path) {
    return case_from_store(load_samples(path), path.string());
}

inline void save_case_prior(const inference::CasePrior& p, const std::filesystem::path& path) {
    write_file_atomic(path, prior_to_json(p).dump(2) + "\n");
}

inline inference::CasePrior load_case_prior(const std::filesystem::path& path) {
    const auto j = parse_json(read_file(path), path.string());
    try {
        return prior_from_json(j, "");
    } catch (const VersionError& e) {
        throw VersionError(path.string() + ": " + e.what());
    } catch (const InputError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

}  // namespace theramon::io
