#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "theramon/errors.hpp"
#include "theramon/graph/dist.hpp"
#include "theramon/graph/gibbs.hpp"
#include "theramon/inference/collapse.hpp"
#include "theramon/inference/population.hpp"
#include "theramon/model/builders.hpp"
#include "theramon/model/types.hpp"
#include "theramon/rng.hpp"

namespace theramon::inference {

/// Posterior of one patient's response parameters given cycles 1..j.
struct CasePosterior {
    std::string patient_id;
    std::vector<model::ResponseParams> draws;
    std::vector<double> pmf_alpha;
    std::vector<double> pmf_gamma;
    std::vector<double> pmf_tau;
    std::vector<int> window;        // cycle indices conditioned on
    std::optional<double> last_w0;  // w0 of the last conditioned cycle
    bool from_prior = false;        // no observations: draws are prior draws
    CasePrior prior;
    graph::SampleStore store;

    int last_cycle() const { return window.empty() ? 0 : window.back(); }
};

inline const std::vector<std::string>& case_columns() {
    static const std::vector<std::string> cols{"alpha", "gamma", "tau", "precision"};
    return cols;
}

/// Frequencies of the grid levels among the values.
inline std::vector<double> level_frequencies(const std::vector<double>& values, const std::vector<double>& grid) {
    std::vector<double> f(grid.size(), 0.0);
    if (values.empty()) return f;
    for (double v : values) {
        const auto i = graph::level_index(grid, v);
        if (i >= grid.size()) throw NumericError("draw off the level grid");
        f[i] += 1.0;
    }
    for (auto& x : f) x /= static_cast<double>(values.size());
    return f;
}

namespace detail {

inline std::vector<model::ResponseParams> params_from_store(const graph::SampleStore& s) {
    const auto ia = s.column_index("alpha"), ig = s.column_index("gamma"), it = s.column_index("tau"),
               ip = s.column_index("precision");
    std::vector<model::ResponseParams> out;
    out.reserve(s.size());
    for (const auto& r : s.rows()) {
        if (!(r[ip] > 0.0)) throw NumericError("nonpositive precision draw");
        out.push_back({r[ia], r[ig], r[it], 1.0 / std::sqrt(r[ip])});
    }
    return out;
}

inline graph::SampleStore prior_store(const CasePrior& prior, const ChainSettings& chain) {
    graph::SampleStore s(case_columns(), chain.burn_in, chain.thin, chain.seed);
    const std::size_t n = graph::SampleStore::retained_count(chain.sweeps, chain.burn_in, chain.thin);
    auto rng = Rng::derive(chain.seed, "case-prior");
    const auto& c = prior.consts;
    for (std::size_t m = 0; m < n; ++m) {
        const double al = c.alpha_grid[sample_level(prior.pmf_alpha, rng)];
        const double ga = c.gamma_grid[sample_level(prior.pmf_gamma, rng)];
        const double ta = c.tau_grid[sample_level(prior.pmf_tau, rng)];
        s.append({al, ga, ta, rng.gamma(prior.a, prior.b)});
    }
    s.finalize(chain.sweeps);
    return s;
}

}  // namespace detail

/// Conditions the case prior on a record prefix. The record is expected to
/// hold cycles 1..j only; use PatientRecord::prefix to cut it.
inline CasePosterior case_update(const CasePrior& prior, const model::PatientRecord& record,
                                 const ChainSettings& chain) {
    prior.validate();
    record.validate();
    CasePosterior post;
    post.patient_id = record.patient_id;
    post.prior = prior;
    for (const auto& c : record.cycles) post.window.push_back(c.cycle_index);
    if (!record.cycles.empty()) post.last_w0 = record.cycles.back().w0;

    if (record.observation_count() == 0) {
        post.from_prior = true;
        post.store = detail::prior_store(prior, chain);
        post.draws = detail::params_from_store(post.store);
        post.pmf_alpha = prior.pmf_alpha;
        post.pmf_gamma = prior.pmf_gamma;
        post.pmf_tau = prior.pmf_tau;
        return post;
    }

    auto net = model::build_patient_network(record, prior.as_fixed_prior(), prior.consts);
    const std::vector<graph::NodeId> monitored{model::ids::alpha(1), model::ids::gamma(1), model::ids::tau(1),
                                               model::ids::precision(1)};
    auto raw = graph::run_chain(std::move(net), chain.to_config(monitored));
    if (raw.empty()) throw ConfigError("chain settings retain no draws");

    // Rename the expanded ids to patient-agnostic column names.
    graph::SampleStore s(case_columns(), raw.burn_in(), raw.thin(), raw.seed());
    for (const auto& r : raw.rows()) s.append(r);
    s.finalize(raw.sweep_count());
    post.store = std::move(s);
    post.draws = detail::params_from_store(post.store);

    const auto& c = prior.consts;
    post.pmf_alpha = level_frequencies(post.store.column("alpha"), c.alpha_grid);
    post.pmf_gamma = level_frequencies(post.store.column("gamma"), c.gamma_grid);
    post.pmf_tau = level_frequencies(post.store.column("tau"), c.tau_grid);
    return post;
}

}  // namespace theramon::inference
