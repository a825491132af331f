#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "theramon/errors.hpp"
#include "theramon/graph/gibbs.hpp"
#include "theramon/graph/sample_store.hpp"
#include "theramon/model/builders.hpp"
#include "theramon/model/types.hpp"
#include "theramon/rng.hpp"

namespace theramon::inference {

/// Chain length, burn-in, thinning and seed. Defaults: 500 sweeps, the
/// first 100 discarded, then one draw in five kept (80 draws).
struct ChainSettings {
    std::size_t sweeps = 500;
    std::size_t burn_in = 100;
    std::size_t thin = 5;
    std::uint64_t seed = 1;

    graph::ChainConfig to_config(std::vector<graph::NodeId> monitored) const {
        return {sweeps, burn_in, thin, seed, std::move(monitored), {}};
    }

    bool operator==(const ChainSettings&) const = default;
};

/// Content digest (FNV-1a 64, hex) of a patient database; stable across
/// row order within the input file because records are canonicalized.
inline std::string database_digest(const std::vector<model::PatientRecord>& db) {
    std::uint64_t h = fnv1a64("theramon-db");
    char buf[64];
    auto mix = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g;", v);
        h = fnv1a64(buf, h);
    };
    for (const auto& r : db) {
        h = fnv1a64(r.patient_id + "|", h);
        for (const auto& c : r.cycles) {
            mix(c.cycle_index);
            mix(c.dose_std);
            mix(c.t0);
            mix(c.w0);
            for (std::size_t k = 0; k < c.size(); ++k) {
                mix(c.times[k]);
                mix(c.wbc_log[k]);
            }
        }
    }
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Posterior draws of the hyperparameters given a patient database.
struct PopulationPosterior {
    std::vector<model::Hyperparams> draws;
    graph::SampleStore store;
    ChainSettings chain;
    std::string db_digest;
    model::ModelConstants consts;
    model::HyperpriorConfig hyper;

    /// Posterior mean of a level pmf ("alpha", "gamma" or "tau").
    std::vector<double> mean_pmf(const std::string& which) const {
        std::vector<double> out;
        for (const auto& d : draws) {
            const auto& p = which == "alpha" ? d.pi_alpha : which == "gamma" ? d.pi_gamma : d.pi_tau;
            if (out.empty()) out.assign(p.size(), 0.0);
            for (std::size_t k = 0; k < p.size(); ++k) out[k] += p[k];
        }
        for (auto& v : out) v /= static_cast<double>(draws.size());
        return out;
    }
};

inline const std::vector<graph::NodeId>& hyper_nodes() {
    static const std::vector<graph::NodeId> ids{model::ids::pi_alpha, model::ids::pi_gamma, model::ids::pi_tau,
                                                model::ids::a, model::ids::b};
    return ids;
}

/// Rebuilds typed hyperparameter draws from store rows.
inline std::vector<model::Hyperparams> hyperparams_from_store(const graph::SampleStore& store,
                                                              const model::ModelConstants& consts) {
    auto cols = [&](const std::string& id, std::size_t n) {
        std::vector<std::size_t> idx;
        for (std::size_t k = 1; k <= n; ++k) idx.push_back(store.column_index(id + "." + std::to_string(k)));
        return idx;
    };
    const auto ca = cols(model::ids::pi_alpha, consts.alpha_grid.size());
    const auto cg = cols(model::ids::pi_gamma, consts.gamma_grid.size());
    const auto ct = cols(model::ids::pi_tau, consts.tau_grid.size());
    const auto ia = store.column_index(model::ids::a);
    const auto ib = store.column_index(model::ids::b);
    std::vector<model::Hyperparams> out;
    out.reserve(store.size());
    for (const auto& row : store.rows()) {
        model::Hyperparams h;
        for (auto c : ca) h.pi_alpha.push_back(row[c]);
        for (auto c : cg) h.pi_gamma.push_back(row[c]);
        for (auto c : ct) h.pi_tau.push_back(row[c]);
        h.a = row[ia];
        h.b = row[ib];
        out.push_back(std::move(h));
    }
    return out;
}

/// Gibbs sampling on the population network under vague hyperpriors,
/// monitoring the hyperparameter layer.
inline PopulationPosterior population_update(const std::vector<model::PatientRecord>& db,
                                             const model::ModelConstants& consts,
                                             const model::HyperpriorConfig& hyper, const ChainSettings& chain) {
    if (db.empty()) throw DataError("population update needs a non-empty patient database");
    auto net = model::build_population_network(db, hyper, consts);
    PopulationPosterior pop;
    pop.store = graph::run_chain(std::move(net), chain.to_config(hyper_nodes()));
    if (pop.store.empty()) throw ConfigError("chain settings retain no draws");
    pop.draws = hyperparams_from_store(pop.store, consts);
    pop.chain = chain;
    pop.db_digest = database_digest(db);
    pop.consts = consts;
    pop.hyper = hyper;
    return pop;
}

}  // namespace theramon::inference
