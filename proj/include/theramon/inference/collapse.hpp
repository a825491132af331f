#pragma once

// Prior for a new case from the population posterior: a mixture of the
// response-parameter distributions over the stored hyperparameter draws.

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "theramon/errors.hpp"
#include "theramon/inference/population.hpp"
#include "theramon/model/types.hpp"
#include "theramon/rng.hpp"

namespace theramon::inference {

struct CasePrior {
    std::vector<double> pmf_alpha;
    std::vector<double> pmf_gamma;
    std::vector<double> pmf_tau;
    double a = 1.0;  // precision prior Gamma(a, b)
    double b = 1.0;
    std::size_t draws_used = 0;
    model::ModelConstants consts;
    std::string db_digest;

    model::FixedPrior as_fixed_prior() const { return {pmf_alpha, pmf_gamma, pmf_tau, a, b}; }

    void validate() const { as_fixed_prior().validate(consts); }
};

enum class CollapseMode {
    closed_form,  // average of the pmfs of all stored draws
    sampled,      // draw pi uniformly from the store, then theta ~ p(theta | pi), L times
};

/// Most frequent (a, b) pair among the draws; ties go to the smallest pair.
inline std::pair<double, double> precision_prior_mode(const std::vector<model::Hyperparams>& draws) {
    std::map<std::pair<double, double>, std::size_t> freq;
    for (const auto& d : draws) ++freq[{d.a, d.b}];
    std::pair<double, double> best{};
    std::size_t most = 0;
    for (const auto& [ab, n] : freq)
        if (n > most) {
            most = n;
            best = ab;
        }
    return best;
}

inline std::size_t sample_level(const std::vector<double>& pmf, Rng& rng) {
    double u = rng.uniform();
    for (std::size_t k = 0; k < pmf.size(); ++k) {
        if (u < pmf[k]) return k;
        u -= pmf[k];
    }
    for (std::size_t k = pmf.size(); k-- > 0;)
        if (pmf[k] > 0.0) return k;
    return pmf.size() - 1;
}

/// Covariates are accepted for interface completeness; the toxicity model
/// has no covariate term, so they do not change the result.
inline CasePrior collapse(const PopulationPosterior& pop,
                          const std::vector<std::pair<std::string, std::string>>& /*covariates*/, std::size_t count,
                          CollapseMode mode, Rng& rng) {
    if (count == 0) throw ConfigError("collapse needs L >= 1");
    if (pop.draws.empty()) throw ContractError("population posterior has no draws");
    CasePrior prior;
    prior.consts = pop.consts;
    prior.db_digest = pop.db_digest;
    std::tie(prior.a, prior.b) = precision_prior_mode(pop.draws);
    prior.pmf_alpha.assign(pop.consts.alpha_grid.size(), 0.0);
    prior.pmf_gamma.assign(pop.consts.gamma_grid.size(), 0.0);
    prior.pmf_tau.assign(pop.consts.tau_grid.size(), 0.0);

    if (mode == CollapseMode::closed_form) {
        const double w = 1.0 / static_cast<double>(pop.draws.size());
        for (const auto& d : pop.draws)
            for (std::size_t k = 0; k < 3; ++k) {
                if (k < d.pi_alpha.size()) prior.pmf_alpha[k] += w * d.pi_alpha[k];
                if (k < d.pi_gamma.size()) prior.pmf_gamma[k] += w * d.pi_gamma[k];
                if (k < d.pi_tau.size()) prior.pmf_tau[k] += w * d.pi_tau[k];
            }
        prior.draws_used = pop.draws.size();
    } else {
        const double w = 1.0 / static_cast<double>(count);
        for (std::size_t l = 0; l < count; ++l) {
            const auto& d = pop.draws[rng.index(pop.draws.size())];
            prior.pmf_alpha[sample_level(d.pi_alpha, rng)] += w;
            prior.pmf_gamma[sample_level(d.pi_gamma, rng)] += w;
            prior.pmf_tau[sample_level(d.pi_tau, rng)] += w;
        }
        prior.draws_used = count;
    }
    for (auto* p : {&prior.pmf_alpha, &prior.pmf_gamma, &prior.pmf_tau}) *p = model::normalized(*p);
    return prior;
}

}  // namespace theramon::inference
