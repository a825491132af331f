#pragma once

// Network builders for the chemotherapy toxicity model.
//
// Layers, top to bottom:
//   hyperparameters    pi_alpha, pi_gamma, pi_tau (Dirichlet), a, b (uniform grids)
//   response params    alpha[i], gamma[i], tau[i] (Categorical), precision[i] (Gamma(a, b))
//   per cycle          lambda[i,j] = k dose alpha, omega[i,j] = w0 - lambda tau (deterministic)
//   observations       w[i,j,k] ~ Normal(mean(t_k; lambda, omega, gamma, tau), 1/precision)
// Dose, w0 and measurement times enter as per-replicate constants. With a
// FixedPrior the hyperparameter layer is replaced by constants.

#include <functional>
#include <memory>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "theramon/errors.hpp"
#include "theramon/graph/network.hpp"
#include "theramon/graph/plate.hpp"
#include "theramon/model/profile.hpp"
#include "theramon/model/types.hpp"

namespace theramon::model {

using ResponsePrior = std::variant<HyperpriorConfig, FixedPrior>;

namespace ids {
inline const std::string pi_alpha = "pi_alpha";
inline const std::string pi_gamma = "pi_gamma";
inline const std::string pi_tau = "pi_tau";
inline const std::string a = "a";
inline const std::string b = "b";

inline std::string alpha(std::size_t i) { return graph::expanded_id("alpha", {i}); }
inline std::string gamma(std::size_t i) { return graph::expanded_id("gamma", {i}); }
inline std::string tau(std::size_t i) { return graph::expanded_id("tau", {i}); }
inline std::string precision(std::size_t i) { return graph::expanded_id("precision", {i}); }
inline std::string lambda(std::size_t i, std::size_t j) { return graph::expanded_id("lambda", {i, j}); }
inline std::string omega(std::size_t i, std::size_t j) { return graph::expanded_id("omega", {i, j}); }
inline std::string w(std::size_t i, std::size_t j, std::size_t k) { return graph::expanded_id("w", {i, j, k}); }
}  // namespace ids

/// Per-replicate context values (1-based patient, cycle, observation).
struct ChemoContext {
    std::function<double(std::size_t, std::size_t)> dose;
    std::function<double(std::size_t, std::size_t)> w0;
    std::function<double(std::size_t, std::size_t, std::size_t)> time;
    std::function<double(std::size_t, std::size_t, std::size_t)> wbc;
};

inline std::vector<double> normalized(std::vector<double> p) {
    double s = 0.0;
    for (double v : p) s += v;
    for (auto& v : p) v /= s;
    return p;
}

namespace detail {
inline std::size_t at(const graph::IndexTuple& t, const char* name) { return t.at(name); }
}  // namespace detail

/// The chemotherapy plate template over indices "patient", "cycle", "obs".
inline graph::PlateTemplate chemo_template(const ResponsePrior& prior, const ModelConstants& consts,
                                           ChemoContext ctx) {
    using namespace graph::plate;
    using graph::Family;
    consts.validate();
    using detail::at;
    graph::PlateTemplate tpl;
    tpl.functions.define("wbc_slope", &fn::slope);
    tpl.functions.define("wbc_nadir", &fn::nadir);
    tpl.functions.define("log_wbc_mean", &fn::mean);

    const std::vector<std::string> patient{"patient"};
    const std::vector<std::string> cycle{"patient", "cycle"};

    if (const auto* hp = std::get_if<HyperpriorConfig>(&prior)) {
        hp->validate();
        auto conc = [&](std::size_t n) { return Const{std::vector<double>(n, hp->concentration)}; };
        tpl.stochastic(ids::pi_alpha, {}, Family::dirichlet, {conc(consts.alpha_grid.size())});
        tpl.stochastic(ids::pi_gamma, {}, Family::dirichlet, {conc(consts.gamma_grid.size())});
        tpl.stochastic(ids::pi_tau, {}, Family::dirichlet, {conc(consts.tau_grid.size())});
        tpl.stochastic(ids::a, {}, Family::discrete_uniform_grid, {Const{hp->a_grid}});
        tpl.stochastic(ids::b, {}, Family::discrete_uniform_grid, {Const{hp->b_grid}});
        tpl.stochastic("alpha", patient, Family::categorical, {Parent{ids::pi_alpha}, Const{consts.alpha_grid}});
        tpl.stochastic("gamma", patient, Family::categorical, {Parent{ids::pi_gamma}, Const{consts.gamma_grid}});
        tpl.stochastic("tau", patient, Family::categorical, {Parent{ids::pi_tau}, Const{consts.tau_grid}});
        tpl.stochastic("precision", patient, Family::gamma, {Parent{ids::a}, Parent{ids::b}});
    } else {
        const auto& fp = std::get<FixedPrior>(prior);
        fp.validate(consts);
        tpl.stochastic("alpha", patient, Family::categorical,
                       {Const{normalized(fp.pmf_alpha)}, Const{consts.alpha_grid}});
        tpl.stochastic("gamma", patient, Family::categorical,
                       {Const{normalized(fp.pmf_gamma)}, Const{consts.gamma_grid}});
        tpl.stochastic("tau", patient, Family::categorical, {Const{normalized(fp.pmf_tau)}, Const{consts.tau_grid}});
        tpl.stochastic("precision", patient, Family::gamma, {Const{{fp.a}}, Const{{fp.b}}});
    }

    tpl.deterministic("lambda", cycle, "wbc_slope", {"alpha"}, {consts.k},
                      [ctx](const graph::IndexTuple& t) {
                          return std::vector<double>{ctx.dose(at(t, "patient"), at(t, "cycle"))};
                      });
    tpl.deterministic("omega", cycle, "wbc_nadir", {"lambda", "tau"}, {}, [ctx](const graph::IndexTuple& t) {
        return std::vector<double>{ctx.w0(at(t, "patient"), at(t, "cycle"))};
    });
    const double r = consts.r;
    tpl.observed("w", {"patient", "cycle", "obs"}, Family::normal,
                 {Fn{"log_wbc_mean", {"lambda", "omega", "gamma", "tau"}, {},
                     [ctx, r](const graph::IndexTuple& t) {
                         const auto i = at(t, "patient"), j = at(t, "cycle"), k = at(t, "obs");
                         return std::vector<double>{ctx.time(i, j, k), ctx.w0(i, j), r};
                     }},
                  Fn{"reciprocal", {"precision"}, {}, {}}},
                 [ctx](const graph::IndexTuple& t) -> graph::Value {
                     return ctx.wbc(at(t, "patient"), at(t, "cycle"), at(t, "obs"));
                 });
    return tpl;
}

/// Context and ragged index ranges read from patient records.
inline ChemoContext record_context(std::shared_ptr<const std::vector<PatientRecord>> records) {
    auto cyc = [records](std::size_t i, std::size_t j) -> const CycleObservation& {
        return (*records)[i - 1].cycles[j - 1];
    };
    return {
        [cyc](std::size_t i, std::size_t j) { return cyc(i, j).dose_std; },
        [cyc](std::size_t i, std::size_t j) { return cyc(i, j).w0; },
        [cyc](std::size_t i, std::size_t j, std::size_t k) { return cyc(i, j).times[k - 1]; },
        [cyc](std::size_t i, std::size_t j, std::size_t k) { return cyc(i, j).wbc_log[k - 1]; },
    };
}

inline std::vector<graph::IndexRange> record_ranges(std::shared_ptr<const std::vector<PatientRecord>> records) {
    using graph::IndexRange;
    return {
        IndexRange::fixed("patient", records->size()),
        IndexRange::ragged("cycle", [records](const graph::IndexTuple& t) {
            return (*records)[t.at("patient") - 1].cycles.size();
        }),
        IndexRange::ragged("obs", [records](const graph::IndexTuple& t) {
            return (*records)[t.at("patient") - 1].cycles[t.at("cycle") - 1].size();
        }),
    };
}

/// Closed-form node count: 5 hyperparameter nodes (when attached) plus, per
/// patient, 4 response nodes and, per cycle, 2 deterministic nodes and one
/// node per observation.
inline std::size_t expected_node_count(const std::vector<PatientRecord>& records, bool hyperpriors) {
    std::size_t n = hyperpriors ? 5 : 0;
    for (const auto& r : records) {
        n += 4;
        for (const auto& c : r.cycles) n += 2 + c.size();
    }
    return n;
}

namespace detail {

inline graph::Network build_from_records(std::vector<PatientRecord> records, const ResponsePrior& prior,
                                         const ModelConstants& consts) {
    std::set<std::string> seen;
    for (const auto& r : records) {
        r.validate();
        if (!seen.insert(r.patient_id).second)
            throw StructuralError("duplicate patient id '" + r.patient_id + "'");
    }
    auto shared = std::make_shared<const std::vector<PatientRecord>>(std::move(records));
    return graph::expand_plates(chemo_template(prior, consts, record_context(shared)), record_ranges(shared));
}

}  // namespace detail

/// Network for one patient. A cycle without observations contributes only
/// its two deterministic nodes.
inline graph::Network build_patient_network(const PatientRecord& record, const ResponsePrior& prior,
                                            const ModelConstants& consts) {
    return detail::build_from_records({record}, prior, consts);
}

/// Shared hyperparameter layer over per-patient response layers; patients
/// are conditionally independent given the hyperparameters.
inline graph::Network build_population_network(const std::vector<PatientRecord>& records,
                                               const HyperpriorConfig& hyper, const ModelConstants& consts) {
    if (records.empty()) throw ContractError("population network needs at least one patient record");
    return detail::build_from_records(records, hyper, consts);
}

}  // namespace theramon::model
