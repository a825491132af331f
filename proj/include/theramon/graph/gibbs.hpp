#pragma once

// Single-site Gibbs sampling over a Network.
//
// Every unobserved stochastic node is resampled from its exact full
// conditional. Supported cases:
//   - Categorical / DiscreteUniformGrid nodes: enumeration over the grid;
//   - Dirichlet with Categorical children (pmf slot bound to it): conjugate;
//   - Gamma precision whose children are Normal with variance = reciprocal(node): conjugate;
//   - Normal whose children are Normal with mean = node: conjugate;
//   - any node without children: prior sampling.
// Anything else raises CapabilityError naming the node.

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "theramon/errors.hpp"
#include "theramon/graph/network.hpp"
#include "theramon/graph/sample_store.hpp"
#include "theramon/rng.hpp"

namespace theramon::graph {

enum class SamplerKind { enumeration, dirichlet_categorical, gamma_precision, normal_mean, prior, unsupported };

struct SamplerChoice {
    SamplerKind kind = SamplerKind::unsupported;
    std::string reason;
};

inline SamplerChoice choose_sampler(const Network& net, std::size_t i) {
    if (net.kind(i) != NodeKind::stochastic) return {SamplerKind::unsupported, "node is not stochastic"};
    const auto& info = net.info(i);
    const auto family = net.spec(i).dist->family;
    if (info.lik_children.empty()) return {SamplerKind::prior, {}};
    if (is_discrete(family)) return {SamplerKind::enumeration, {}};

    const bool direct_only = info.det_closure.empty();
    auto all_children = [&](auto&& pred) {
        for (auto c : info.lik_children)
            if (!pred(net.spec(c), net.info(c))) return false;
        return true;
    };
    switch (family) {
        case Family::dirichlet:
            if (direct_only && all_children([&](const NodeSpec& s, const NodeInfo& ci) {
                    return s.dist->family == Family::categorical && ci.slots[0].kind == Slot::Kind::parent &&
                           ci.slots[0].parent == i;
                }))
                return {SamplerKind::dirichlet_categorical, {}};
            return {SamplerKind::unsupported, "Dirichlet node needs Categorical children using it as pmf"};
        case Family::gamma:
            if (direct_only && all_children([&](const NodeSpec& s, const NodeInfo& ci) {
                    const auto& var = ci.slots[1];
                    return s.dist->family == Family::normal && var.kind == Slot::Kind::call &&
                           var.fn_tag == "reciprocal" && var.args.size() == 1 && var.args[0] == i &&
                           !ci.slots[0].references(i);
                }))
                return {SamplerKind::gamma_precision, {}};
            return {SamplerKind::unsupported,
                    "Gamma node needs Normal children with variance = reciprocal(node) and mean independent of it"};
        case Family::normal:
            if (direct_only && all_children([&](const NodeSpec& s, const NodeInfo& ci) {
                    return s.dist->family == Family::normal && ci.slots[0].kind == Slot::Kind::parent &&
                           ci.slots[0].parent == i && !ci.slots[1].references(i);
                }))
                return {SamplerKind::normal_mean, {}};
            return {SamplerKind::unsupported, "Normal node needs Normal children with mean = node"};
        default:
            return {SamplerKind::unsupported,
                    std::string("no exact full-conditional sampler for ") + family_name(family) + " with children"};
    }
}

namespace detail {

inline double conditional_at(Network& net, std::size_t i, const Value& candidate) {
    double lp = net.log_density_at(i, candidate);
    if (lp == kNegInf) return kNegInf;
    const auto& info = net.info(i);
    if (info.lik_children.empty()) return lp;
    net.assign(i, candidate);
    for (auto c : info.lik_children) {
        lp += net.log_density(c);
        if (lp == kNegInf) break;
    }
    return lp;
}

inline std::span<const double> candidates(const Network& net, std::size_t i) {
    const auto& info = net.info(i);
    return net.slot_vector(net.spec(i).dist->family == Family::categorical ? info.slots[1] : info.slots[0]);
}

inline std::size_t draw_index(std::span<const double> logw, Rng& rng) {
    const double m = *std::max_element(logw.begin(), logw.end());
    double total = 0.0;
    std::vector<double> w(logw.size());
    for (std::size_t k = 0; k < logw.size(); ++k) total += (w[k] = std::exp(logw[k] - m));
    double u = rng.uniform() * total;
    for (std::size_t k = 0; k < w.size(); ++k) {
        if (u < w[k]) return k;
        u -= w[k];
    }
    // Rounding left u >= 0 past the end: take the last positive weight.
    for (std::size_t k = w.size(); k-- > 0;)
        if (w[k] > 0.0) return k;
    return w.size() - 1;
}

inline std::vector<double> dirichlet_draw(std::span<const double> conc, Rng& rng, const std::string& id) {
    std::vector<double> x(conc.size());
    double total = 0.0;
    for (std::size_t k = 0; k < conc.size(); ++k) total += (x[k] = rng.gamma(conc[k], 1.0));
    if (!(total > 0.0)) throw NumericError("node '" + id + "': degenerate Dirichlet draw");
    for (auto& v : x) v /= total;
    return x;
}

inline Value sample_prior(const Network& net, std::size_t i, Rng& rng) {
    const auto& s = net.info(i).slots;
    switch (net.spec(i).dist->family) {
        case Family::normal: return rng.normal(net.slot_scalar(s[0]), std::sqrt(net.slot_scalar(s[1])));
        case Family::gamma: return rng.gamma(net.slot_scalar(s[0]), net.slot_scalar(s[1]));
        case Family::categorical: {
            const auto pmf = net.slot_vector(s[0]);
            const auto levels = net.slot_vector(s[1]);
            std::vector<double> logw(pmf.size());
            for (std::size_t k = 0; k < pmf.size(); ++k) logw[k] = pmf[k] > 0.0 ? std::log(pmf[k]) : kNegInf;
            return levels[draw_index(logw, rng)];
        }
        case Family::dirichlet: return dirichlet_draw(net.slot_vector(s[0]), rng, net.spec(i).id);
        case Family::uniform_interval: {
            const double lo = net.slot_scalar(s[0]), hi = net.slot_scalar(s[1]);
            return lo + (hi - lo) * rng.uniform();
        }
        case Family::discrete_uniform_grid: {
            const auto g = net.slot_vector(s[0]);
            return g[rng.index(g.size())];
        }
    }
    return 0.0;
}

}  // namespace detail

/// Unnormalized log full conditional of node `id` at `candidate`: its prior
/// term plus the log-likelihood of its spliced children, with deterministic
/// descendants recomputed for the candidate. The network is left unchanged.
inline double full_conditional_logpdf(Network& net, const NodeId& id, const Value& candidate) {
    const auto i = net.index_of(id);
    if (net.kind(i) != NodeKind::stochastic)
        throw ContractError("full_conditional_logpdf: node '" + id + "' is not stochastic");
    const Value saved = net.value(i);
    const double lp = detail::conditional_at(net, i, candidate);
    net.assign(i, saved);
    return lp;
}

/// Draws a value from the exact full conditional of stochastic node `i`.
/// The network's current assignment is left unchanged.
inline Value sample_full_conditional(Network& net, std::size_t i, Rng& rng) {
    const auto& spec = net.spec(i);
    const auto choice = choose_sampler(net, i);
    const auto& info = net.info(i);
    switch (choice.kind) {
        case SamplerKind::prior: return detail::sample_prior(net, i, rng);
        case SamplerKind::enumeration: {
            const Value saved = net.value(i);
            const auto cand = detail::candidates(net, i);
            std::vector<double> logw(cand.size());
            for (std::size_t k = 0; k < cand.size(); ++k) logw[k] = detail::conditional_at(net, i, cand[k]);
            net.assign(i, saved);
            if (*std::max_element(logw.begin(), logw.end()) == kNegInf)
                throw NumericError("node '" + spec.id + "': every level has zero full-conditional probability");
            return cand[detail::draw_index(logw, rng)];
        }
        case SamplerKind::dirichlet_categorical: {
            const auto prior = net.slot_vector(info.slots[0]);
            std::vector<double> conc(prior.begin(), prior.end());
            for (auto c : info.lik_children) {
                const auto levels = net.slot_vector(net.info(c).slots[1]);
                const auto k = level_index(levels, as_scalar(net.value(c)));
                if (k >= conc.size())
                    throw NumericError("node '" + net.spec(c).id + "': value is not one of its levels");
                conc[k] += 1.0;
            }
            return detail::dirichlet_draw(conc, rng, spec.id);
        }
        case SamplerKind::gamma_precision: {
            double shape = net.slot_scalar(info.slots[0]);
            double rate = net.slot_scalar(info.slots[1]);
            for (auto c : info.lik_children) {
                const double r = as_scalar(net.value(c)) - net.slot_scalar(net.info(c).slots[0]);
                shape += 0.5;
                rate += 0.5 * r * r;
            }
            return rng.gamma(shape, rate);
        }
        case SamplerKind::normal_mean: {
            const double v0 = net.slot_scalar(info.slots[1]);
            double precision = 1.0 / v0;
            double weighted = net.slot_scalar(info.slots[0]) / v0;
            for (auto c : info.lik_children) {
                const double v = net.slot_scalar(net.info(c).slots[1]);
                precision += 1.0 / v;
                weighted += as_scalar(net.value(c)) / v;
            }
            return rng.normal(weighted / precision, std::sqrt(1.0 / precision));
        }
        case SamplerKind::unsupported: break;
    }
    throw CapabilityError(spec.id, choice.reason);
}

inline Value sample_full_conditional(Network& net, const NodeId& id, Rng& rng) {
    return sample_full_conditional(net, net.index_of(id), rng);
}

/// One random stream per node: Rng::derive(seed, node id).
class NodeStreams {
public:
    NodeStreams(const Network& net, std::uint64_t seed) : seed_(seed) {
        streams_.reserve(net.size());
        for (std::size_t i = 0; i < net.size(); ++i)
            streams_.push_back(net.kind(i) == NodeKind::stochastic ? Rng::derive(seed, net.spec(i).id) : Rng(0));
    }

    Rng& operator[](std::size_t i) { return streams_[i]; }
    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::vector<Rng> streams_;
};

/// Resamples every unobserved stochastic node once, in topological order
/// (ties by id), refreshing deterministic descendants after each update.
inline void gibbs_sweep(Network& net, NodeStreams& streams) {
    for (auto i : net.topological_order()) {
        if (net.kind(i) != NodeKind::stochastic) continue;
        net.assign(i, sample_full_conditional(net, i, streams[i]));
    }
}

/// Deterministic starting state: nodes with an explicit initial value keep
/// it; otherwise grids start at their middle level, Gamma and Normal nodes at
/// their prior mean, Dirichlet nodes at the uniform simplex point and
/// intervals at their midpoint.
inline void default_initialize(Network& net) {
    for (auto i : net.topological_order()) {
        const auto& spec = net.spec(i);
        if (spec.kind != NodeKind::stochastic || spec.value) continue;
        const auto& s = net.info(i).slots;
        switch (spec.dist->family) {
            case Family::gamma: net.assign(i, net.slot_scalar(s[0]) / net.slot_scalar(s[1])); break;
            case Family::normal: net.assign(i, net.slot_scalar(s[0])); break;
            case Family::uniform_interval: net.assign(i, 0.5 * (net.slot_scalar(s[0]) + net.slot_scalar(s[1]))); break;
            default: net.assign(i, detail::placeholder_value(spec)); break;
        }
    }
}

struct ChainConfig {
    std::size_t sweeps = 500;
    std::size_t burn_in = 100;
    std::size_t thin = 5;
    std::uint64_t seed = 1;
    std::vector<NodeId> monitored;
    std::function<void(Network&)> initializer;
};

inline std::vector<std::string> store_columns(const Network& net, const std::vector<NodeId>& monitored) {
    std::vector<std::string> cols;
    for (const auto& id : monitored) {
        if (!net.contains(id)) throw ConfigError("monitored node '" + id + "' does not exist");
        const auto& v = net.value(id);
        if (const auto* vec = std::get_if<std::vector<double>>(&v)) {
            for (std::size_t k = 0; k < vec->size(); ++k) cols.push_back(id + "." + std::to_string(k + 1));
        } else {
            cols.push_back(id);
        }
    }
    return cols;
}

/// Runs `config.sweeps` Gibbs sweeps on a private copy of `net` and keeps
/// sweep s (1-based) when s > burn_in and (s - burn_in) % thin == 0.
inline SampleStore run_chain(Network net, const ChainConfig& config) {
    if (config.thin < 1) throw ConfigError("thin must be >= 1");
    if (config.burn_in > config.sweeps) throw ConfigError("burn_in exceeds the number of sweeps");
    auto columns = store_columns(net, config.monitored);
    std::vector<std::size_t> monitored;
    for (const auto& id : config.monitored) monitored.push_back(net.index_of(id));

    if (config.initializer)
        config.initializer(net);
    else
        default_initialize(net);

    for (auto i : net.topological_order()) {
        if (net.kind(i) != NodeKind::stochastic) continue;
        auto choice = choose_sampler(net, i);
        if (choice.kind == SamplerKind::unsupported) throw CapabilityError(net.spec(i).id, choice.reason);
    }

    SampleStore store(std::move(columns), config.burn_in, config.thin, config.seed);
    NodeStreams streams(net, config.seed);
    std::vector<double> row;
    for (std::size_t s = 1; s <= config.sweeps; ++s) {
        gibbs_sweep(net, streams);
        if (s <= config.burn_in || (s - config.burn_in) % config.thin != 0) continue;
        row.clear();
        for (auto i : monitored) {
            const auto& v = net.value(i);
            if (const auto* d = std::get_if<double>(&v))
                row.push_back(*d);
            else
                for (double x : std::get<std::vector<double>>(v)) row.push_back(x);
        }
        store.append(row);
    }
    store.finalize(config.sweeps);
    return store;
}

}  // namespace theramon::graph
