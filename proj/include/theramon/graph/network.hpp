#pragma once

// Directed acyclic Bayesian network with stochastic, observed and
// deterministic nodes.
//
// Parameter slots of a node's distribution bind to constants, to a single
// parent, or to a named deterministic function of several parents (a Call).
// Deterministic nodes hold the value of a named function of their parents
// and are recomputed whenever an ancestor changes, so for any stochastic
// node the network tracks
//   det_closure  - deterministic descendants reachable through deterministic nodes only,
//   lik_children - stochastic/observed consumers of the node or of its det_closure,
// which is the "spliced" skeleton used for Markov blankets and full conditionals.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "theramon/errors.hpp"
#include "theramon/graph/dist.hpp"

namespace theramon::graph {

enum class NodeKind { stochastic, observed, deterministic };

using DetFn = double (*)(std::span<const double> args, std::span<const double> constants);

/// Named deterministic functions available to Call bindings and
/// deterministic nodes.
class FunctionTable {
public:
    FunctionTable() {
        define("identity", [](std::span<const double> a, std::span<const double>) { return a[0]; });
        define("reciprocal", [](std::span<const double> a, std::span<const double>) { return 1.0 / a[0]; });
        define("sum", [](std::span<const double> a, std::span<const double> c) {
            double s = 0.0;
            for (double v : a) s += v;
            for (double v : c) s += v;
            return s;
        });
        define("product", [](std::span<const double> a, std::span<const double> c) {
            double p = 1.0;
            for (double v : a) p *= v;
            for (double v : c) p *= v;
            return p;
        });
        define("mean", [](std::span<const double> a, std::span<const double>) {
            double s = 0.0;
            for (double v : a) s += v;
            return s / static_cast<double>(a.size());
        });
    }

    void define(const std::string& tag, DetFn fn) { fns_[tag] = fn; }

    DetFn find(const std::string& tag) const {
        auto it = fns_.find(tag);
        if (it == fns_.end()) throw StructuralError("unknown deterministic function '" + tag + "'");
        return it->second;
    }

    bool contains(const std::string& tag) const { return fns_.count(tag) != 0; }

private:
    std::map<std::string, DetFn> fns_;
};

struct NodeSpec {
    NodeId id;
    NodeKind kind = NodeKind::stochastic;
    std::optional<DistSpec> dist;   // absent for deterministic nodes
    std::vector<NodeId> parents;    // filled in by the network from bindings / args
    std::string det_fn;             // deterministic nodes only
    std::vector<double> det_constants;
    std::optional<Value> value;

    static NodeSpec stochastic(NodeId id, DistSpec dist, std::optional<Value> init = std::nullopt) {
        NodeSpec n;
        n.id = std::move(id);
        n.kind = NodeKind::stochastic;
        n.dist = std::move(dist);
        n.value = std::move(init);
        return n;
    }

    static NodeSpec observed(NodeId id, DistSpec dist, Value value) {
        NodeSpec n;
        n.id = std::move(id);
        n.kind = NodeKind::observed;
        n.dist = std::move(dist);
        n.value = std::move(value);
        return n;
    }

    static NodeSpec deterministic(NodeId id, std::string fn, std::vector<NodeId> args,
                                  std::vector<double> constants = {}) {
        NodeSpec n;
        n.id = std::move(id);
        n.kind = NodeKind::deterministic;
        n.det_fn = std::move(fn);
        n.parents = std::move(args);
        n.det_constants = std::move(constants);
        return n;
    }
};

/// A parameter slot resolved against node indices.
struct Slot {
    enum class Kind : unsigned char { constant, parent, call };
    Kind kind = Kind::constant;
    std::vector<double> constant;
    std::size_t parent = 0;
    std::string fn_tag;
    DetFn fn = nullptr;
    std::vector<std::size_t> args;
    std::vector<double> constants;

    bool references(std::size_t node) const {
        if (kind == Kind::parent) return parent == node;
        if (kind == Kind::call) return std::find(args.begin(), args.end(), node) != args.end();
        return false;
    }
};

struct NodeInfo {
    std::vector<Slot> slots;                    // distribution parameters
    Slot det;                                   // deterministic nodes: fn over parents
    std::vector<std::size_t> parents;           // direct, in binding order
    std::vector<std::size_t> children;          // direct, topological order
    std::vector<std::size_t> det_closure;       // topological order
    std::vector<std::size_t> lik_children;      // topological order
    std::vector<std::size_t> spliced_parents;   // sorted by index
    std::size_t topo_rank = 0;
};

class Network;

/// Accumulates node specs and named functions, then validates them into a
/// Network.
class NetworkBuilder {
public:
    NetworkBuilder& add(NodeSpec node) {
        nodes_.push_back(std::move(node));
        return *this;
    }

    NetworkBuilder& define_function(const std::string& tag, DetFn fn) {
        functions_.define(tag, fn);
        return *this;
    }

    FunctionTable& functions() { return functions_; }

    Network build() const;

private:
    std::vector<NodeSpec> nodes_;
    FunctionTable functions_;
};

class Network {
public:
    Network() = default;

    std::size_t size() const { return specs_.size(); }
    bool contains(const NodeId& id) const { return index_.count(id) != 0; }

    std::size_t index_of(const NodeId& id) const {
        auto it = index_.find(id);
        if (it == index_.end()) throw ContractError("unknown node '" + id + "'");
        return it->second;
    }

    const NodeSpec& spec(std::size_t i) const { return specs_[i]; }
    const NodeSpec& spec(const NodeId& id) const { return specs_[index_of(id)]; }
    const NodeInfo& info(std::size_t i) const { return info_[i]; }
    NodeKind kind(std::size_t i) const { return specs_[i].kind; }

    const Value& value(std::size_t i) const { return values_[i]; }
    const Value& value(const NodeId& id) const { return values_[index_of(id)]; }
    double scalar(const NodeId& id) const { return as_scalar(value(id)); }

    /// Sets a stochastic node and refreshes its deterministic descendants.
    void set_value(const NodeId& id, Value v) {
        const auto i = index_of(id);
        if (specs_[i].kind != NodeKind::stochastic)
            throw ContractError("node '" + id + "' is not stochastic; its value cannot be set");
        check_shape(i, v);
        assign(i, std::move(v));
    }

    /// Unchecked assignment used by samplers.
    void assign(std::size_t i, Value v) {
        values_[i] = std::move(v);
        for (auto d : info_[i].det_closure) values_[d] = eval_det(d);
    }

    /// Recomputes every deterministic node from current stochastic values.
    void refresh_deterministic() {
        for (auto i : topo_)
            if (specs_[i].kind == NodeKind::deterministic) values_[i] = eval_det(i);
    }

    /// True when recomputing all deterministic nodes is a no-op.
    bool deterministic_consistent() const {
        for (auto i : topo_)
            if (specs_[i].kind == NodeKind::deterministic && as_scalar(values_[i]) != eval_det(i))
                return false;
        return true;
    }

    /// Node indices in topological order, ties broken by id.
    std::span<const std::size_t> topological_order() const { return topo_; }

    std::vector<NodeId> ids(std::span<const std::size_t> idx) const {
        std::vector<NodeId> out;
        out.reserve(idx.size());
        for (auto i : idx) out.push_back(specs_[i].id);
        return out;
    }

    std::vector<NodeId> parents(const NodeId& id) const { return ids(info_[index_of(id)].parents); }
    std::vector<NodeId> children(const NodeId& id) const { return ids(info_[index_of(id)].children); }

    std::size_t count(NodeKind k) const {
        return static_cast<std::size_t>(
            std::count_if(specs_.begin(), specs_.end(), [k](const NodeSpec& s) { return s.kind == k; }));
    }

    // Slot evaluation against current values.

    double slot_scalar(const Slot& s) const {
        switch (s.kind) {
            case Slot::Kind::constant: return s.constant[0];
            case Slot::Kind::parent: return *std::get_if<double>(&values_[s.parent]);
            case Slot::Kind::call: return invoke(s.fn, s.args, s.constants);
        }
        return 0.0;
    }

    std::span<const double> slot_vector(const Slot& s) const {
        if (s.kind == Slot::Kind::constant) return s.constant;
        return *std::get_if<std::vector<double>>(&values_[s.parent]);
    }

    /// Log-density of node i at value v given its current parents.
    double log_density_at(std::size_t i, const Value& v) const {
        const auto& d = *specs_[i].dist;
        const auto& s = info_[i].slots;
        switch (d.family) {
            case Family::normal:
                return normal_logpdf(as_scalar(v), slot_scalar(s[0]), slot_scalar(s[1]));
            case Family::gamma:
                return gamma_logpdf(as_scalar(v), slot_scalar(s[0]), slot_scalar(s[1]));
            case Family::categorical:
                return categorical_logpdf(as_scalar(v), slot_vector(s[0]), slot_vector(s[1]));
            case Family::dirichlet:
                if (!std::holds_alternative<std::vector<double>>(v)) return kNegInf;
                return dirichlet_logpdf(as_vector(v), slot_vector(s[0]));
            case Family::uniform_interval:
                return uniform_logpdf(as_scalar(v), slot_scalar(s[0]), slot_scalar(s[1]));
            case Family::discrete_uniform_grid:
                return grid_logpdf(as_scalar(v), slot_vector(s[0]));
        }
        return kNegInf;
    }

    double log_density(std::size_t i) const { return log_density_at(i, values_[i]); }

    /// Sum of log-densities over all stochastic and observed nodes.
    double log_joint() const {
        double total = 0.0;
        for (std::size_t i = 0; i < size(); ++i)
            if (specs_[i].kind != NodeKind::deterministic) total += log_density(i);
        return total;
    }

private:
    friend class NetworkBuilder;

    double invoke(DetFn fn, const std::vector<std::size_t>& args, std::span<const double> constants) const {
        constexpr std::size_t kInline = 16;
        if (args.size() <= kInline) {
            double buf[kInline];
            for (std::size_t a = 0; a < args.size(); ++a) buf[a] = *std::get_if<double>(&values_[args[a]]);
            return fn(std::span<const double>(buf, args.size()), constants);
        }
        std::vector<double> buf(args.size());
        for (std::size_t a = 0; a < args.size(); ++a) buf[a] = *std::get_if<double>(&values_[args[a]]);
        return fn(buf, constants);
    }

    double eval_det(std::size_t i) const {
        const auto& s = info_[i].det;
        return invoke(s.fn, s.args, s.constants);
    }

    void check_shape(std::size_t i, const Value& v) const {
        const bool want_vector = specs_[i].dist && specs_[i].dist->family == Family::dirichlet;
        if (want_vector != std::holds_alternative<std::vector<double>>(v))
            throw ContractError("node '" + specs_[i].id + "': value has the wrong shape");
    }

    std::vector<NodeSpec> specs_;
    std::vector<NodeInfo> info_;
    std::vector<Value> values_;
    std::vector<std::size_t> topo_;
    std::unordered_map<NodeId, std::size_t> index_;
};

namespace detail {

inline bool is_vector_node(const NodeSpec& s) {
    return s.dist && s.dist->family == Family::dirichlet;
}

/// Value a stochastic node starts from when none is given: middle level
/// for grids, prior mean for Gamma and Normal, uniform simplex point for
/// Dirichlet, midpoint for intervals. Only constant slots are consulted;
/// parent-bound slots are resolved later by the chain initializer.
inline Value placeholder_value(const NodeSpec& s) {
    const auto& d = *s.dist;
    auto first = [&](std::size_t slot) -> const std::vector<double>* {
        if (auto* c = std::get_if<Constant>(&d.params[slot])) return &c->values;
        return nullptr;
    };
    switch (d.family) {
        case Family::categorical: {
            const auto& lv = std::get<Constant>(d.params[1]).values;
            return lv[(lv.size() - 1) / 2];
        }
        case Family::discrete_uniform_grid: {
            const auto& g = std::get<Constant>(d.params[0]).values;
            return g[(g.size() - 1) / 2];
        }
        case Family::dirichlet: {
            const auto n = std::get<Constant>(d.params[0]).values.size();
            return std::vector<double>(n, 1.0 / static_cast<double>(n));
        }
        case Family::gamma: {
            const auto* a = first(0);
            const auto* b = first(1);
            return (a && b) ? (*a)[0] / (*b)[0] : 1.0;
        }
        case Family::normal: {
            const auto* m = first(0);
            return m ? (*m)[0] : 0.0;
        }
        case Family::uniform_interval: {
            const auto* lo = first(0);
            const auto* hi = first(1);
            return (lo && hi) ? 0.5 * ((*lo)[0] + (*hi)[0]) : 0.0;
        }
    }
    return 0.0;
}

}  // namespace detail

inline Network NetworkBuilder::build() const {
    Network net;
    net.specs_ = nodes_;
    const auto n = net.specs_.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto& id = net.specs_[i].id;
        if (id.empty()) throw StructuralError("node with empty id");
        if (!net.index_.emplace(id, i).second) throw StructuralError("duplicate node id '" + id + "'");
    }
    net.info_.resize(n);
    net.values_.resize(n);

    auto resolve_id = [&](const NodeId& owner, const NodeId& ref) {
        auto it = net.index_.find(ref);
        if (it == net.index_.end())
            throw StructuralError("node '" + owner + "' references unknown node '" + ref + "'");
        return it->second;
    };
    auto is_vec = [&](std::size_t j) { return detail::is_vector_node(net.specs_[j]); };

    auto resolve_scalar_slot = [&](const NodeSpec& s, const Binding& b, const char* what) {
        Slot slot;
        if (const auto* c = std::get_if<Constant>(&b)) {
            if (c->values.size() != 1)
                throw StructuralError("node '" + s.id + "': " + what + " must be a scalar constant");
            slot.kind = Slot::Kind::constant;
            slot.constant = c->values;
        } else if (const auto* p = std::get_if<ParentRef>(&b)) {
            slot.kind = Slot::Kind::parent;
            slot.parent = resolve_id(s.id, p->id);
            if (is_vec(slot.parent))
                throw StructuralError("node '" + s.id + "': " + what + " bound to vector node '" + p->id + "'");
        } else {
            const auto& c = std::get<Call>(b);
            slot.kind = Slot::Kind::call;
            slot.fn_tag = c.fn;
            slot.fn = functions_.find(c.fn);
            slot.constants = c.constants;
            if (c.args.empty()) throw StructuralError("node '" + s.id + "': call '" + c.fn + "' has no arguments");
            for (const auto& a : c.args) {
                const auto j = resolve_id(s.id, a);
                if (is_vec(j)) throw StructuralError("node '" + s.id + "': call argument '" + a + "' is a vector node");
                slot.args.push_back(j);
            }
        }
        return slot;
    };
    auto require_const = [&](const NodeSpec& s, const Binding& b, const char* what) -> const std::vector<double>& {
        const auto* c = std::get_if<Constant>(&b);
        if (!c) throw StructuralError("node '" + s.id + "': " + what + " must be constant");
        return c->values;
    };
    auto positive_if_const = [&](const NodeSpec& s, const Slot& slot, const char* what) {
        if (slot.kind == Slot::Kind::constant && !(slot.constant[0] > 0.0))
            throw StructuralError("node '" + s.id + "': " + what + " must be > 0");
    };

    // Resolve slots and direct parents.
    for (std::size_t i = 0; i < n; ++i) {
        auto& s = net.specs_[i];
        auto& info = net.info_[i];
        std::vector<std::size_t> parents;
        auto add_parent = [&](std::size_t j) {
            if (std::find(parents.begin(), parents.end(), j) == parents.end()) parents.push_back(j);
        };

        if (s.kind == NodeKind::deterministic) {
            if (s.dist) throw StructuralError("deterministic node '" + s.id + "' must not have a distribution");
            if (s.parents.empty()) throw StructuralError("deterministic node '" + s.id + "' has no parents");
            info.det.kind = Slot::Kind::call;
            info.det.fn_tag = s.det_fn;
            info.det.fn = functions_.find(s.det_fn);
            info.det.constants = s.det_constants;
            for (const auto& p : s.parents) {
                const auto j = resolve_id(s.id, p);
                if (is_vec(j)) throw StructuralError("deterministic node '" + s.id + "' has vector parent '" + p + "'");
                info.det.args.push_back(j);
                add_parent(j);
            }
        } else {
            if (!s.dist) throw StructuralError("node '" + s.id + "' has no distribution");
            const auto& d = *s.dist;
            if (d.params.size() != param_count(d.family))
                throw StructuralError("node '" + s.id + "': " + family_name(d.family) + " expects " +
                                      std::to_string(param_count(d.family)) + " parameters");
            switch (d.family) {
                case Family::normal: {
                    info.slots.push_back(resolve_scalar_slot(s, d.params[0], "mean"));
                    info.slots.push_back(resolve_scalar_slot(s, d.params[1], "variance"));
                    positive_if_const(s, info.slots[1], "variance");
                    break;
                }
                case Family::gamma: {
                    info.slots.push_back(resolve_scalar_slot(s, d.params[0], "shape"));
                    info.slots.push_back(resolve_scalar_slot(s, d.params[1], "rate"));
                    positive_if_const(s, info.slots[0], "shape");
                    positive_if_const(s, info.slots[1], "rate");
                    break;
                }
                case Family::uniform_interval: {
                    const auto& lo = require_const(s, d.params[0], "lo");
                    const auto& hi = require_const(s, d.params[1], "hi");
                    if (lo.size() != 1 || hi.size() != 1 || !(lo[0] < hi[0]))
                        throw StructuralError("node '" + s.id + "': UniformInterval needs scalar lo < hi");
                    info.slots.push_back({Slot::Kind::constant, lo});
                    info.slots.push_back({Slot::Kind::constant, hi});
                    break;
                }
                case Family::discrete_uniform_grid: {
                    const auto& g = require_const(s, d.params[0], "grid");
                    if (g.empty() || !strictly_increasing(g))
                        throw StructuralError("node '" + s.id + "': grid must be non-empty and strictly increasing");
                    info.slots.push_back({Slot::Kind::constant, g});
                    break;
                }
                case Family::dirichlet: {
                    const auto& c = require_const(s, d.params[0], "concentration");
                    if (c.empty() || std::any_of(c.begin(), c.end(), [](double a) { return !(a > 0.0); }))
                        throw StructuralError("node '" + s.id + "': concentration must be positive");
                    info.slots.push_back({Slot::Kind::constant, c});
                    break;
                }
                case Family::categorical: {
                    const auto& levels = require_const(s, d.params[1], "levels");
                    if (levels.empty() || !strictly_increasing(levels))
                        throw StructuralError("node '" + s.id + "': levels must be non-empty and strictly increasing");
                    Slot pmf;
                    if (const auto* c = std::get_if<Constant>(&d.params[0])) {
                        if (c->values.size() != levels.size())
                            throw StructuralError("node '" + s.id + "': pmf and level grid differ in size");
                        double total = 0.0;
                        for (double p : c->values) {
                            if (!(p >= 0.0)) throw StructuralError("node '" + s.id + "': negative pmf entry");
                            total += p;
                        }
                        if (std::abs(total - 1.0) > 1e-12)
                            throw StructuralError("node '" + s.id + "': pmf does not sum to 1");
                        pmf.kind = Slot::Kind::constant;
                        pmf.constant = c->values;
                    } else if (const auto* p = std::get_if<ParentRef>(&d.params[0])) {
                        pmf.kind = Slot::Kind::parent;
                        pmf.parent = resolve_id(s.id, p->id);
                        const auto& ps = net.specs_[pmf.parent];
                        if (!is_vec(pmf.parent))
                            throw StructuralError("node '" + s.id + "': pmf must come from a Dirichlet node");
                        if (std::get<Constant>(ps.dist->params[0]).values.size() != levels.size())
                            throw StructuralError("node '" + s.id + "': Dirichlet '" + ps.id +
                                                  "' dimension differs from level grid");
                    } else {
                        throw StructuralError("node '" + s.id + "': pmf cannot be a call");
                    }
                    info.slots.push_back(std::move(pmf));
                    info.slots.push_back({Slot::Kind::constant, levels});
                    break;
                }
            }
            for (const auto& slot : info.slots) {
                if (slot.kind == Slot::Kind::parent) add_parent(slot.parent);
                if (slot.kind == Slot::Kind::call)
                    for (auto a : slot.args) add_parent(a);
            }
            s.parents.clear();
            for (auto j : parents) s.parents.push_back(net.specs_[j].id);
        }
        info.parents = std::move(parents);
    }

    // Kahn's algorithm, ties broken by id.
    std::vector<std::size_t> indegree(n, 0);
    std::vector<std::vector<std::size_t>> out(n);
    for (std::size_t i = 0; i < n; ++i)
        for (auto p : net.info_[i].parents) {
            out[p].push_back(i);
            ++indegree[i];
        }
    auto by_id = [&](std::size_t a, std::size_t b) { return net.specs_[a].id > net.specs_[b].id; };
    std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(by_id)> ready(by_id);
    for (std::size_t i = 0; i < n; ++i)
        if (indegree[i] == 0) ready.push(i);
    while (!ready.empty()) {
        const auto i = ready.top();
        ready.pop();
        net.info_[i].topo_rank = net.topo_.size();
        net.topo_.push_back(i);
        for (auto c : out[i])
            if (--indegree[c] == 0) ready.push(c);
    }
    if (net.topo_.size() != n) {
        for (std::size_t i = 0; i < n; ++i)
            if (indegree[i] != 0) throw StructuralError("cycle detected through node '" + net.specs_[i].id + "'");
    }

    auto by_rank = [&](std::size_t a, std::size_t b) { return net.info_[a].topo_rank < net.info_[b].topo_rank; };
    for (std::size_t i = 0; i < n; ++i) {
        auto& c = net.info_[i].children;
        c = out[i];
        std::sort(c.begin(), c.end(), by_rank);
    }

    // Spliced skeleton.
    for (auto i : net.topo_) {
        auto& info = net.info_[i];
        std::set<std::size_t> sp;
        for (auto p : info.parents) {
            if (net.specs_[p].kind == NodeKind::deterministic) {
                const auto& pp = net.info_[p].spliced_parents;
                sp.insert(pp.begin(), pp.end());
            } else {
                sp.insert(p);
            }
        }
        info.spliced_parents.assign(sp.begin(), sp.end());
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (net.specs_[i].kind == NodeKind::deterministic) continue;
        auto& info = net.info_[i];
        std::set<std::size_t> closure;
        std::vector<std::size_t> stack{i};
        std::set<std::size_t> lik;
        while (!stack.empty()) {
            const auto cur = stack.back();
            stack.pop_back();
            for (auto c : net.info_[cur].children) {
                if (net.specs_[c].kind == NodeKind::deterministic) {
                    if (closure.insert(c).second) stack.push_back(c);
                } else {
                    lik.insert(c);
                }
            }
        }
        info.det_closure.assign(closure.begin(), closure.end());
        std::sort(info.det_closure.begin(), info.det_closure.end(), by_rank);
        info.lik_children.assign(lik.begin(), lik.end());
        std::sort(info.lik_children.begin(), info.lik_children.end(), by_rank);
    }

    // Values: observed are required, stochastic fall back to placeholders.
    for (auto i : net.topo_) {
        const auto& s = net.specs_[i];
        if (s.kind == NodeKind::deterministic) continue;
        if (s.kind == NodeKind::observed && !s.value)
            throw StructuralError("observed node '" + s.id + "' has no value");
        Value v = s.value ? *s.value : detail::placeholder_value(s);
        net.check_shape(i, v);
        net.values_[i] = std::move(v);
    }
    net.refresh_deterministic();
    return net;
}

/// Parents, children and co-parents of children of a stochastic node on the
/// skeleton with deterministic nodes spliced out.
inline std::set<NodeId> markov_blanket(const Network& net, const NodeId& id) {
    const auto i = net.index_of(id);
    if (net.kind(i) != NodeKind::stochastic)
        throw ContractError("markov_blanket: node '" + id + "' is not stochastic");
    std::set<std::size_t> out;
    const auto& info = net.info(i);
    out.insert(info.spliced_parents.begin(), info.spliced_parents.end());
    for (auto c : info.lik_children) {
        out.insert(c);
        const auto& cp = net.info(c).spliced_parents;
        out.insert(cp.begin(), cp.end());
    }
    out.erase(i);
    std::set<NodeId> ids;
    for (auto j : out) ids.insert(net.spec(j).id);
    return ids;
}

}  // namespace theramon::graph
