#pragma once

// Plate templates: nodes declared once with index placeholders and expanded
// into a full Network.
//
// Index ranges nest in declaration order. A range either has a fixed count or
// a count that depends on enclosing indices (ragged plates, e.g. a variable
// number of cycles per patient). Expanded ids are "name[v1,v2,...]" with the
// 1-based index values in declaration order; nodes without indices keep their
// bare name.
//
// When a binding references a node replicated over indices the referencing
// node does not carry, every replicate is connected: call arguments fan in
// over the free indices, in declaration order. A single-parent slot must
// resolve to exactly one replicate.

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "theramon/errors.hpp"
#include "theramon/graph/dist.hpp"
#include "theramon/graph/network.hpp"

namespace theramon::graph {

using IndexTuple = std::map<std::string, std::size_t>;
using ContextFn = std::function<std::vector<double>(const IndexTuple&)>;

struct IndexRange {
    std::string name;
    std::size_t count = 1;
    std::function<std::size_t(const IndexTuple&)> varying;

    static IndexRange fixed(std::string name, std::size_t count) { return {std::move(name), count, {}}; }
    static IndexRange ragged(std::string name, std::function<std::size_t(const IndexTuple&)> fn) {
        return {std::move(name), 0, std::move(fn)};
    }
};

namespace plate {

struct Const {
    std::vector<double> values;
};
/// Constant that differs per replicate.
struct Context {
    ContextFn fn;
};
struct Parent {
    std::string node;
};
/// Deterministic function in a slot; constants are `constants` followed by
/// `context(indices)` when a context function is set.
struct Fn {
    std::string fn;
    std::vector<std::string> args;
    std::vector<double> constants;
    ContextFn context;
};

using Binding = std::variant<Const, Context, Parent, Fn>;

}  // namespace plate

struct TemplateNode {
    std::string name;
    std::vector<std::string> indices;
    NodeKind kind = NodeKind::stochastic;

    // stochastic / observed
    Family family = Family::normal;
    std::vector<plate::Binding> params;
    std::function<Value(const IndexTuple&)> observed;

    // deterministic
    std::string det_fn;
    std::vector<std::string> det_args;
    std::vector<double> det_constants;
    ContextFn det_context;
};

struct PlateTemplate {
    std::vector<TemplateNode> nodes;
    FunctionTable functions;

    TemplateNode& stochastic(std::string name, std::vector<std::string> indices, Family family,
                             std::vector<plate::Binding> params) {
        TemplateNode n;
        n.name = std::move(name);
        n.indices = std::move(indices);
        n.kind = NodeKind::stochastic;
        n.family = family;
        n.params = std::move(params);
        return nodes.emplace_back(std::move(n));
    }

    TemplateNode& observed(std::string name, std::vector<std::string> indices, Family family,
                           std::vector<plate::Binding> params, std::function<Value(const IndexTuple&)> value) {
        auto& n = stochastic(std::move(name), std::move(indices), family, std::move(params));
        n.kind = NodeKind::observed;
        n.observed = std::move(value);
        return n;
    }

    TemplateNode& deterministic(std::string name, std::vector<std::string> indices, std::string fn,
                                std::vector<std::string> args, std::vector<double> constants = {},
                                ContextFn context = {}) {
        TemplateNode n;
        n.name = std::move(name);
        n.indices = std::move(indices);
        n.kind = NodeKind::deterministic;
        n.det_fn = std::move(fn);
        n.det_args = std::move(args);
        n.det_constants = std::move(constants);
        n.det_context = std::move(context);
        return nodes.emplace_back(std::move(n));
    }
};

inline std::string expanded_id(const std::string& name, const std::vector<std::size_t>& values) {
    if (values.empty()) return name;
    std::string id = name + "[";
    for (std::size_t k = 0; k < values.size(); ++k) {
        if (k) id += ",";
        id += std::to_string(values[k]);
    }
    return id + "]";
}

namespace detail {

class PlateExpander {
public:
    PlateExpander(const PlateTemplate& tpl, const std::vector<IndexRange>& ranges) : tpl_(tpl), ranges_(ranges) {
        std::set<std::string> seen;
        for (const auto& r : ranges_) {
            if (!seen.insert(r.name).second) throw StructuralError("index '" + r.name + "' declared twice");
            if (!r.varying && r.count < 1) throw StructuralError("index '" + r.name + "' needs a count >= 1");
        }
        for (const auto& n : tpl_.nodes) {
            if (!by_name_.emplace(n.name, &n).second)
                throw StructuralError("template node '" + n.name + "' declared twice");
            for (const auto& ix : n.indices)
                if (!seen.count(ix))
                    throw StructuralError("template node '" + n.name + "' uses undeclared index '" + ix + "'");
        }
    }

    Network expand() {
        NetworkBuilder builder;
        builder.functions() = tpl_.functions;
        for (const auto& n : tpl_.nodes)
            for (const auto& t : instances(n, {})) builder.add(make_node(n, t));
        return builder.build();
    }

private:
    const TemplateNode& lookup(const std::string& owner, const std::string& ref) const {
        auto it = by_name_.find(ref);
        if (it == by_name_.end())
            throw StructuralError("template node '" + owner + "' references unknown node '" + ref + "'");
        return *it->second;
    }

    /// Replicates of `n` consistent with the values already fixed in `bound`.
    std::vector<IndexTuple> instances(const TemplateNode& n, const IndexTuple& bound) const {
        std::vector<IndexTuple> out;
        IndexTuple cur;
        enumerate(n, bound, 0, cur, out);
        return out;
    }

    void enumerate(const TemplateNode& n, const IndexTuple& bound, std::size_t level, IndexTuple& cur,
                   std::vector<IndexTuple>& out) const {
        if (level == ranges_.size()) {
            out.push_back(cur);
            return;
        }
        const auto& r = ranges_[level];
        const bool carried = std::find(n.indices.begin(), n.indices.end(), r.name) != n.indices.end();
        if (!carried) {
            enumerate(n, bound, level + 1, cur, out);
            return;
        }
        std::size_t count = r.count;
        if (r.varying) {
            for (std::size_t k = 0; k < level; ++k)
                if (!cur.count(ranges_[k].name))
                    throw StructuralError("template node '" + n.name + "' carries ragged index '" + r.name +
                                          "' without its enclosing index '" + ranges_[k].name + "'");
            count = r.varying(cur);
        }
        auto it = bound.find(r.name);
        if (it != bound.end()) {
            if (it->second < 1 || it->second > count) return;
            cur[r.name] = it->second;
            enumerate(n, bound, level + 1, cur, out);
            cur.erase(r.name);
            return;
        }
        for (std::size_t v = 1; v <= count; ++v) {
            cur[r.name] = v;
            enumerate(n, bound, level + 1, cur, out);
        }
        cur.erase(r.name);
    }

    std::string id_of(const TemplateNode& n, const IndexTuple& t) const {
        std::vector<std::size_t> values;
        for (const auto& r : ranges_) {
            auto it = t.find(r.name);
            if (it != t.end()) values.push_back(it->second);
        }
        return expanded_id(n.name, values);
    }

    /// Expanded ids of `ref` as seen from replicate `t` of `owner`.
    std::vector<NodeId> resolve(const TemplateNode& owner, const IndexTuple& t, const std::string& ref) const {
        const auto& target = lookup(owner.name, ref);
        IndexTuple bound;
        for (const auto& ix : target.indices) {
            auto it = t.find(ix);
            if (it != t.end()) bound.emplace(ix, it->second);
        }
        std::vector<NodeId> ids;
        for (const auto& inst : instances(target, bound)) ids.push_back(id_of(target, inst));
        if (ids.empty())
            throw StructuralError("reference from '" + id_of(owner, t) + "' to '" + ref + "' matches no replicate");
        return ids;
    }

    NodeId resolve_single(const TemplateNode& owner, const IndexTuple& t, const std::string& ref) const {
        auto ids = resolve(owner, t, ref);
        if (ids.size() != 1)
            throw StructuralError("single-parent slot of '" + id_of(owner, t) + "' resolves to " +
                                  std::to_string(ids.size()) + " replicates of '" + ref + "'");
        return ids.front();
    }

    std::vector<NodeId> resolve_all(const TemplateNode& owner, const IndexTuple& t,
                                    const std::vector<std::string>& refs) const {
        std::vector<NodeId> out;
        for (const auto& r : refs) {
            auto ids = resolve(owner, t, r);
            out.insert(out.end(), ids.begin(), ids.end());
        }
        return out;
    }

    NodeSpec make_node(const TemplateNode& n, const IndexTuple& t) const {
        const auto id = id_of(n, t);
        if (n.kind == NodeKind::deterministic) {
            auto consts = n.det_constants;
            if (n.det_context) {
                auto extra = n.det_context(t);
                consts.insert(consts.end(), extra.begin(), extra.end());
            }
            return NodeSpec::deterministic(id, n.det_fn, resolve_all(n, t, n.det_args), std::move(consts));
        }
        DistSpec dist{n.family, {}};
        for (const auto& b : n.params) {
            if (const auto* c = std::get_if<plate::Const>(&b)) {
                dist.params.emplace_back(Constant{c->values});
            } else if (const auto* c = std::get_if<plate::Context>(&b)) {
                dist.params.emplace_back(Constant{c->fn(t)});
            } else if (const auto* p = std::get_if<plate::Parent>(&b)) {
                dist.params.emplace_back(ParentRef{resolve_single(n, t, p->node)});
            } else {
                const auto& f = std::get<plate::Fn>(b);
                auto consts = f.constants;
                if (f.context) {
                    auto extra = f.context(t);
                    consts.insert(consts.end(), extra.begin(), extra.end());
                }
                dist.params.emplace_back(Call{f.fn, resolve_all(n, t, f.args), std::move(consts)});
            }
        }
        if (n.kind == NodeKind::observed) {
            if (!n.observed) throw StructuralError("observed template node '" + n.name + "' has no value source");
            return NodeSpec::observed(id, std::move(dist), n.observed(t));
        }
        return NodeSpec::stochastic(id, std::move(dist));
    }

    const PlateTemplate& tpl_;
    const std::vector<IndexRange>& ranges_;
    std::map<std::string, const TemplateNode*> by_name_;
};

}  // namespace detail

/// Expands every template node over its index ranges. Structural problems
/// (undeclared indices, unknown references, cycles) raise StructuralError.
inline Network expand_plates(const PlateTemplate& tpl, const std::vector<IndexRange>& ranges) {
    return detail::PlateExpander(tpl, ranges).expand();
}

}  // namespace theramon::graph
