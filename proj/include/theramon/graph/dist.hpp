#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "theramon/errors.hpp"

namespace theramon::graph {

using NodeId = std::string;

/// A node value: a scalar (continuous value or grid level) or a vector
/// (simplex points of Dirichlet nodes).
using Value = std::variant<double, std::vector<double>>;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double as_scalar(const Value& v) {
    if (const auto* d = std::get_if<double>(&v)) return *d;
    throw ContractError("expected a scalar value, got a vector");
}

inline const std::vector<double>& as_vector(const Value& v) {
    if (const auto* x = std::get_if<std::vector<double>>(&v)) return *x;
    throw ContractError("expected a vector value, got a scalar");
}

enum class Family { normal, gamma, categorical, dirichlet, uniform_interval, discrete_uniform_grid };

inline const char* family_name(Family f) {
    switch (f) {
        case Family::normal: return "Normal";
        case Family::gamma: return "Gamma";
        case Family::categorical: return "Categorical";
        case Family::dirichlet: return "Dirichlet";
        case Family::uniform_interval: return "UniformInterval";
        case Family::discrete_uniform_grid: return "DiscreteUniformGrid";
    }
    return "?";
}

// Parameter slot bindings.

struct Constant {
    std::vector<double> values;  // one entry for scalar slots
};

struct ParentRef {
    NodeId id;
};

/// A named deterministic function of parent values and fixed constants,
/// evaluated inline in a parameter slot.
struct Call {
    std::string fn;
    std::vector<NodeId> args;
    std::vector<double> constants;
};

using Binding = std::variant<Constant, ParentRef, Call>;

inline Binding constant(double v) { return Constant{{v}}; }
inline Binding constant(std::vector<double> v) { return Constant{std::move(v)}; }
inline Binding parent(NodeId id) { return ParentRef{std::move(id)}; }
inline Binding call(std::string fn, std::vector<NodeId> args, std::vector<double> constants = {}) {
    return Call{std::move(fn), std::move(args), std::move(constants)};
}

/// Parameter slots per family:
///   Normal(mean, variance), Gamma(shape, rate), Categorical(pmf, levels),
///   Dirichlet(concentration), UniformInterval(lo, hi),
///   DiscreteUniformGrid(grid).
struct DistSpec {
    Family family = Family::normal;
    std::vector<Binding> params;

    static DistSpec normal(Binding mean, Binding variance) {
        return {Family::normal, {std::move(mean), std::move(variance)}};
    }
    static DistSpec gamma(Binding shape, Binding rate) {
        return {Family::gamma, {std::move(shape), std::move(rate)}};
    }
    static DistSpec categorical(Binding pmf, std::vector<double> levels) {
        return {Family::categorical, {std::move(pmf), Constant{std::move(levels)}}};
    }
    static DistSpec dirichlet(std::vector<double> concentration) {
        return {Family::dirichlet, {Constant{std::move(concentration)}}};
    }
    static DistSpec uniform_interval(double lo, double hi) {
        return {Family::uniform_interval, {constant(lo), constant(hi)}};
    }
    static DistSpec discrete_uniform_grid(std::vector<double> grid) {
        return {Family::discrete_uniform_grid, {Constant{std::move(grid)}}};
    }
};

inline std::size_t param_count(Family f) {
    switch (f) {
        case Family::normal:
        case Family::gamma:
        case Family::categorical:
        case Family::uniform_interval: return 2;
        case Family::dirichlet:
        case Family::discrete_uniform_grid: return 1;
    }
    return 0;
}

inline bool is_discrete(Family f) {
    return f == Family::categorical || f == Family::discrete_uniform_grid;
}

inline bool strictly_increasing(std::span<const double> v) {
    return std::adjacent_find(v.begin(), v.end(), std::greater_equal<>()) == v.end();
}

/// Position of `x` in a level grid, or npos. Grid values are copied
/// verbatim into node values, so exact comparison is intended.
inline std::size_t level_index(std::span<const double> grid, double x) {
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (grid[i] == x) return i;
    return static_cast<std::size_t>(-1);
}

// Log-densities. Invalid parameters or out-of-support arguments give -inf.

inline double normal_logpdf(double x, double mean, double variance) {
    if (!(variance > 0.0) || !std::isfinite(x)) return kNegInf;
    const double d = x - mean;
    return -0.5 * std::log(2.0 * std::numbers::pi * variance) - d * d / (2.0 * variance);
}

inline double gamma_logpdf(double x, double shape, double rate) {
    if (!(shape > 0.0) || !(rate > 0.0) || !(x > 0.0) || !std::isfinite(x)) return kNegInf;
    return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

inline double categorical_logpdf(double x, std::span<const double> pmf, std::span<const double> levels) {
    const auto i = level_index(levels, x);
    if (i >= levels.size() || i >= pmf.size() || !(pmf[i] > 0.0)) return kNegInf;
    return std::log(pmf[i]);
}

inline bool on_simplex(std::span<const double> x, double tol = 1e-9) {
    if (x.empty()) return false;
    double s = 0.0;
    for (double v : x) {
        if (!(v >= 0.0)) return false;
        s += v;
    }
    return std::abs(s - 1.0) <= tol;
}

inline double dirichlet_logpdf(std::span<const double> x, std::span<const double> conc) {
    if (x.size() != conc.size() || !on_simplex(x)) return kNegInf;
    double total = 0.0, out = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(conc[i] > 0.0)) return kNegInf;
        total += conc[i];
        out -= std::lgamma(conc[i]);
        if (conc[i] != 1.0) {
            if (x[i] <= 0.0) return kNegInf;
            out += (conc[i] - 1.0) * std::log(x[i]);
        }
    }
    return out + std::lgamma(total);
}

inline double uniform_logpdf(double x, double lo, double hi) {
    if (!(lo < hi) || x < lo || x > hi) return kNegInf;
    return -std::log(hi - lo);
}

inline double grid_logpdf(double x, std::span<const double> grid) {
    if (level_index(grid, x) >= grid.size()) return kNegInf;
    return -std::log(static_cast<double>(grid.size()));
}

/// log(sum(exp(v))) without overflow; -inf for an all -inf input.
inline double log_sum_exp(std::span<const double> v) {
    const double m = *std::max_element(v.begin(), v.end());
    if (m == kNegInf) return kNegInf;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

}  // namespace theramon::graph
