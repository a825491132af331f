#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "theramon/errors.hpp"
#include "theramon/graph/sample_store.hpp"

namespace theramon::inference {

struct ColumnDiagnostics {
    std::string name;
    std::vector<double> trace;
    std::vector<double> running_mean;
    std::optional<std::vector<double>> acf;  // lags 1..K; empty when the trace is constant
    double mean = 0.0;
    double sd = 0.0;
    double half_gap = 0.0;  // |mean(first half) - mean(second half)| / pooled sd
    bool stationary = true;
};

struct TraceReport {
    bool available = false;
    std::string note;
    std::vector<ColumnDiagnostics> columns;
};

/// Lag-k sample autocorrelations for k = 1..max_lag (clipped to n - 1).
/// nullopt when the sample has zero variance.
inline std::optional<std::vector<double>> autocorrelation(const std::vector<double>& x, std::size_t max_lag) {
    const std::size_t n = x.size();
    if (n == 0 || std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); })) return std::nullopt;
    double m = 0.0;
    for (double v : x) m += v;
    m /= static_cast<double>(n);
    double denom = 0.0;
    for (double v : x) denom += (v - m) * (v - m);
    if (!(denom > 0.0)) return std::nullopt;
    std::vector<double> out;
    for (std::size_t k = 1; k <= max_lag && k < n; ++k) {
        double s = 0.0;
        for (std::size_t t = 0; t + k < n; ++t) s += (x[t] - m) * (x[t + k] - m);
        out.push_back(s / denom);
    }
    return out;
}

namespace detail {

inline void mean_var(const double* p, std::size_t n, double& mean, double& var) {
    // A constant run is reported exactly rather than with rounding residue.
    if (std::all_of(p, p + n, [&](double v) { return v == p[0]; })) {
        mean = n ? p[0] : 0.0;
        var = 0.0;
        return;
    }
    mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += p[i];
    mean /= static_cast<double>(n);
    var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (p[i] - mean) * (p[i] - mean);
    var /= static_cast<double>(n);
}

}  // namespace detail

/// Trace, running mean, autocorrelation and a split-half stationarity flag
/// per column. The flag is a heuristic: the two half means must differ by
/// less than `tolerance` pooled standard deviations.
inline TraceReport trace_diagnostics(const graph::SampleStore& store, std::size_t max_lag = 20,
                                     double tolerance = 0.1) {
    TraceReport rep;
    if (store.size() < 2) {
        rep.note = "diagnostics unavailable: fewer than 2 retained draws";
        return rep;
    }
    rep.available = true;
    for (const auto& name : store.columns()) {
        ColumnDiagnostics c;
        c.name = name;
        c.trace = store.column(name);
        const std::size_t n = c.trace.size();
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            acc += c.trace[i];
            c.running_mean.push_back(acc / static_cast<double>(i + 1));
        }
        double var = 0.0;
        detail::mean_var(c.trace.data(), n, c.mean, var);
        c.sd = std::sqrt(var);
        c.acf = autocorrelation(c.trace, max_lag);

        const std::size_t h = n / 2;
        double m1, v1, m2, v2;
        detail::mean_var(c.trace.data(), h, m1, v1);
        detail::mean_var(c.trace.data() + h, n - h, m2, v2);
        const double pooled = std::sqrt(0.5 * (v1 + v2));
        const double gap = std::abs(m1 - m2);
        if (pooled > 0.0) {
            c.half_gap = gap / pooled;
            c.stationary = c.half_gap < tolerance;
        } else {
            c.half_gap = gap > 0.0 ? INFINITY : 0.0;
            c.stationary = gap == 0.0;
        }
        rep.columns.push_back(std::move(c));
    }
    return rep;
}

/// Drops the first `burn` stored draws and keeps every `stride`-th of the
/// rest. The result records the equivalent burn-in and thinning relative to
/// the original chain.
inline graph::SampleStore thin(const graph::SampleStore& store, std::size_t burn, std::size_t stride) {
    if (stride == 0) throw ConfigError("stride must be >= 1");
    graph::SampleStore out(store.columns(), store.burn_in() + store.thin() * burn, store.thin() * stride,
                           store.seed());
    for (std::size_t i = burn + stride - 1; i < store.size(); i += stride) out.append(store.row(i));
    out.metadata() = store.metadata();
    out.finalize(store.sweep_count());
    return out;
}

}  // namespace theramon::inference
