#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "theramon/errors.hpp"
#include "theramon/inference/case_update.hpp"
#include "theramon/model/profile.hpp"
#include "theramon/model/types.hpp"
#include "theramon/rng.hpp"

namespace theramon::inference {

struct PlannedCycle {
    int cycle_index = 1;
    double dose_std = 0.0;
    std::vector<double> offsets;  // days into the cycle
};

/// Future cycles to forecast; must continue directly after the last
/// conditioned cycle.
struct DosePlan {
    std::vector<PlannedCycle> cycles;

    void validate(int last_observed) const {
        if (cycles.empty()) throw ContractError("dose plan has no cycles");
        for (std::size_t j = 0; j < cycles.size(); ++j) {
            const auto& c = cycles[j];
            if (c.cycle_index != last_observed + 1 + static_cast<int>(j))
                throw ContractError("dose plan must cover cycles " + std::to_string(last_observed + 1) +
                                    " onward without gaps");
            if (!std::isfinite(c.dose_std) || c.dose_std < 0.0)
                throw ContractError("dose plan cycle " + std::to_string(c.cycle_index) + ": dose must be >= 0");
            if (c.offsets.empty())
                throw ContractError("dose plan cycle " + std::to_string(c.cycle_index) + ": no time points");
            for (std::size_t k = 0; k < c.offsets.size(); ++k) {
                const double t = c.offsets[k];
                if (!std::isfinite(t) || t < 0.0 || (k > 0 && !(t > c.offsets[k - 1])))
                    throw ContractError("dose plan cycle " + std::to_string(c.cycle_index) +
                                        ": offsets must be finite, >= 0 and strictly increasing");
            }
        }
    }
};

/// Starting log-WBC of each forecast cycle: carry the last observed cycle's
/// value, or assume recovery to the reference level r.
enum class W0Policy { last_observed, reference_level };

struct CloudPoint {
    std::size_t draw = 0;
    int cycle_index = 0;
    double t = 0.0;
    double value = 0.0;
};

struct BandRow {
    int cycle_index = 0;
    double t = 0.0;
    std::vector<double> quantiles;  // one per level
};

struct PredictiveCloud {
    std::vector<CloudPoint> points;
    std::vector<double> levels;
    std::vector<BandRow> bands;
};

/// Sample quantile, linear interpolation between order statistics
/// (Hyndman-Fan type 7). `sorted` must be ascending and non-empty.
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw ContractError("quantile of an empty sample");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline void check_levels(const std::vector<double>& levels) {
    if (levels.empty()) throw ConfigError("no quantile levels");
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (!(levels[i] >= 0.0 && levels[i] <= 1.0)) throw ConfigError("quantile levels must lie in [0, 1]");
        if (i > 0 && !(levels[i] > levels[i - 1])) throw ConfigError("quantile levels must be increasing");
    }
}

/// Per-(cycle, t) quantiles of the cloud, in plan order.
inline std::vector<BandRow> summarize(const std::vector<CloudPoint>& points, const std::vector<double>& levels) {
    check_levels(levels);
    std::vector<std::pair<int, double>> order;
    std::map<std::pair<int, double>, std::vector<double>> groups;
    for (const auto& p : points) {
        auto [it, fresh] = groups.try_emplace({p.cycle_index, p.t});
        if (fresh) order.emplace_back(p.cycle_index, p.t);
        it->second.push_back(p.value);
    }
    std::vector<BandRow> rows;
    for (const auto& key : order) {
        auto& v = groups[key];
        std::sort(v.begin(), v.end());
        BandRow row{key.first, key.second, {}};
        for (double q : levels) row.quantiles.push_back(quantile_sorted(v, q));
        rows.push_back(std::move(row));
    }
    return rows;
}

/// Posterior predictive cloud: one trajectory per posterior draw through
/// every planned (cycle, t) point. Does not modify the posterior.
inline PredictiveCloud predict(const CasePosterior& post, const DosePlan& plan, W0Policy policy,
                               const model::ModelConstants& consts, Rng& rng, bool noise = true,
                               std::vector<double> levels = {0.05, 0.5, 0.95}) {
    plan.validate(post.last_cycle());
    check_levels(levels);
    if (post.draws.empty()) throw ContractError("posterior has no draws");
    double w0 = consts.r;
    if (policy == W0Policy::last_observed) {
        if (!post.last_w0) throw ContractError("last-observed start level requested but no cycle was observed");
        w0 = *post.last_w0;
    }
    PredictiveCloud cloud;
    cloud.levels = std::move(levels);
    for (std::size_t d = 0; d < post.draws.size(); ++d) {
        const auto& p = post.draws[d];
        for (const auto& pc : plan.cycles) {
            model::CycleObservation cyc;
            cyc.cycle_index = pc.cycle_index;
            cyc.dose_std = pc.dose_std;
            cyc.w0 = w0;
            for (double t : pc.offsets) {
                const double m = model::mean_log_wbc(t, cyc, p, consts);
                cloud.points.push_back({d, pc.cycle_index, t, noise ? rng.normal(m, p.sigma) : m});
            }
        }
    }
    cloud.bands = summarize(cloud.points, cloud.levels);
    return cloud;
}

}  // namespace theramon::inference
