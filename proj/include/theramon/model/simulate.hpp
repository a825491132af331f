#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "theramon/model/profile.hpp"
#include "theramon/model/types.hpp"
#include "theramon/rng.hpp"

namespace theramon::model {

/// Dose and measurement schedule of one cycle.
struct CyclePlan {
    int cycle_index = 1;
    double dose_std = 0.0;
    std::vector<double> offsets;
};

/// Simulates one cycle's log-WBC measurements around the mean profile.
inline CycleObservation simulate_cycle(const CyclePlan& plan, double w0, const ResponseParams& p,
                                       const ModelConstants& c, Rng& rng, bool noise = true) {
    CycleObservation cyc;
    cyc.cycle_index = plan.cycle_index;
    cyc.dose_std = plan.dose_std;
    cyc.w0 = w0;
    cyc.times = plan.offsets;
    for (double t : plan.offsets) {
        const double m = mean_log_wbc(t, cyc, p, c);
        cyc.wbc_log.push_back(noise ? rng.normal(m, p.sigma) : m);
    }
    return cyc;
}

/// Simulates a patient whose every cycle starts from log-WBC `w0`.
inline PatientRecord simulate_patient(std::string id, const ResponseParams& p, const ModelConstants& c,
                                      const std::vector<CyclePlan>& schedule, double w0, Rng& rng) {
    PatientRecord rec;
    rec.patient_id = std::move(id);
    double t0 = 0.0;
    for (const auto& plan : schedule) {
        auto cyc = simulate_cycle(plan, w0, p, c, rng);
        cyc.t0 = t0;
        t0 += 21.0;
        rec.cycles.push_back(std::move(cyc));
    }
    return rec;
}

/// Level indices for n individuals that match `pmf` as closely as integer
/// counts allow (largest-remainder rounding), in random order.
inline std::vector<std::size_t> quota_levels(const std::vector<double>& pmf, std::size_t n, Rng& rng) {
    std::vector<std::size_t> count(pmf.size());
    std::vector<std::pair<double, std::size_t>> rem;
    std::size_t used = 0;
    for (std::size_t k = 0; k < pmf.size(); ++k) {
        const double exact = pmf[k] * static_cast<double>(n);
        count[k] = static_cast<std::size_t>(std::floor(exact));
        used += count[k];
        rem.emplace_back(exact - std::floor(exact), k);
    }
    std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; used < n; ++i, ++used) ++count[rem[i % rem.size()].second];
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < count.size(); ++k) out.insert(out.end(), count[k], k);
    std::shuffle(out.begin(), out.end(), rng);
    return out;
}

/// Shape of a synthetic cohort. Every patient gets `cycles` cycles of
/// `offsets` measurements; the first cycle starts at `w0` and each later
/// cycle starts from the previous cycle's noiseless level at day 21.
struct CohortSpec {
    std::size_t patients = 12;
    std::size_t cycles = 3;
    std::vector<double> offsets{2.0, 5.0, 9.0, 13.0, 18.0};
    std::vector<double> doses{8.0, 10.0, 12.0};  // cycled through by patient
    double w0 = 8.0;
    double sigma = 0.1;
    std::vector<double> pi_alpha{0.2, 0.5, 0.3};
    std::vector<double> pi_gamma{1.0 / 3, 1.0 / 3, 1.0 / 3};
    std::vector<double> pi_tau{1.0 / 3, 1.0 / 3, 1.0 / 3};
};

struct SyntheticCohort {
    std::vector<PatientRecord> records;
    std::vector<ResponseParams> truth;
};

inline SyntheticCohort synthetic_cohort(const CohortSpec& spec, const ModelConstants& c, Rng& rng) {
    const auto la = quota_levels(spec.pi_alpha, spec.patients, rng);
    const auto lg = quota_levels(spec.pi_gamma, spec.patients, rng);
    const auto lt = quota_levels(spec.pi_tau, spec.patients, rng);
    SyntheticCohort out;
    for (std::size_t i = 0; i < spec.patients; ++i) {
        const ResponseParams p{c.alpha_grid[la[i]], c.gamma_grid[lg[i]], c.tau_grid[lt[i]], spec.sigma};
        PatientRecord rec;
        rec.patient_id = "S" + std::to_string(i + 1);
        double w0 = spec.w0;
        for (std::size_t j = 1; j <= spec.cycles; ++j) {
            const CyclePlan plan{static_cast<int>(j), spec.doses[i % spec.doses.size()], spec.offsets};
            auto cyc = simulate_cycle(plan, w0, p, c, rng);
            cyc.t0 = 21.0 * static_cast<double>(j - 1);
            w0 = mean_log_wbc(21.0, cyc, p, c);
            rec.cycles.push_back(std::move(cyc));
        }
        out.records.push_back(std::move(rec));
        out.truth.push_back(p);
    }
    return out;
}

}  // namespace theramon::model
