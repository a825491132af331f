#pragma once

// Piecewise log-WBC profile over one treatment cycle:
//   slope  lambda = k * dose * alpha
//   nadir  omega  = w0 - lambda * tau
//   mean(t) = w0 - lambda * t                                   for t <  tau
//           = omega + (r - omega) * (1 - exp(-gamma (t - tau)))  for t >= tau
// Observations are Normal around mean(t) with variance sigma^2.

#include <cmath>
#include <numbers>
#include <span>

#include "theramon/model/types.hpp"

namespace theramon::model {

inline double wbc_slope(double k, double dose_std, double alpha) { return k * dose_std * alpha; }

inline double nadir_of(double w0, double slope, double tau) { return w0 - slope * tau; }

/// Mean curve given slope and nadir; the two branches agree at t = tau.
inline double profile_mean(double t, double slope, double omega, double gamma, double tau, double w0, double r) {
    if (t < tau) return w0 - slope * t;
    return omega + (r - omega) * (1.0 - std::exp(-gamma * (t - tau)));
}

inline double mean_log_wbc(double t, const CycleObservation& cycle, const ResponseParams& p,
                           const ModelConstants& c) {
    const double slope = wbc_slope(c.k, cycle.dose_std, p.alpha);
    return profile_mean(t, slope, nadir_of(cycle.w0, slope, p.tau), p.gamma, p.tau, cycle.w0, c.r);
}

inline double nadir(const CycleObservation& cycle, const ResponseParams& p, const ModelConstants& c) {
    return nadir_of(cycle.w0, wbc_slope(c.k, cycle.dose_std, p.alpha), p.tau);
}

/// Sum of Normal log-densities of the cycle's observations.
inline double cycle_loglik(const CycleObservation& cycle, const ResponseParams& p, const ModelConstants& c) {
    const double var = p.sigma * p.sigma;
    const double norm = -0.5 * std::log(2.0 * std::numbers::pi * var);
    double ll = 0.0;
    for (std::size_t k = 0; k < cycle.size(); ++k) {
        const double d = cycle.wbc_log[k] - mean_log_wbc(cycle.times[k], cycle, p, c);
        ll += norm - d * d / (2.0 * var);
    }
    return ll;
}

// Deterministic functions registered with the network builders.
namespace fn {

/// args {alpha}, constants {k, dose}
inline double slope(std::span<const double> a, std::span<const double> c) { return wbc_slope(c[0], c[1], a[0]); }

/// args {slope, tau}, constants {w0}
inline double nadir(std::span<const double> a, std::span<const double> c) { return nadir_of(c[0], a[0], a[1]); }

/// args {slope, nadir, gamma, tau}, constants {t, w0, r}
inline double mean(std::span<const double> a, std::span<const double> c) {
    return profile_mean(c[0], a[0], a[1], a[2], a[3], c[1], c[2]);
}

}  // namespace fn

}  // namespace theramon::model
