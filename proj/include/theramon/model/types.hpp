#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "theramon/errors.hpp"
#include "theramon/graph/dist.hpp"

namespace theramon::model {

/// One treatment cycle. Times are offsets in days from drug administration;
/// log-WBC values use the natural logarithm.
struct CycleObservation {
    int cycle_index = 1;
    double dose_std = 0.0;  // dose per m^2 body surface
    double t0 = 0.0;        // administration time, days (bookkeeping only)
    double w0 = 0.0;        // log-WBC at administration
    std::vector<double> times;
    std::vector<double> wbc_log;

    std::size_t size() const { return times.size(); }

    void validate() const {
        const auto where = "cycle " + std::to_string(cycle_index);
        if (times.size() != wbc_log.size()) throw DataError(where + ": times and wbc_log differ in length");
        if (!(dose_std >= 0.0) || !std::isfinite(dose_std)) throw DataError(where + ": dose_std must be >= 0");
        if (!std::isfinite(w0) || !std::isfinite(t0)) throw DataError(where + ": w0 and t0 must be finite");
        for (std::size_t k = 0; k < times.size(); ++k) {
            if (!(times[k] > 0.0) || !std::isfinite(times[k]))
                throw DataError(where + ": measurement offsets must be > 0");
            if (k > 0 && !(times[k] > times[k - 1]))
                throw DataError(where + ": measurement offsets must be strictly increasing");
            if (!std::isfinite(wbc_log[k])) throw DataError(where + ": log-WBC values must be finite");
        }
    }

    bool operator==(const CycleObservation&) const = default;
};

struct PatientRecord {
    std::string patient_id;
    std::vector<std::pair<std::string, std::string>> covariates;  // carried, not modeled
    std::vector<CycleObservation> cycles;

    std::size_t observation_count() const {
        std::size_t n = 0;
        for (const auto& c : cycles) n += c.size();
        return n;
    }

    /// Record restricted to cycles 1..last.
    PatientRecord prefix(int last) const {
        PatientRecord out{patient_id, covariates, {}};
        for (const auto& c : cycles)
            if (c.cycle_index <= last) out.cycles.push_back(c);
        return out;
    }

    void validate() const {
        if (patient_id.empty()) throw DataError("patient record without id");
        for (std::size_t j = 0; j < cycles.size(); ++j) {
            if (cycles[j].cycle_index != static_cast<int>(j + 1))
                throw DataError("patient '" + patient_id + "': cycle indices must be contiguous from 1");
            cycles[j].validate();
        }
    }

    bool operator==(const PatientRecord&) const = default;
};

struct ResponseParams {
    double alpha = 1.0;  // sensitivity level
    double gamma = 0.2;  // recovery rate, 1/day
    double tau = 8.0;    // changepoint, days after administration
    double sigma = 0.1;  // noise sd, log-count units

    bool operator==(const ResponseParams&) const = default;
};

inline void check_grid(const std::vector<double>& g, const char* name) {
    if (g.size() < 3 || !graph::strictly_increasing(g))
        throw ConfigError(std::string("grid '") + name + "' must have >= 3 strictly increasing entries");
}

/// Model constants and parameter level grids. Only the sensitivity grid
/// {1, 1.5, 2} has a clinical reading (normal / sensitive / very sensitive);
/// k, r and the recovery-rate and changepoint grids are configurable
/// defaults.
struct ModelConstants {
    double k = 0.05;  // log-WBC fall per day per unit dose, normal patient
    double r = 8.0;   // normal log-WBC level
    std::vector<double> alpha_grid{1.0, 1.5, 2.0};
    std::vector<double> gamma_grid{0.1, 0.2, 0.4};
    std::vector<double> tau_grid{6.0, 8.0, 10.0};

    void validate() const {
        if (!(k > 0.0) || !std::isfinite(k)) throw ConfigError("k must be > 0");
        if (!std::isfinite(r)) throw ConfigError("r must be finite");
        check_grid(alpha_grid, "alpha");
        check_grid(gamma_grid, "gamma");
        check_grid(tau_grid, "tau");
        if (gamma_grid.front() <= 0.0) throw ConfigError("recovery rates must be > 0");
        if (tau_grid.front() <= 0.0) throw ConfigError("changepoints must be > 0");
    }

    bool operator==(const ModelConstants&) const = default;
};

inline void check_pmf(const std::vector<double>& p, std::size_t n, const char* name, double tol = 1e-12) {
    if (p.size() != n) throw ConfigError(std::string(name) + ": wrong number of levels");
    double s = 0.0;
    for (double v : p) {
        if (!(v >= 0.0)) throw ConfigError(std::string(name) + ": negative probability");
        s += v;
    }
    if (std::abs(s - 1.0) > tol) throw ConfigError(std::string(name) + ": probabilities do not sum to 1");
}

/// Population hyperparameters: level pmfs and the Gamma(a, b) prior on the
/// noise precision.
struct Hyperparams {
    std::vector<double> pi_alpha;
    std::vector<double> pi_gamma;
    std::vector<double> pi_tau;
    double a = 1.0;
    double b = 1.0;
    std::vector<double> beta;  // covariate effects, carried only

    void validate(std::size_t levels = 3) const {
        check_pmf(pi_alpha, levels, "pi_alpha", 1e-9);
        check_pmf(pi_gamma, levels, "pi_gamma", 1e-9);
        check_pmf(pi_tau, levels, "pi_tau", 1e-9);
        if (!(a > 0.0) || !(b > 0.0)) throw ConfigError("a and b must be > 0");
    }
};

/// Vague hyperpriors for population fitting: symmetric Dirichlet on each
/// level pmf and uniform grids for the precision prior's shape and rate.
struct HyperpriorConfig {
    double concentration = 1.0;
    std::vector<double> a_grid{0.5, 1.0, 2.0, 4.0, 8.0};
    std::vector<double> b_grid{0.01, 0.03, 0.1, 0.3, 1.0};

    void validate() const {
        if (!(concentration > 0.0)) throw ConfigError("Dirichlet concentration must be > 0");
        for (const auto* g : {&a_grid, &b_grid}) {
            if (g->empty() || !graph::strictly_increasing(*g) || g->front() <= 0.0)
                throw ConfigError("precision hyperprior grids must be non-empty, increasing and positive");
        }
    }

    bool operator==(const HyperpriorConfig&) const = default;
};

/// Fixed priors for a single case: level pmfs plus Gamma(a, b) on precision.
struct FixedPrior {
    std::vector<double> pmf_alpha;
    std::vector<double> pmf_gamma;
    std::vector<double> pmf_tau;
    double a = 1.0;
    double b = 1.0;

    static FixedPrior uniform(const ModelConstants& c, double a, double b) {
        auto u = [](std::size_t n) { return std::vector<double>(n, 1.0 / static_cast<double>(n)); };
        return {u(c.alpha_grid.size()), u(c.gamma_grid.size()), u(c.tau_grid.size()), a, b};
    }

    void validate(const ModelConstants& c) const {
        check_pmf(pmf_alpha, c.alpha_grid.size(), "pmf_alpha", 1e-9);
        check_pmf(pmf_gamma, c.gamma_grid.size(), "pmf_gamma", 1e-9);
        check_pmf(pmf_tau, c.tau_grid.size(), "pmf_tau", 1e-9);
        if (!(a > 0.0) || !(b > 0.0)) throw ConfigError("precision prior needs a, b > 0");
    }
};

}  // namespace theramon::model
