#pragma once

// Reference computations used by the unit and acceptance tests. They are
// written directly from the model definition and do not call into the
// library's profile or sampler code.

#include <cmath>
#include <numbers>
#include <vector>

#include "theramon/model/types.hpp"

namespace oracle {

inline double mean(double t, double k, double dose, double alpha, double gamma, double tau, double w0, double r) {
    const double lam = k * dose * alpha;
    if (t < tau) return w0 - lam * t;
    const double om = w0 - lam * tau;
    return r - (r - om) * std::exp(-gamma * (t - tau));
}

/// Exact marginal posteriors of alpha, gamma and tau for one patient, by
/// enumerating every grid cell and integrating the Gamma(a, b) precision
/// out in closed form:
///   p(w | cell) = b^a / G(a) * G(a + n/2) / (b + SS/2)^(a + n/2) * (2 pi)^(-n/2)
struct Marginals {
    std::vector<double> alpha, gamma, tau;
};

inline Marginals enumerate(const theramon::model::PatientRecord& rec, const theramon::model::FixedPrior& prior,
                           const theramon::model::ModelConstants& c) {
    const auto& A = c.alpha_grid;
    const auto& G = c.gamma_grid;
    const auto& T = c.tau_grid;
    double n = 0.0;
    for (const auto& cy : rec.cycles) n += static_cast<double>(cy.times.size());
    std::vector<double> logp;
    double hi = -INFINITY;
    for (std::size_t i = 0; i < A.size(); ++i)
        for (std::size_t j = 0; j < G.size(); ++j)
            for (std::size_t l = 0; l < T.size(); ++l) {
                double ss = 0.0;
                for (const auto& cy : rec.cycles)
                    for (std::size_t k = 0; k < cy.times.size(); ++k) {
                        const double d = cy.wbc_log[k] - mean(cy.times[k], c.k, cy.dose_std, A[i], G[j], T[l], cy.w0, c.r);
                        ss += d * d;
                    }
                const double a = prior.a, b = prior.b;
                double lp = std::log(prior.pmf_alpha[i]) + std::log(prior.pmf_gamma[j]) + std::log(prior.pmf_tau[l]);
                lp += a * std::log(b) - std::lgamma(a) + std::lgamma(a + n / 2) - (a + n / 2) * std::log(b + ss / 2) -
                      n / 2 * std::log(2 * std::numbers::pi);
                logp.push_back(lp);
                hi = std::max(hi, lp);
            }
    Marginals m{std::vector<double>(A.size()), std::vector<double>(G.size()), std::vector<double>(T.size())};
    double z = 0.0;
    std::size_t cell = 0;
    for (std::size_t i = 0; i < A.size(); ++i)
        for (std::size_t j = 0; j < G.size(); ++j)
            for (std::size_t l = 0; l < T.size(); ++l) {
                const double w = std::exp(logp[cell++] - hi);
                m.alpha[i] += w;
                m.gamma[j] += w;
                m.tau[l] += w;
                z += w;
            }
    for (auto* v : {&m.alpha, &m.gamma, &m.tau})
        for (auto& x : *v) x /= z;
    return m;
}

inline double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
    return 0.5 * s;
}

}  // namespace oracle
