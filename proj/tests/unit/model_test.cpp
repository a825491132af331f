#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "theramon/graph/gibbs.hpp"
#include "theramon/model/builders.hpp"
#include "theramon/model/profile.hpp"
#include "theramon/model/simulate.hpp"

using namespace theramon;
using namespace theramon::model;

namespace {

// Independent restatement of the mean curve, written from the model
// definition rather than calling into profile.hpp.
double oracle_mean(double t, double k, double dose, double alpha, double gamma, double tau, double w0, double r) {
    const double lam = k * dose * alpha;
    if (t < tau) return w0 - lam * t;
    const double om = w0 - lam * tau;
    return r - (r - om) * std::exp(-gamma * (t - tau));
}

CycleObservation cycle(double dose, double w0, std::vector<double> t = {}, std::vector<double> w = {}) {
    CycleObservation c;
    c.cycle_index = 1;
    c.dose_std = dose;
    c.w0 = w0;
    c.times = std::move(t);
    c.wbc_log = std::move(w);
    return c;
}

const ModelConstants kC{};

}  // namespace

TEST(Profile, WorkedExamples) {
    const auto c = cycle(10.0, 8.0);
    const ResponseParams p{1.5, 0.2, 8.0, 0.1};
    EXPECT_NEAR(mean_log_wbc(4.0, c, p, kC), 5.0, 1e-12);
    EXPECT_NEAR(mean_log_wbc(8.0, c, p, kC), 2.0, 1e-12);
    EXPECT_NEAR(mean_log_wbc(13.0, c, p, kC), 2.0 + 6.0 * (1.0 - std::exp(-1.0)), 1e-12);
    EXPECT_NEAR(nadir(c, p, kC), 2.0, 1e-12);
}

TEST(Profile, ZeroDoseStaysAtBaselineThenRelaxesToReference) {
    const auto c = cycle(0.0, 8.0);
    const ResponseParams p{1.5, 0.2, 8.0, 0.1};
    EXPECT_DOUBLE_EQ(mean_log_wbc(3.0, c, p, kC), 8.0);
    EXPECT_DOUBLE_EQ(nadir(c, p, kC), 8.0);
    auto low = cycle(0.0, 6.0);
    EXPECT_NEAR(mean_log_wbc(8.0 + 200.0, low, p, kC), kC.r, 1e-12);
}

TEST(Profile, MatchesIndependentOracle) {
    Rng rng(11);
    for (int n = 0; n < 500; ++n) {
        const double dose = 20.0 * rng.uniform(), w0 = 5.0 + 4.0 * rng.uniform();
        const ResponseParams p{kC.alpha_grid[rng.index(3)], kC.gamma_grid[rng.index(3)], kC.tau_grid[rng.index(3)],
                               0.1};
        const double t = 30.0 * rng.uniform();
        EXPECT_NEAR(mean_log_wbc(t, cycle(dose, w0), p, kC),
                    oracle_mean(t, kC.k, dose, p.alpha, p.gamma, p.tau, w0, kC.r), 1e-12);
    }
}

TEST(Profile, ContinuousAtChangepoint) {
    Rng rng(3);
    for (int n = 0; n < 1000; ++n) {
        const double dose = 20.0 * rng.uniform(), w0 = 4.0 + 6.0 * rng.uniform();
        const ResponseParams p{1.0 + rng.uniform(), 0.05 + rng.uniform(), 2.0 + 10.0 * rng.uniform(), 0.1};
        const auto c = cycle(dose, w0);
        const double left = w0 - wbc_slope(kC.k, dose, p.alpha) * p.tau;
        EXPECT_LT(std::abs(mean_log_wbc(p.tau, c, p, kC) - left), 1e-12);
        EXPECT_LT(std::abs(mean_log_wbc(std::nextafter(p.tau, 0.0), c, p, kC) - left), 1e-12);
    }
}

TEST(Profile, DeclinesThenRecoversMonotonically) {
    const auto c = cycle(12.0, 8.0);
    for (double alpha : kC.alpha_grid)
        for (double tau : kC.tau_grid) {
            const ResponseParams p{alpha, 0.2, tau, 0.1};
            double prev = mean_log_wbc(0.0, c, p, kC);
            for (double t = 0.25; t < tau; t += 0.25) {
                const double m = mean_log_wbc(t, c, p, kC);
                EXPECT_LT(m, prev);
                prev = m;
            }
            prev = mean_log_wbc(tau, c, p, kC);
            for (double t = tau + 0.25; t < tau + 40.0; t += 0.25) {
                const double m = mean_log_wbc(t, c, p, kC);
                EXPECT_GT(m, prev);
                prev = m;
            }
        }
}

TEST(Profile, ApproachesReferenceLevel) {
    const auto c = cycle(15.0, 8.0);
    for (double g : kC.gamma_grid) {
        const ResponseParams p{2.0, g, 10.0, 0.1};
        EXPECT_LT(std::abs(mean_log_wbc(p.tau + 60.0 / g, c, p, kC) - kC.r), 1e-9);
    }
}

TEST(Profile, HigherSensitivityGivesDeeperNadir) {
    const auto c = cycle(10.0, 8.0);
    double prev = INFINITY;
    for (double alpha : kC.alpha_grid) {
        const double n = nadir(c, {alpha, 0.2, 8.0, 0.1}, kC);
        EXPECT_LT(n, prev);
        prev = n;
    }
}

TEST(Likelihood, EmptyCycleIsZero) { EXPECT_EQ(cycle_loglik(cycle(10.0, 8.0), {}, kC), 0.0); }

TEST(Likelihood, ZeroResidualAndPointwiseOracle) {
    const ResponseParams p{1.5, 0.2, 8.0, 0.3};
    auto c = cycle(10.0, 8.0, {2.0}, {});
    c.wbc_log = {mean_log_wbc(2.0, c, p, kC)};
    EXPECT_NEAR(cycle_loglik(c, p, kC), -0.5 * std::log(2.0 * std::numbers::pi * 0.09), 1e-12);

    auto d = cycle(10.0, 8.0, {1.0, 5.0, 8.0, 12.0, 20.0}, {7.4, 5.9, 3.8, 5.0, 7.1});
    double want = 0.0;
    for (std::size_t k = 0; k < d.size(); ++k) {
        const double m = oracle_mean(d.times[k], kC.k, 10.0, p.alpha, p.gamma, p.tau, 8.0, kC.r);
        want += -0.5 * std::log(2.0 * std::numbers::pi) - std::log(p.sigma) -
                (d.wbc_log[k] - m) * (d.wbc_log[k] - m) / (2.0 * p.sigma * p.sigma);
    }
    EXPECT_NEAR(cycle_loglik(d, p, kC), want, 1e-12);
}

TEST(Constants, RejectShortOrUnsortedGrids) {
    ModelConstants c;
    c.alpha_grid = {1.0, 2.0};
    EXPECT_THROW(c.validate(), ConfigError);
    c.alpha_grid = {1.0, 3.0, 2.0};
    EXPECT_THROW(c.validate(), ConfigError);
    c = ModelConstants{};
    c.k = 0.0;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Records, ValidationAndPrefix) {
    PatientRecord r{"p1", {}, {cycle(10.0, 8.0, {1.0, 2.0}, {7.0, 6.5})}};
    auto c2 = cycle(10.0, 7.5, {3.0}, {6.0});
    c2.cycle_index = 2;
    r.cycles.push_back(c2);
    EXPECT_NO_THROW(r.validate());
    EXPECT_EQ(r.prefix(1).cycles.size(), 1u);
    EXPECT_EQ(r.observation_count(), 3u);
    r.cycles[1].cycle_index = 3;
    EXPECT_THROW(r.validate(), DataError);
    auto bad = cycle(10.0, 8.0, {2.0, 1.0}, {1.0, 1.0});
    EXPECT_THROW(bad.validate(), DataError);
}

namespace {

std::vector<PatientRecord> cohort(std::size_t patients, std::size_t cycles, std::size_t obs) {
    std::vector<PatientRecord> db;
    Rng rng(5);
    for (std::size_t i = 1; i <= patients; ++i) {
        std::vector<CyclePlan> plan;
        for (std::size_t j = 1; j <= cycles; ++j) {
            CyclePlan cp{static_cast<int>(j), 10.0, {}};
            for (std::size_t k = 1; k <= obs; ++k) cp.offsets.push_back(3.0 * static_cast<double>(k));
            plan.push_back(cp);
        }
        db.push_back(simulate_patient("p" + std::to_string(i), {1.5, 0.2, 8.0, 0.1}, kC, plan, 8.0, rng));
    }
    return db;
}

}  // namespace

TEST(Builders, PopulationNodeCounts) {
    const auto db = cohort(11, 3, 5);
    const auto net = build_population_network(db, HyperpriorConfig{}, kC);
    EXPECT_EQ(net.count(graph::NodeKind::observed), 165u);
    EXPECT_EQ(net.size(), expected_node_count(db, true));
    EXPECT_EQ(net.size(), 5u + 11u * (4u + 3u * (2u + 5u)));
}

TEST(Builders, SinglePatientCounts) {
    const auto db = cohort(1, 1, 5);
    const auto prior = FixedPrior::uniform(kC, 2.0, 0.1);
    const auto net = build_patient_network(db[0], prior, kC);
    EXPECT_EQ(net.size(), 4u + 2u + 5u);
    const auto pop = build_population_network(db, HyperpriorConfig{}, kC);
    EXPECT_EQ(pop.size(), 4u + 2u + 5u + 5u);
}

TEST(Builders, CycleWithoutObservationsHasOnlyDeterministicNodes) {
    PatientRecord r{"p", {}, {cycle(10.0, 8.0)}};
    const auto net = build_patient_network(r, FixedPrior::uniform(kC, 2.0, 0.1), kC);
    EXPECT_EQ(net.size(), 6u);
    EXPECT_EQ(net.count(graph::NodeKind::deterministic), 2u);
    EXPECT_TRUE(net.children(ids::precision(1)).empty());
}

TEST(Builders, ObservedValuesAndIds) {
    const auto db = cohort(2, 2, 3);
    const auto net = build_population_network(db, HyperpriorConfig{}, kC);
    EXPECT_DOUBLE_EQ(net.scalar(ids::w(2, 2, 3)), db[1].cycles[1].wbc_log[2]);
    EXPECT_EQ(net.parents(ids::alpha(1)), (std::vector<graph::NodeId>{ids::pi_alpha}));
    EXPECT_EQ(net.parents(ids::omega(1, 2)), (std::vector<graph::NodeId>{ids::lambda(1, 2), ids::tau(1)}));
}

TEST(Builders, DeterministicNodesTrackTheProfile) {
    const auto db = cohort(1, 1, 2);
    auto net = build_patient_network(db[0], FixedPrior::uniform(kC, 2.0, 0.1), kC);
    net.set_value(ids::alpha(1), 2.0);
    net.set_value(ids::tau(1), 10.0);
    EXPECT_NEAR(net.scalar(ids::lambda(1, 1)), 0.05 * 10.0 * 2.0, 1e-12);
    EXPECT_NEAR(net.scalar(ids::omega(1, 1)), 8.0 - 1.0 * 10.0, 1e-12);
}

TEST(Builders, DuplicateIdsAndEmptyDatabase) {
    auto db = cohort(2, 1, 1);
    db[1].patient_id = db[0].patient_id;
    EXPECT_THROW(build_population_network(db, HyperpriorConfig{}, kC), StructuralError);
    EXPECT_THROW(build_population_network({}, HyperpriorConfig{}, kC), ContractError);
}

TEST(Builders, SensitivityBlanketInPopulationNetwork) {
    const auto db = cohort(2, 2, 2);
    const auto net = build_population_network(db, HyperpriorConfig{}, kC);
    const auto mb = graph::markov_blanket(net, ids::alpha(1));
    const std::set<graph::NodeId> want{ids::pi_alpha,     ids::gamma(1),      ids::tau(1),        ids::precision(1),
                                       ids::w(1, 1, 1),    ids::w(1, 1, 2),    ids::w(1, 2, 1),    ids::w(1, 2, 2)};
    EXPECT_EQ(mb, want);
}

TEST(Builders, PatientsAreConditionallyIndependent) {
    const auto db = cohort(3, 1, 2);
    const auto net = build_population_network(db, HyperpriorConfig{}, kC);
    const auto mb = graph::markov_blanket(net, ids::tau(2));
    for (const auto& id : mb) {
        EXPECT_EQ(id.find("[1"), std::string::npos) << id;
        EXPECT_EQ(id.find("[3"), std::string::npos) << id;
    }
}

TEST(Builders, EverySamplerIsAvailable) {
    const auto db = cohort(2, 2, 2);
    const auto net = build_population_network(db, HyperpriorConfig{}, kC);
    for (std::size_t i = 0; i < net.size(); ++i)
        if (net.spec(i).kind == graph::NodeKind::stochastic)
            EXPECT_NO_THROW(graph::choose_sampler(net, i)) << net.spec(i).id;
}

TEST(Simulate, NoiselessCycleFollowsTheMean) {
    Rng rng(1);
    const ResponseParams p{1.5, 0.2, 8.0, 0.1};
    const auto c = simulate_cycle({1, 10.0, {1.0, 8.0, 15.0}}, 8.0, p, kC, rng, false);
    for (std::size_t k = 0; k < c.size(); ++k)
        EXPECT_DOUBLE_EQ(c.wbc_log[k], oracle_mean(c.times[k], kC.k, 10.0, 1.5, 0.2, 8.0, 8.0, kC.r));
}
