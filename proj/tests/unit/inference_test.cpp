#include <gtest/gtest.h>

#include <cmath>

#include "theramon/inference/case_update.hpp"
#include "theramon/inference/collapse.hpp"
#include "theramon/inference/diagnostics.hpp"
#include "theramon/inference/population.hpp"
#include "theramon/inference/predict.hpp"
#include "theramon/model/simulate.hpp"
#include "support/oracles.hpp"

using namespace theramon;
using namespace theramon::inference;
using model::ModelConstants;
using model::PatientRecord;
using model::ResponseParams;

namespace {

const ModelConstants kC{};

PatientRecord patient(const std::string& id, const ResponseParams& p, int cycles, Rng& rng) {
    std::vector<model::CyclePlan> plan;
    for (int j = 1; j <= cycles; ++j) plan.push_back({j, 10.0, {2.0, 5.0, 8.0, 12.0, 16.0}});
    return model::simulate_patient(id, p, kC, plan, 8.0, rng);
}

std::vector<PatientRecord> small_cohort() {
    Rng rng(17);
    return {patient("a", {1.0, 0.2, 8.0, 0.2}, 2, rng), patient("b", {2.0, 0.4, 6.0, 0.2}, 2, rng),
            patient("c", {1.5, 0.1, 10.0, 0.2}, 2, rng)};
}

model::Hyperparams hp(std::vector<double> pa, double a, double b) { return {pa, pa, pa, a, b, {}}; }

}  // namespace

TEST(Population, DefaultChainKeepsEightyDraws) {
    const auto pop = population_update(small_cohort(), kC, {}, {});
    ASSERT_EQ(pop.draws.size(), 80u);
    const model::HyperpriorConfig h;
    for (const auto& d : pop.draws) {
        EXPECT_NO_THROW(d.validate());
        EXPECT_NE(std::find(h.a_grid.begin(), h.a_grid.end(), d.a), h.a_grid.end());
        EXPECT_NE(std::find(h.b_grid.begin(), h.b_grid.end(), d.b), h.b_grid.end());
    }
    EXPECT_EQ(pop.db_digest, database_digest(small_cohort()));
}

TEST(Population, SeedDeterminesTheDraws) {
    ChainSettings s;
    s.seed = 9;
    const auto x = population_update(small_cohort(), kC, {}, s);
    const auto y = population_update(small_cohort(), kC, {}, s);
    EXPECT_EQ(x.store, y.store);
}

TEST(Population, DigestTracksContent) {
    auto db = small_cohort();
    const auto d0 = database_digest(db);
    db[1].cycles[0].wbc_log[2] += 1e-9;
    EXPECT_NE(database_digest(db), d0);
    EXPECT_EQ(d0.size(), 16u);
}

TEST(Population, EmptyDatabaseIsRejected) { EXPECT_THROW(population_update({}, kC, {}, {}), DataError); }

TEST(Collapse, ClosedFormAveragesPmfs) {
    PopulationPosterior pop;
    pop.consts = kC;
    pop.draws = {hp({0.2, 0.3, 0.5}, 2.0, 0.1), hp({0.6, 0.2, 0.2}, 2.0, 0.1), hp({0.1, 0.1, 0.8}, 4.0, 0.3)};
    Rng rng(1);
    const auto cp = collapse(pop, {}, 1, CollapseMode::closed_form, rng);
    const std::vector<double> want{0.3, 0.2, 0.5};
    for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_NEAR(cp.pmf_alpha[k], want[k], 1e-12);
        EXPECT_NEAR(cp.pmf_tau[k], want[k], 1e-12);
    }
    EXPECT_EQ(cp.a, 2.0);
    EXPECT_EQ(cp.b, 0.1);
    EXPECT_EQ(cp.draws_used, 3u);
}

TEST(Collapse, SampledModeConvergesToClosedForm) {
    PopulationPosterior pop;
    pop.consts = kC;
    pop.draws = {hp({0.2, 0.3, 0.5}, 2.0, 0.1), hp({0.6, 0.2, 0.2}, 2.0, 0.1)};
    Rng rng(4);
    const auto cf = collapse(pop, {}, 1, CollapseMode::closed_form, rng);
    const auto sm = collapse(pop, {}, 100000, CollapseMode::sampled, rng);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(sm.pmf_gamma[k], cf.pmf_gamma[k], 0.01);
    double s = 0.0;
    for (double v : sm.pmf_alpha) s += v;
    EXPECT_NEAR(s, 1.0, 1e-9);
}

TEST(Collapse, DegenerateMixtures) {
    PopulationPosterior pop;
    pop.consts = kC;
    pop.draws = {hp({0.2, 0.5, 0.3}, 2.0, 0.1)};
    Rng rng(1);
    EXPECT_EQ(collapse(pop, {}, 1, CollapseMode::closed_form, rng).pmf_alpha, (std::vector<double>{0.2, 0.5, 0.3}));
    pop.draws = {hp({1, 0, 0}, 2.0, 0.1), hp({0, 1, 0}, 2.0, 0.1)};
    EXPECT_EQ(collapse(pop, {}, 1, CollapseMode::closed_form, rng).pmf_alpha, (std::vector<double>{0.5, 0.5, 0.0}));
}

TEST(Population, UninformativeSensitivityKeepsThePriorMean) {
    // zero dose: alpha never enters the likelihood
    Rng rng(12);
    std::vector<model::CyclePlan> plan{{1, 0.0, {2.0, 5.0, 8.0}}};
    const std::vector<PatientRecord> db{model::simulate_patient("z", {1.5, 0.2, 8.0, 0.2}, kC, plan, 8.0, rng)};
    ChainSettings s;
    s.sweeps = 10100;
    s.burn_in = 100;
    s.thin = 1;
    const auto pop = population_update(db, kC, {}, s);
    ASSERT_GE(pop.draws.size(), 10000u);
    for (double v : pop.mean_pmf("alpha")) EXPECT_NEAR(v, 1.0 / 3.0, 0.02);
}

TEST(Collapse, PrecisionModeTiesGoToSmallestPair) {
    const std::vector<model::Hyperparams> d{hp({1, 0, 0}, 4.0, 0.1), hp({1, 0, 0}, 2.0, 0.3)};
    EXPECT_EQ(precision_prior_mode(d), (std::pair<double, double>{2.0, 0.3}));
}

TEST(Collapse, RejectsZeroDraws) {
    PopulationPosterior pop;
    pop.consts = kC;
    pop.draws = {hp({0.2, 0.3, 0.5}, 2.0, 0.1)};
    Rng rng(1);
    EXPECT_THROW(collapse(pop, {}, 0, CollapseMode::sampled, rng), ConfigError);
}

namespace {

CasePrior uniform_prior(double a = 2.0, double b = 0.1) {
    CasePrior p;
    p.consts = kC;
    p.pmf_alpha = p.pmf_gamma = p.pmf_tau = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    p.a = a;
    p.b = b;
    return p;
}

}  // namespace

TEST(CaseUpdate, NoObservationsReturnsThePrior) {
    CasePrior prior = uniform_prior();
    prior.pmf_alpha = {0.5, 0.3, 0.2};
    const PatientRecord empty{"x", {}, {}};
    const auto post = case_update(prior, empty, {});
    EXPECT_EQ(post.pmf_alpha, prior.pmf_alpha);
    EXPECT_EQ(post.pmf_tau, prior.pmf_tau);
    EXPECT_TRUE(post.from_prior);
    EXPECT_EQ(post.draws.size(), 80u);
    EXPECT_FALSE(post.last_w0.has_value());
}

TEST(CaseUpdate, MarginalsAreDrawFrequencies) {
    Rng rng(2);
    const auto rec = patient("p", {2.0, 0.2, 8.0, 0.2}, 2, rng);
    const auto post = case_update(uniform_prior(), rec, {});
    ASSERT_EQ(post.draws.size(), 80u);
    std::vector<double> f(3, 0.0);
    for (const auto& d : post.draws) f[graph::level_index(kC.alpha_grid, d.alpha)] += 1.0 / 80.0;
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(post.pmf_alpha[k], f[k], 1e-12);
    EXPECT_EQ(post.window, (std::vector<int>{1, 2}));
    EXPECT_EQ(post.last_w0, 8.0);
    for (const auto& d : post.draws) EXPECT_GT(d.sigma, 0.0);
}

TEST(CaseUpdate, InformativeDataConcentratesOnTheTruth) {
    Rng rng(8);
    const auto rec = patient("p", {2.0, 0.2, 8.0, 0.15}, 3, rng);
    ChainSettings s;
    s.sweeps = 2000;
    s.burn_in = 200;
    s.thin = 2;
    const auto post = case_update(uniform_prior(), rec, s);
    EXPECT_GT(post.pmf_alpha[2], 0.8);
}

TEST(CaseUpdate, MatchesCellEnumeration) {
    Rng rng(21);
    std::vector<model::CyclePlan> plan{{1, 10.0, {2.0, 5.0, 9.0, 13.0, 18.0}}};
    const auto rec = model::simulate_patient("e", {1.5, 0.2, 8.0, 0.6}, kC, plan, 8.0, rng);
    const auto prior = uniform_prior(2.0, 0.5);
    ChainSettings s;
    s.sweeps = 400500;
    s.burn_in = 500;
    s.thin = 20;
    const auto post = case_update(prior, rec, s);
    ASSERT_EQ(post.draws.size(), 20000u);
    const auto exact = oracle::enumerate(rec, prior.as_fixed_prior(), kC);
    EXPECT_LT(oracle::total_variation(post.pmf_alpha, exact.alpha), 0.02);
    EXPECT_LT(oracle::total_variation(post.pmf_gamma, exact.gamma), 0.02);
    EXPECT_LT(oracle::total_variation(post.pmf_tau, exact.tau), 0.02);
}

TEST(CaseUpdate, TinyNoiseIdentifiesSensitivityAfterOneCycle) {
    Rng rng(5);
    std::vector<model::CyclePlan> plan{{1, 10.0, {2.0, 5.0, 9.0, 13.0, 18.0}}};
    const auto rec = model::simulate_patient("s", {2.0, 0.2, 8.0, 0.02}, kC, plan, 8.0, rng);
    const auto exact = oracle::enumerate(rec, uniform_prior().as_fixed_prior(), kC);
    EXPECT_GT(exact.alpha[2], 0.99);
    const auto post = case_update(uniform_prior(), rec, {});
    EXPECT_GT(post.pmf_alpha[2], 0.99);
}

TEST(CaseUpdate, PrefixLimitsTheWindow) {
    Rng rng(2);
    const auto rec = patient("p", {2.0, 0.2, 8.0, 0.2}, 3, rng);
    const auto post = case_update(uniform_prior(), rec.prefix(1), {});
    EXPECT_EQ(post.window, (std::vector<int>{1}));
    EXPECT_EQ(post.last_cycle(), 1);
}

TEST(Predict, QuantilesFollowLinearInterpolation) {
    const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
    EXPECT_DOUBLE_EQ(quantile_sorted(v, 0.5), 2.5);
    EXPECT_DOUBLE_EQ(quantile_sorted(v, 0.05), 1.15);
    EXPECT_DOUBLE_EQ(quantile_sorted(v, 1.0), 4.0);
    EXPECT_DOUBLE_EQ(quantile_sorted({7.0}, 0.3), 7.0);
}

namespace {

CasePosterior point_posterior(const ResponseParams& p, std::size_t n) {
    CasePosterior post;
    post.draws.assign(n, p);
    post.window = {1, 2};
    post.last_w0 = 7.5;
    post.prior = uniform_prior();
    return post;
}

DosePlan plan34() { return {{{3, 10.0, {2.0, 8.0, 14.0}}, {4, 5.0, {4.0, 9.0}}}}; }

}  // namespace

TEST(Predict, CloudShapeAndNoiselessMeans) {
    const ResponseParams p{1.5, 0.2, 8.0, 0.3};
    const auto post = point_posterior(p, 7);
    Rng rng(1);
    const auto cloud = predict(post, plan34(), W0Policy::last_observed, kC, rng, false);
    EXPECT_EQ(cloud.points.size(), 7u * 5u);
    ASSERT_EQ(cloud.bands.size(), 5u);
    model::CycleObservation c;
    c.dose_std = 10.0;
    c.w0 = 7.5;
    const double m = model::mean_log_wbc(8.0, c, p, kC);
    EXPECT_EQ(cloud.bands[1].cycle_index, 3);
    for (double q : cloud.bands[1].quantiles) EXPECT_DOUBLE_EQ(q, m);

    const auto ref = predict(post, plan34(), W0Policy::reference_level, kC, rng, false);
    EXPECT_DOUBLE_EQ(ref.points[0].value, kC.r - 0.05 * 10.0 * 1.5 * 2.0);
}

TEST(Predict, NoiseVarianceMatchesSigma) {
    const ResponseParams p{1.5, 0.2, 8.0, 0.3};
    const auto post = point_posterior(p, 1);
    Rng rng(9);
    const DosePlan plan{{{3, 10.0, {4.0}}}};
    double s1 = 0.0, s2 = 0.0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const double v = predict(post, plan, W0Policy::last_observed, kC, rng).points[0].value;
        s1 += v;
        s2 += v * v;
    }
    const double var = (s2 - s1 * s1 / n) / (n - 1);
    EXPECT_NEAR(var, 0.09, 0.05 * 0.09);
}

TEST(Predict, ZeroDoseGivesAFlatBand) {
    const auto post = point_posterior({2.0, 0.4, 6.0, 0.3}, 5);
    Rng rng(1);
    const auto cloud = predict(post, {{{3, 0.0, {1.0, 10.0, 20.0}}}}, W0Policy::reference_level, kC, rng, false);
    for (const auto& b : cloud.bands)
        for (double q : b.quantiles) EXPECT_DOUBLE_EQ(q, kC.r);
}

TEST(Predict, PlanMustContinueTheWindow) {
    const auto post = point_posterior({1.5, 0.2, 8.0, 0.3}, 2);
    Rng rng(1);
    DosePlan gap{{{4, 10.0, {1.0}}}};
    EXPECT_THROW(predict(post, gap, W0Policy::last_observed, kC, rng), ContractError);
    DosePlan skip{{{3, 10.0, {1.0}}, {5, 10.0, {1.0}}}};
    EXPECT_THROW(predict(post, skip, W0Policy::last_observed, kC, rng), ContractError);
    EXPECT_THROW(predict(post, plan34(), W0Policy::last_observed, kC, rng, true, {0.9, 0.1}), ConfigError);
    DosePlan unsorted{{{3, 10.0, {5.0, 1.0}}}};
    EXPECT_THROW(predict(post, unsorted, W0Policy::last_observed, kC, rng), ContractError);
}

TEST(Predict, LeavesThePosteriorUntouchedAndIsSeeded) {
    Rng g(3);
    const auto rec = patient("p", {1.5, 0.2, 8.0, 0.2}, 2, g);
    const auto post = case_update(uniform_prior(), rec, {});
    const auto before = post.store;
    Rng r1(42), r2(42);
    const auto x = predict(post, plan34(), W0Policy::last_observed, kC, r1);
    const auto y = predict(post, plan34(), W0Policy::last_observed, kC, r2);
    EXPECT_EQ(post.store, before);
    ASSERT_EQ(x.points.size(), y.points.size());
    for (std::size_t i = 0; i < x.points.size(); ++i) EXPECT_EQ(x.points[i].value, y.points[i].value);
}

TEST(Diagnostics, FewerThanTwoDrawsIsUnavailable) {
    graph::SampleStore s({"x"}, 0, 1, 1);
    s.append({1.0});
    s.finalize(1);
    const auto rep = trace_diagnostics(s);
    EXPECT_FALSE(rep.available);
    EXPECT_FALSE(rep.note.empty());
}

TEST(Diagnostics, ConstantTraceHasNoAutocorrelation) {
    graph::SampleStore s({"x"}, 0, 1, 1);
    for (int i = 0; i < 10; ++i) s.append({3.0});
    s.finalize(10);
    const auto rep = trace_diagnostics(s);
    ASSERT_TRUE(rep.available);
    EXPECT_FALSE(rep.columns[0].acf.has_value());
    EXPECT_TRUE(rep.columns[0].stationary);
    EXPECT_DOUBLE_EQ(rep.columns[0].running_mean.back(), 3.0);
}

TEST(Diagnostics, ConstantTraceWithInexactMeanHasNoAutocorrelation) {
    graph::SampleStore s({"gamma"}, 0, 1, 1);
    for (int i = 0; i < 80; ++i) s.append({0.1});
    s.finalize(80);
    const auto rep = trace_diagnostics(s);
    EXPECT_FALSE(rep.columns[0].acf.has_value());
    EXPECT_EQ(rep.columns[0].sd, 0.0);
    EXPECT_EQ(rep.columns[0].mean, 0.1);
}

TEST(Diagnostics, RampIsFlaggedAndAr1LagMatches) {
    graph::SampleStore s({"ramp", "ar"}, 0, 1, 1);
    Rng rng(6);
    double x = 0.0;
    const std::size_t n = 20000;
    for (std::size_t i = 0; i < n; ++i) {
        x = 0.6 * x + rng.normal(0.0, 1.0);
        s.append({static_cast<double>(i), x});
    }
    s.finalize(n);
    const auto rep = trace_diagnostics(s);
    EXPECT_FALSE(rep.columns[0].stationary);
    EXPECT_TRUE(rep.columns[1].stationary);
    ASSERT_TRUE(rep.columns[1].acf.has_value());
    EXPECT_EQ(rep.columns[1].acf->size(), 20u);
    EXPECT_NEAR((*rep.columns[1].acf)[0], 0.6, 0.02);
    EXPECT_NEAR((*rep.columns[1].acf)[1], 0.36, 0.03);
}

TEST(Diagnostics, IndependentDrawsAreUncorrelated) {
    graph::SampleStore s({"level"}, 0, 1, 1);
    Rng rng(13);
    for (int i = 0; i < 5000; ++i) s.append({kC.alpha_grid[sample_level({0.2, 0.5, 0.3}, rng)]});
    s.finalize(5000);
    const auto rep = trace_diagnostics(s);
    EXPECT_NEAR((*rep.columns[0].acf)[0], 0.0, 0.05);
}

TEST(Diagnostics, ThinningMatchesTheRetentionFormula) {
    graph::SampleStore s({"x"}, 100, 5, 1);
    for (int i = 0; i < 80; ++i) s.append({double(i)});
    s.finalize(500);
    for (std::size_t b : {0u, 3u, 10u})
        for (std::size_t t : {1u, 2u, 3u, 7u}) {
            const auto th = thin(s, b, t);
            EXPECT_EQ(th.size(), graph::SampleStore::retained_count(500, th.burn_in(), th.thin())) << b << "," << t;
            EXPECT_EQ(th.size(), (80 - b) / t);
        }
    EXPECT_EQ(thin(s, 0, 1).rows(), s.rows());
    EXPECT_TRUE(thin(s, 80, 1).empty());
    EXPECT_TRUE(thin(s, 200, 3).empty());
    EXPECT_THROW(thin(s, 0, 0), ConfigError);
}
