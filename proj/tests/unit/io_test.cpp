#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "theramon/io/config.hpp"
#include "theramon/io/patient_db.hpp"
#include "theramon/io/posterior_files.hpp"
#include "theramon/io/samples_file.hpp"
#include "theramon/model/simulate.hpp"

using namespace theramon;
using namespace theramon::io;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("theramon-io-" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "-" +
                ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::vector<std::string> collect;
WarningSink sink() {
    collect.clear();
    return [](const std::string& m) { collect.push_back(m); };
}

const char* kHeader = "patient_id,cycle_index,dose_std,t0,w0,t_offset,wbc\n";

}  // namespace

TEST(PatientDb, LogTransformsCounts) {
    const auto db = parse_patient_db(std::string(kHeader) + "p1,1,10,0,3000,2,1000\n");
    ASSERT_EQ(db.size(), 1u);
    EXPECT_NEAR(db[0].cycles[0].wbc_log[0], 6.907755278982137, 1e-12);
    EXPECT_NEAR(db[0].cycles[0].w0, std::log(3000.0), 1e-15);
}

TEST(PatientDb, GroupsInterleavedRows) {
    const std::string text = std::string(kHeader) +
                             "a,1,10,0,3000,2,1000\n"
                             "b,1,8,0,2500,2,900\n"
                             "a,2,10,21,2800,1,1500\n"
                             "b,1,8,0,2500,5,600\n"
                             "a,1,10,0,3000,6,500\n";
    const auto db = parse_patient_db(text);
    ASSERT_EQ(db.size(), 2u);
    EXPECT_EQ(db[0].patient_id, "a");
    EXPECT_EQ(db[0].cycles.size(), 2u);
    EXPECT_EQ(db[0].cycles[0].times, (std::vector<double>{2.0, 6.0}));
    EXPECT_EQ(db[1].cycles[0].times, (std::vector<double>{2.0, 5.0}));
    EXPECT_EQ(db[0].observation_count() + db[1].observation_count(), 5u);
}

TEST(PatientDb, EmptyBodyWarns) {
    auto s = sink();
    EXPECT_TRUE(parse_patient_db(kHeader, s).empty());
    EXPECT_EQ(collect.size(), 1u);
}

TEST(PatientDb, NonpositiveCountNamesTheLine) {
    try {
        parse_patient_db(std::string(kHeader) + "a,1,10,0,3000,2,1000\na,1,10,0,3000,4,0\n", {}, "db.csv");
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("db.csv:3"), std::string::npos) << e.what();
    }
}

TEST(PatientDb, UnsortedTimesAreRepairedWithAWarning) {
    auto s = sink();
    const auto db = parse_patient_db(std::string(kHeader) + "a,1,10,0,3000,6,500\na,1,10,0,3000,2,1000\n", s);
    EXPECT_EQ(db[0].cycles[0].times, (std::vector<double>{2.0, 6.0}));
    EXPECT_NEAR(db[0].cycles[0].wbc_log[0], std::log(1000.0), 1e-15);
    EXPECT_EQ(collect.size(), 1u);
}

TEST(PatientDb, RejectsDuplicatesAndInconsistentCycles) {
    EXPECT_THROW(parse_patient_db(std::string(kHeader) + "a,1,10,0,3000,2,1000\na,1,10,0,3000,2,900\n"), DataError);
    EXPECT_THROW(parse_patient_db(std::string(kHeader) + "a,1,10,0,3000,2,1000\na,1,12,0,3000,4,900\n"), DataError);
    EXPECT_THROW(parse_patient_db(std::string(kHeader) + "a,2,10,0,3000,2,1000\n"), DataError);
    EXPECT_THROW(parse_patient_db("patient_id,cycle_index\n"), ParseError);
    EXPECT_THROW(parse_patient_db(std::string(kHeader) + "a,1,10,0,3000,2\n"), ParseError);
    EXPECT_THROW(parse_patient_db(std::string(kHeader) + "a,1,10,0,3000,x,1\n"), DataError);
}

TEST(PatientDb, FormatRoundTrips) {
    Rng rng(1);
    model::ModelConstants c;
    std::vector<model::PatientRecord> db{
        model::simulate_patient("p1", {1.5, 0.2, 8.0, 0.1}, c, {{1, 10.0, {1.0, 4.0}}, {2, 9.0, {3.0}}}, 8.0, rng)};
    const auto back = parse_patient_db(format_patient_db(db));
    ASSERT_EQ(back.size(), 1u);
    ASSERT_EQ(back[0].cycles.size(), 2u);
    for (std::size_t j = 0; j < 2; ++j)
        for (std::size_t k = 0; k < back[0].cycles[j].size(); ++k)
            EXPECT_NEAR(back[0].cycles[j].wbc_log[k], db[0].cycles[j].wbc_log[k], 1e-12);
}

namespace {

graph::SampleStore sample_store() {
    graph::SampleStore s({"x", "y.1", "y.2"}, 100, 5, 42);
    Rng rng(3);
    for (int i = 0; i < 80; ++i) s.append({rng.normal(0, 1), rng.uniform() * 1e-300, -rng.gamma(2, 3)});
    s.append({0.1, 1.0 / 3.0, 1e300});
    s.metadata()["digest"] = "00ff00ff00ff00ff";
    s.metadata()["note"] = "free text with spaces";
    s.finalize(510);
    return s;
}

}  // namespace

TEST(Samples, RoundTripIsExact) {
    const auto s = sample_store();
    EXPECT_EQ(parse_samples(format_samples(s)), s);
    TempDir d;
    save_samples(s, d.path / "s.post");
    EXPECT_EQ(load_samples(d.path / "s.post"), s);
    EXPECT_FALSE(fs::exists(d.path / "s.post.tmp"));
}

TEST(Samples, TruncationReportsAByteOffset) {
    const auto text = format_samples(sample_store());
    const auto cut = text.substr(0, text.size() / 2);
    try {
        parse_samples(cut, "s.post");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("byte "), std::string::npos) << e.what();
    }
    EXPECT_THROW(parse_samples(text.substr(0, text.size() - 4)), ParseError);
}

TEST(Samples, VersionMismatchIsExplicit) {
    auto text = format_samples(sample_store());
    text.replace(text.find(" 1\n"), 3, " 2\n");
    EXPECT_THROW(parse_samples(text), VersionError);
    EXPECT_THROW(parse_samples("not-a-samples-file 1\n"), ParseError);
}

TEST(Posterior, PopulationRoundTripAndDigestWarning) {
    Rng rng(2);
    model::ModelConstants c;
    std::vector<model::PatientRecord> db{
        model::simulate_patient("p1", {1.5, 0.2, 8.0, 0.2}, c, {{1, 10.0, {2.0, 5.0, 9.0}}}, 8.0, rng)};
    const auto pop = inference::population_update(db, c, {}, {});
    TempDir d;
    save_population(pop, d.path / "pop.post");
    auto s = sink();
    const auto back = load_population(d.path / "pop.post", pop.db_digest, s);
    EXPECT_TRUE(collect.empty());
    EXPECT_EQ(back.store, population_store(pop));
    EXPECT_EQ(back.consts, pop.consts);
    EXPECT_EQ(back.hyper, pop.hyper);
    EXPECT_EQ(back.chain, pop.chain);
    ASSERT_EQ(back.draws.size(), pop.draws.size());
    EXPECT_EQ(back.draws[7].pi_alpha, pop.draws[7].pi_alpha);

    load_population(d.path / "pop.post", std::string("0000000000000000"), s);
    ASSERT_EQ(collect.size(), 1u);
    EXPECT_NE(collect[0].find("WARNING"), std::string::npos);
}

TEST(Posterior, CasePosteriorAndPriorRoundTrip) {
    Rng rng(2);
    model::ModelConstants c;
    const auto rec = model::simulate_patient("p 1", {1.5, 0.2, 8.0, 0.2}, c, {{1, 10.0, {2.0, 5.0, 9.0}}}, 8.0, rng);
    inference::CasePrior prior;
    prior.consts = c;
    prior.pmf_alpha = {0.2, 0.3, 0.5};
    prior.pmf_gamma = prior.pmf_tau = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    prior.a = 2.0;
    prior.b = 0.1;
    prior.draws_used = 80;
    prior.db_digest = "abc";
    TempDir d;
    save_case_prior(prior, d.path / "prior.json");
    const auto pback = load_case_prior(d.path / "prior.json");
    EXPECT_EQ(pback.pmf_alpha, prior.pmf_alpha);
    EXPECT_EQ(pback.pmf_gamma, prior.pmf_gamma);
    EXPECT_EQ(pback.a, prior.a);

    const auto post = inference::case_update(prior, rec, {});
    save_case_posterior(post, d.path / "case.post");
    const auto back = load_case_posterior(d.path / "case.post");
    EXPECT_EQ(back.store, case_store(post));
    EXPECT_EQ(back.patient_id, "p 1");
    EXPECT_EQ(back.window, post.window);
    EXPECT_EQ(back.last_w0, post.last_w0);
    EXPECT_EQ(back.pmf_alpha, post.pmf_alpha);
    EXPECT_EQ(back.draws, post.draws);

    const auto empty = inference::case_update(prior, rec.prefix(0), {});
    save_case_posterior(empty, d.path / "empty.post");
    const auto eback = load_case_posterior(d.path / "empty.post");
    EXPECT_TRUE(eback.from_prior);
    EXPECT_FALSE(eback.last_w0);
    EXPECT_EQ(eback.pmf_alpha, prior.pmf_alpha);

    EXPECT_THROW(load_population(d.path / "case.post"), DataError);
}

TEST(Config, DefaultsAndOverrides) {
    const auto def = parse_config(json::object());
    EXPECT_EQ(def.chain.sweeps, 500u);
    EXPECT_EQ(def.consts, model::ModelConstants{});
    const auto cfg = parse_config(json::parse(R"({"constants": {"k": 0.04}, "chain": {"seed": 7},
                                                  "quantiles": [0.1, 0.9], "w0_policy": "reference"})"));
    EXPECT_EQ(cfg.consts.k, 0.04);
    EXPECT_EQ(cfg.chain.seed, 7u);
    EXPECT_EQ(cfg.chain.thin, 5u);
    EXPECT_EQ(cfg.w0_policy, inference::W0Policy::reference_level);
}

TEST(Config, ErrorsNameTheField) {
    auto path_of = [](const char* text) {
        try {
            parse_config(json::parse(text));
        } catch (const FieldError& e) {
            return e.path();
        }
        return std::string("<none>");
    };
    EXPECT_EQ(path_of(R"({"chain": {"thin": 0}})"), "chain.thin");
    EXPECT_EQ(path_of(R"({"chain": {"sweeps": "many"}})"), "chain.sweeps");
    EXPECT_EQ(path_of(R"({"grids": {"alpha": [1, "x", 2]}})"), "grids.alpha[1]");
    EXPECT_EQ(path_of(R"({"bogus": 1})"), "bogus");
    EXPECT_EQ(path_of(R"({"quantiles": [0.9, 0.1]})"), "quantiles");
    EXPECT_THROW(parse_config(json::parse(R"({"grids": {"alpha": [1, 2]}})")), ConfigError);
}

TEST(Config, EnvironmentSuppliesTheDefaultPath) {
    TempDir d;
    write_file_atomic(d.path / "c.json", R"({"chain": {"seed": 99}})");
    ::setenv(kConfigEnv, (d.path / "c.json").c_str(), 1);
    EXPECT_EQ(resolve_config(std::nullopt).chain.seed, 99u);
    ::unsetenv(kConfigEnv);
    EXPECT_EQ(resolve_config(std::nullopt).chain.seed, 1u);
}

TEST(Json, PlanAndCycleFieldPaths) {
    try {
        plan_from_json(json::parse(R"({"cycles": [{"cycle_index": 2, "dose_std": 1, "offsets": [1]},
                                                  {"cycle_index": 3, "dose_std": "x", "offsets": [1]}]})"),
                       "");
        FAIL();
    } catch (const FieldError& e) {
        EXPECT_EQ(e.path(), "cycles[1].dose_std");
    }
    try {
        cycle_from_json(json::parse(R"({"cycle_index": 1, "dose_std": 1, "w0": 8, "times": [1, 1], "wbc_log": [1, 2]})"),
                        "");
        FAIL();
    } catch (const FieldError& e) {
        EXPECT_EQ(e.path(), "times[1]");
    }
    const auto plan = plan_from_json(json::parse(R"({"cycles": [{"cycle_index": 2, "dose_std": 1.5, "offsets": [1, 4]}]})"), "");
    EXPECT_EQ(plan_to_json(plan), json::parse(R"({"cycles": [{"cycle_index": 2, "dose_std": 1.5, "offsets": [1.0, 4.0]}]})"));
}
