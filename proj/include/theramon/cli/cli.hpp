#pragma once

// Command-line front end over the four pipeline steps plus diagnostics.
// Exit codes: 0 success, 1 usage, 2 bad input, 3 numeric/capability failure.

#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "theramon/errors.hpp"
#include "theramon/inference/case_update.hpp"
#include "theramon/inference/collapse.hpp"
#include "theramon/inference/diagnostics.hpp"
#include "theramon/inference/population.hpp"
#include "theramon/inference/predict.hpp"
#include "theramon/io/config.hpp"
#include "theramon/io/json_codec.hpp"
#include "theramon/io/patient_db.hpp"
#include "theramon/io/posterior_files.hpp"
#include "theramon/io/samples_file.hpp"

namespace theramon::cli {

namespace fs = std::filesystem;

enum Exit : int { ok = 0, usage = 1, input = 2, compute = 3 };

/// "1..j" or "j" -> j.
inline int parse_cycle_range(const std::string& s) {
    std::string last = s;
    if (auto dots = s.find(".."); dots != std::string::npos) {
        if (s.substr(0, dots) != "1") throw CLI::ValidationError("--cycles", "range must start at 1 (1..j)");
        last = s.substr(dots + 2);
    }
    try {
        std::size_t used = 0;
        const int j = std::stoi(last, &used);
        if (used != last.size() || j < 1) throw std::invalid_argument(last);
        return j;
    } catch (const std::exception&) {
        throw CLI::ValidationError("--cycles", "expected 1..j with j >= 1, got '" + s + "'");
    }
}

inline std::string pmf_line(const std::string& name, const std::vector<double>& grid, const std::vector<double>& pmf) {
    std::ostringstream ss;
    ss << name << ':';
    for (std::size_t k = 0; k < pmf.size(); ++k)
        ss << ' ' << io::format_double(grid[k]) << '=' << std::fixed << std::setprecision(4) << pmf[k];
    return ss.str();
}

inline std::string bands_path_for(const fs::path& cloud) {
    auto p = cloud;
    p.replace_extension();
    return p.string() + ".bands.csv";
}

inline std::string format_cloud(const inference::PredictiveCloud& c) {
    std::string out = "draw,cycle_index,t_offset,log_wbc\n";
    for (const auto& p : c.points)
        out += std::to_string(p.draw) + ',' + std::to_string(p.cycle_index) + ',' + io::format_double(p.t) + ',' +
               io::format_double(p.value) + '\n';
    return out;
}

inline std::string format_bands(const inference::PredictiveCloud& c) {
    std::string out = "cycle_index,t_offset";
    for (double q : c.levels) out += ",q" + io::format_double(q);
    out += '\n';
    for (const auto& b : c.bands) {
        out += std::to_string(b.cycle_index) + ',' + io::format_double(b.t);
        for (double v : b.quantiles) out += ',' + io::format_double(v);
        out += '\n';
    }
    return out;
}

inline std::string format_report(const inference::TraceReport& rep) {
    if (!rep.available) return rep.note + "\n";
    std::ostringstream ss;
    ss << "column mean sd lag1_acf half_gap stationary\n";
    for (const auto& c : rep.columns) {
        ss << c.name << ' ' << io::format_double(c.mean) << ' ' << io::format_double(c.sd) << ' '
           << (c.acf && !c.acf->empty() ? io::format_double(c.acf->front()) : std::string("undefined")) << ' '
           << io::format_double(c.half_gap) << ' ' << (c.stationary ? "yes" : "no") << '\n';
    }
    ss << "stationarity: first/second half means within 0.1 pooled sd (heuristic)\n";
    return ss.str();
}

/// Runs one CLI invocation. Streams are injectable for tests.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Bayesian monitoring of chemotherapy toxicity from white blood cell counts", "theramon"};
    app.require_subcommand(1);
    app.fallthrough();
    std::optional<std::uint64_t> seed;
    app.add_option("--seed", seed, "Override the configured seed everywhere");
    std::optional<std::string> config_path;
    app.add_option("--config", config_path, "Configuration JSON (default: $THERAMON_CONFIG, then built-ins)");

    auto warn_sink = [&err](const std::string& m) { err << "warning: " << m << '\n'; };

    // popfit
    auto* popfit = app.add_subcommand("popfit", "Fit the population posterior of the hyperparameters");
    std::string pf_db, pf_out;
    std::optional<std::string> pf_config;
    popfit->add_option("db", pf_db, "Patient database CSV")->required();
    popfit->add_option("config", pf_config, "Configuration JSON");
    popfit->add_option("-o,--output", pf_out, "Population posterior output")->required();

    // collapse
    auto* collapse = app.add_subcommand("collapse", "Derive the prior for a new case from a population posterior");
    std::string co_in, co_out;
    std::optional<std::string> co_db, co_mode;
    std::optional<std::size_t> co_draws;
    std::vector<std::string> co_cov;
    collapse->add_option("population", co_in, "Population posterior")->required();
    collapse->add_option("-o,--output", co_out, "Case prior output (JSON)")->required();
    collapse->add_option("--draws", co_draws, "Number of mixture draws L (sampled mode)");
    collapse->add_option("--mode", co_mode, "closed_form or sampled")
        ->check(CLI::IsMember({"closed_form", "sampled"}));
    collapse->add_option("--db", co_db, "Patient database to check the posterior's provenance against");
    collapse->add_option("--covariate", co_cov, "Target covariate key=value (carried, not modeled)");

    // update
    auto* update = app.add_subcommand("update", "Condition the case prior on a patient's observed cycles");
    std::string up_prior, up_db, up_patient, up_out;
    std::optional<std::string> up_cycles;
    update->add_option("prior", up_prior, "Case prior (JSON)")->required();
    update->add_option("db", up_db, "Patient database CSV")->required();
    update->add_option("--patient", up_patient, "Patient id")->required();
    update->add_option("--cycles", up_cycles, "Cycles to condition on, 1..j (default: all)");
    update->add_option("-o,--output", up_out, "Case posterior output")->required();

    // predict
    auto* predict = app.add_subcommand("predict", "Predictive cloud and quantile bands under a dose plan");
    std::string pr_in, pr_plan, pr_out;
    std::optional<std::string> pr_bands, pr_policy;
    bool pr_no_noise = false;
    predict->add_option("posterior", pr_in, "Case posterior")->required();
    predict->add_option("--plan", pr_plan, "Dose plan JSON")->required();
    predict->add_option("-o,--output", pr_out, "Cloud points CSV")->required();
    predict->add_option("--bands", pr_bands, "Quantile bands CSV (default: <output>.bands.csv)");
    predict->add_option("--w0-policy", pr_policy, "last_observed or reference")
        ->check(CLI::IsMember({"last_observed", "reference"}));
    predict->add_flag("--no-noise", pr_no_noise, "Omit observation noise (mean profiles only)");

    // diagnose
    auto* diagnose = app.add_subcommand("diagnose", "Trace and autocorrelation report for a samples file");
    std::string dg_in;
    std::size_t dg_lag = 20;
    std::optional<std::size_t> dg_burn, dg_stride;
    bool dg_json = false;
    diagnose->add_option("samples", dg_in, "Samples file")->required();
    diagnose->add_option("--max-lag", dg_lag, "Largest autocorrelation lag");
    diagnose->add_option("--burn", dg_burn, "Further stored draws to discard before the report");
    diagnose->add_option("--stride", dg_stride, "Further thinning stride before the report");
    diagnose->add_flag("--json", dg_json, "Emit the full report as JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        if (code == 0) return ok;
        err << app.help();
        return usage;
    }

    try {
        auto cfg_for = [&](const std::optional<std::string>& explicit_path) {
            auto cfg = io::resolve_config(explicit_path ? explicit_path : config_path);
            if (seed) cfg.chain.seed = *seed;
            return cfg;
        };

        if (*popfit) {
            const auto cfg = cfg_for(pf_config);
            const auto db = io::load_patient_db(pf_db, warn_sink);
            const auto pop = inference::population_update(db, cfg.consts, cfg.hyper, cfg.chain);
            io::save_population(pop, pf_out);
            out << "population posterior: " << pop.draws.size() << " draws from " << db.size()
                << " patients, digest " << pop.db_digest << '\n';
            out << pmf_line("pi_alpha", pop.consts.alpha_grid, pop.mean_pmf("alpha")) << '\n';
            out << pmf_line("pi_gamma", pop.consts.gamma_grid, pop.mean_pmf("gamma")) << '\n';
            out << pmf_line("pi_tau", pop.consts.tau_grid, pop.mean_pmf("tau")) << '\n';
        } else if (*collapse) {
            const auto cfg = cfg_for(std::nullopt);
            std::optional<std::string> digest;
            if (co_db) digest = inference::database_digest(io::load_patient_db(*co_db, warn_sink));
            const auto pop = io::load_population(co_in, digest, warn_sink);
            std::vector<std::pair<std::string, std::string>> cov;
            for (const auto& kv : co_cov) {
                auto eq = kv.find('=');
                if (eq == std::string::npos) throw ConfigError("--covariate expects key=value, got '" + kv + "'");
                cov.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
            }
            auto mode = cfg.collapse_mode;
            if (co_mode) mode = *co_mode == "sampled" ? inference::CollapseMode::sampled : inference::CollapseMode::closed_form;
            auto rng = Rng::derive(cfg.chain.seed, "collapse");
            const auto prior = inference::collapse(pop, cov, co_draws.value_or(cfg.collapse_draws), mode, rng);
            io::save_case_prior(prior, co_out);
            out << "case prior from " << prior.draws_used << " draws, precision prior Gamma("
                << io::format_double(prior.a) << ", " << io::format_double(prior.b) << ")\n";
            out << pmf_line("alpha", prior.consts.alpha_grid, prior.pmf_alpha) << '\n';
            out << pmf_line("gamma", prior.consts.gamma_grid, prior.pmf_gamma) << '\n';
            out << pmf_line("tau", prior.consts.tau_grid, prior.pmf_tau) << '\n';
        } else if (*update) {
            const auto cfg = cfg_for(std::nullopt);
            const auto prior = io::load_case_prior(up_prior);
            const auto db = io::load_patient_db(up_db, warn_sink);
            model::PatientRecord rec{up_patient, {}, {}};
            bool found = false;
            for (const auto& r : db)
                if (r.patient_id == up_patient) {
                    rec = r;
                    found = true;
                }
            if (up_cycles) {
                const int j = parse_cycle_range(*up_cycles);
                if (found && j > static_cast<int>(rec.cycles.size()))
                    warn_sink("patient '" + up_patient + "' has only " + std::to_string(rec.cycles.size()) +
                              " cycles; conditioning on all of them");
                rec = rec.prefix(j);
            }
            if (!found) warn_sink("patient '" + up_patient + "' not found in " + up_db);
            if (rec.observation_count() == 0) warn_sink("no matching observations; the posterior equals the prior");
            const auto post = inference::case_update(prior, rec, cfg.chain);
            io::save_case_posterior(post, up_out);
            out << "case posterior for '" << post.patient_id << "': " << post.draws.size() << " draws, cycles";
            if (post.window.empty()) out << " none";
            for (int c : post.window) out << ' ' << c;
            out << '\n';
            out << pmf_line("alpha", prior.consts.alpha_grid, post.pmf_alpha) << '\n';
            out << pmf_line("gamma", prior.consts.gamma_grid, post.pmf_gamma) << '\n';
            out << pmf_line("tau", prior.consts.tau_grid, post.pmf_tau) << '\n';
        } else if (*predict) {
            const auto cfg = cfg_for(std::nullopt);
            const auto post = io::load_case_posterior(pr_in);
            const auto plan = io::plan_from_json(io::parse_json(io::read_file(pr_plan), pr_plan), "");
            auto policy = cfg.w0_policy;
            if (pr_policy)
                policy = *pr_policy == "reference" ? inference::W0Policy::reference_level
                                                   : inference::W0Policy::last_observed;
            auto rng = Rng::derive(cfg.chain.seed, "predict");
            const auto cloud =
                inference::predict(post, plan, policy, post.prior.consts, rng, !pr_no_noise, cfg.quantiles);
            const std::string bands = pr_bands.value_or(bands_path_for(pr_out));
            io::write_file_atomic(pr_out, format_cloud(cloud));
            io::write_file_atomic(bands, format_bands(cloud));
            out << "predictive cloud: " << cloud.points.size() << " points in " << pr_out << ", "
                << cloud.bands.size() << " band rows in " << bands << '\n';
        } else if (*diagnose) {
            auto store = io::load_samples(dg_in);
            if (dg_burn || dg_stride) store = inference::thin(store, dg_burn.value_or(0), dg_stride.value_or(1));
            const auto rep = inference::trace_diagnostics(store, dg_lag);
            if (dg_json) {
                io::json j = io::diagnostics_summary(rep);
                if (rep.available)
                    for (const auto& c : rep.columns) {
                        j["columns"][c.name]["acf"] = c.acf ? io::json(*c.acf) : io::json(nullptr);
                        j["columns"][c.name]["trace"] = c.trace;
                        j["columns"][c.name]["running_mean"] = c.running_mean;
                    }
                out << j.dump(2) << '\n';
            } else {
                out << format_report(rep);
            }
        }
    } catch (const CLI::ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return usage;
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return input;
    } catch (const ComputeError& e) {
        err << "error: " << e.what() << '\n';
        return compute;
    }
    return ok;
}

}  // namespace theramon::cli
