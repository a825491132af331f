#pragma once

// Patient sessions for the monitoring service, independent of HTTP.
//
// A session holds the collapsed prior, the cycles appended so far and an
// append-only list of posterior versions. Version 0 is the prior itself;
// version v is the posterior after the v-th update request and conditions
// on the cycles present when that request was accepted. Updates of one
// session run one at a time, in request order, off the calling thread.
// Predictions only read a finished version.

#include <algorithm>
#include <condition_variable>
#include <filesystem>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

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
#include "theramon/rng.hpp"

namespace theramon::service {

using io::json;

/// Carries the HTTP status it should be reported with.
struct ServiceError : Error {
    ServiceError(int status, const std::string& what) : Error(what), status_(status) {}
    int status() const noexcept { return status_; }

private:
    int status_;
};

struct NotFound : ServiceError {
    explicit NotFound(const std::string& what) : ServiceError(404, what) {}
};

struct Conflict : ServiceError {
    explicit Conflict(const std::string& what) : ServiceError(409, what) {}
};

enum class VersionState { pending, ready, failed };

inline const char* state_name(VersionState s) {
    switch (s) {
        case VersionState::pending: return "pending";
        case VersionState::ready: return "ready";
        default: return "failed";
    }
}

struct PosteriorVersion {
    int version = 0;
    int last_cycle = 0;  // conditions on cycles 1..last_cycle
    VersionState state = VersionState::pending;
    std::optional<inference::CasePosterior> posterior;
    std::string digest;  // of the serialized posterior
    int error_status = 0;
    std::string error;
    std::string error_node;
};

/// Result of a request: HTTP-style status and JSON body.
struct Reply {
    int status = 200;
    json body;
};

/// Digest of a posterior's serialized samples and metadata.
inline std::string posterior_digest(const inference::CasePosterior& post) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(io::format_samples(io::case_store(post)))));
    return buf;
}

inline std::vector<int> window_of(int last_cycle) {
    std::vector<int> w;
    for (int c = 1; c <= last_cycle; ++c) w.push_back(c);
    return w;
}

class Monitor;

class Session {
public:
    Session(std::string id, inference::CasePrior prior, std::vector<std::pair<std::string, std::string>> covariates,
            io::RunConfig cfg)
        : id_(std::move(id)), prior_(std::move(prior)), covariates_(std::move(covariates)), cfg_(std::move(cfg)) {}

    const std::string& id() const { return id_; }
    const inference::CasePrior& prior() const { return prior_; }
    const io::RunConfig& config() const { return cfg_; }

private:
    friend class Monitor;

    model::PatientRecord record_prefix(int last) const {
        model::PatientRecord r{id_, covariates_, {}};
        for (const auto& c : cycles_)
            if (c.cycle_index <= last) r.cycles.push_back(c);
        return r;
    }

    std::string id_;
    inference::CasePrior prior_;
    std::vector<std::pair<std::string, std::string>> covariates_;
    io::RunConfig cfg_;

    mutable std::mutex mu_;
    std::condition_variable done_;
    std::vector<model::CycleObservation> cycles_;
    std::vector<std::shared_ptr<PosteriorVersion>> versions_;
    std::shared_future<void> tail_;  // last queued update job
};

class Monitor {
public:
    explicit Monitor(io::RunConfig cfg = {}, std::optional<std::filesystem::path> snapshot = {})
        : cfg_(std::move(cfg)), snapshot_(std::move(snapshot)) {
        cfg_.validate();
    }

    Monitor(const Monitor&) = delete;
    Monitor& operator=(const Monitor&) = delete;

    ~Monitor() { drain(); }

    /// Blocks until every queued update has finished.
    void drain() {
        std::vector<std::shared_future<void>> jobs;
        {
            std::shared_lock lk(mu_);
            for (const auto& [id, s] : sessions_) {
                std::lock_guard sl(s->mu_);
                if (s->tail_.valid()) jobs.push_back(s->tail_);
            }
        }
        for (auto& j : jobs) j.wait();
    }

    io::RunConfig config() const {
        std::shared_lock lk(mu_);
        return cfg_;
    }

    bool has_population() const {
        std::shared_lock lk(mu_);
        return pop_ != nullptr;
    }

    void set_population(inference::PopulationPosterior pop) {
        {
            std::unique_lock lk(mu_);
            pop_ = std::make_shared<const inference::PopulationPosterior>(std::move(pop));
        }
        save_snapshot();
    }

    /// Body: {"db": CSV text or [{"patient_id", "cycles": [...]}], "config": {...}}.
    /// A supplied config becomes the active config for later sessions.
    Reply fit_population(const json& body) {
        io::allow_keys(body, {"db", "config"}, "");
        auto cfg = config();
        if (auto* c = io::optional(body, "config")) cfg = parse_config_at(*c, "config");
        const auto db = parse_db(io::required(body, "db", ""));
        auto pop = inference::population_update(db, cfg.consts, cfg.hyper, cfg.chain);
        json out{{"patients", db.size()},
                 {"draws", pop.draws.size()},
                 {"digest", pop.db_digest},
                 {"marginals", io::marginals_to_json(pop.mean_pmf("alpha"), pop.mean_pmf("gamma"),
                                                     pop.mean_pmf("tau"), pop.consts)}};
        {
            std::unique_lock lk(mu_);
            cfg_ = cfg;
            pop_ = std::make_shared<const inference::PopulationPosterior>(std::move(pop));
        }
        save_snapshot();
        return {200, out};
    }

    /// Body: {"patient_id": "...", "covariates": {"key": "value"}}.
    Reply create_patient(const json& body) {
        io::allow_keys(body, {"patient_id", "covariates"}, "");
        const auto id = io::as_string(io::required(body, "patient_id", ""), "patient_id");
        if (id.empty() || id.find_first_of("/?#") != std::string::npos)
            throw io::FieldError("patient_id", "must be non-empty without '/', '?' or '#'");
        std::vector<std::pair<std::string, std::string>> cov;
        if (auto* c = io::optional(body, "covariates")) {
            io::require_object(*c, "covariates");
            for (const auto& [k, v] : c->items()) cov.emplace_back(k, io::as_string(v, io::field_path("covariates", k)));
        }

        std::shared_ptr<const inference::PopulationPosterior> pop;
        io::RunConfig cfg;
        {
            std::shared_lock lk(mu_);
            if (sessions_.count(id)) throw Conflict("patient '" + id + "' already exists");
            if (!pop_) throw Conflict("no population posterior loaded");
            pop = pop_;
            cfg = cfg_;
        }
        auto rng = Rng::derive(cfg.chain.seed, "collapse:" + id);
        auto prior = inference::collapse(*pop, cov, cfg.collapse_draws, cfg.collapse_mode, rng);
        auto session = std::make_shared<Session>(id, prior, cov, cfg);
        session->versions_.push_back(prior_version(*session));
        {
            std::unique_lock lk(mu_);
            if (!sessions_.emplace(id, session).second) throw Conflict("patient '" + id + "' already exists");
        }
        save_snapshot();
        json out = io::prior_to_json(prior);
        out["patient_id"] = id;
        return {201, out};
    }

    /// Body: one cycle in log units; its index must be the next one.
    Reply append_cycle(const std::string& id, const json& body) {
        auto s = find(id);
        auto cyc = io::cycle_from_json(body, "");
        int n = 0;
        {
            std::lock_guard lk(s->mu_);
            const int expected = static_cast<int>(s->cycles_.size()) + 1;
            if (cyc.cycle_index != expected)
                throw io::FieldError("cycle_index", "expected " + std::to_string(expected));
            if (!io::optional(body, "t0")) cyc.t0 = 21.0 * (expected - 1);
            cyc.validate();
            s->cycles_.push_back(std::move(cyc));
            n = expected;
        }
        save_snapshot();
        return {202, {{"patient_id", id}, {"cycles", n}, {"window", window_of(n)}}};
    }

    /// Queues an update on all cycles appended so far. With wait, blocks and
    /// returns the finished version; otherwise returns 202 with its number.
    Reply update(const std::string& id, bool wait) {
        auto s = find(id);
        std::shared_ptr<PosteriorVersion> v;
        {
            std::lock_guard lk(s->mu_);
            const int n = static_cast<int>(s->cycles_.size());
            if (n == 0) throw Conflict("patient '" + id + "' has no cycles to update on");
            if (n <= s->versions_.back()->last_cycle)
                throw Conflict("no cycles appended since version " + std::to_string(s->versions_.back()->version));
            v = std::make_shared<PosteriorVersion>();
            v->version = static_cast<int>(s->versions_.size());
            v->last_cycle = n;
            s->versions_.push_back(v);
            enqueue(s, v);
        }
        if (!wait) {
            return {202,
                    {{"patient_id", id},
                     {"version", v->version},
                     {"state", "pending"},
                     {"window", window_of(v->last_cycle)},
                     {"poll", "/patients/" + id + "/posterior?version=" + std::to_string(v->version)}}};
        }
        std::unique_lock lk(s->mu_);
        s->done_.wait(lk, [&] { return v->state != VersionState::pending; });
        return version_reply(*s, *v, true);
    }

    /// Latest finished version, or the given one.
    Reply posterior(const std::string& id, std::optional<int> version) {
        auto s = find(id);
        std::lock_guard lk(s->mu_);
        return version_reply(*s, *pick(*s, version, false), true);
    }

    /// Body: {"cycles": [...], "noise": true, "seed": n, "version": v,
    ///        "w0_policy": "...", "max_points": n}.
    Reply predict(const std::string& id, const json& body) {
        io::allow_keys(body, {"cycles", "noise", "seed", "version", "w0_policy", "max_points"}, "");
        auto s = find(id);
        const auto plan = io::plan_from_json(json{{"cycles", io::required(body, "cycles", "")}}, "");
        bool noise = true;
        if (auto* v = io::optional(body, "noise")) {
            if (!v->is_boolean()) throw io::FieldError("noise", "expected a boolean");
            noise = v->get<bool>();
        }
        const auto& cfg = s->config();
        const std::uint64_t seed = io::optional(body, "seed") ? io::as_count(body["seed"], "seed") : cfg.chain.seed;
        auto policy = cfg.w0_policy;
        if (auto* v = io::optional(body, "w0_policy")) policy = io::parse_w0_policy(*v, "w0_policy");
        std::size_t cap = 500;
        if (auto* v = io::optional(body, "max_points")) cap = io::as_count(*v, "max_points");
        std::optional<int> version;
        if (auto* v = io::optional(body, "version")) version = static_cast<int>(io::as_count(*v, "version"));

        std::shared_ptr<PosteriorVersion> pv;
        {
            std::lock_guard lk(s->mu_);
            pv = pick(*s, version, true);
        }
        // A ready version is immutable, so the lock is not needed from here.
        const auto& post = *pv->posterior;
        try {
            plan.validate(post.last_cycle());
        } catch (const ContractError& e) {
            throw io::FieldError("cycles", e.what());
        }
        if (policy == inference::W0Policy::last_observed && !post.last_w0)
            throw Conflict("version " + std::to_string(pv->version) +
                           " has no observed cycle; use w0_policy \"reference\"");
        auto rng = Rng::derive(seed, "predict:" + id + ":" + std::to_string(pv->version));
        const auto cloud = inference::predict(post, plan, policy, post.prior.consts, rng, noise, cfg.quantiles);

        json points = json::array();
        const std::size_t n = cloud.points.size();
        const std::size_t keep = std::min(cap, n);
        for (std::size_t i = 0; i < keep; ++i) {
            const auto& p = cloud.points[i * n / keep];
            points.push_back({{"draw", p.draw}, {"cycle_index", p.cycle_index}, {"t", p.t}, {"value", p.value}});
        }
        json out = io::bands_to_json(cloud);
        out["patient_id"] = id;
        out["version"] = pv->version;
        out["window"] = window_of(pv->last_cycle);
        out["w0_policy"] = io::w0_policy_name(policy);
        out["noise"] = noise;
        out["seed"] = seed;
        out["points"] = std::move(points);
        out["total_points"] = n;
        return {200, out};
    }

    /// Session summary with the observed cycles.
    Reply session(const std::string& id) {
        auto s = find(id);
        std::lock_guard lk(s->mu_);
        json cycles = json::array();
        for (const auto& c : s->cycles_) cycles.push_back(io::cycle_to_json(c));
        json versions = json::array();
        for (const auto& v : s->versions_)
            versions.push_back({{"version", v->version}, {"state", state_name(v->state)},
                                {"window", window_of(v->last_cycle)}});
        return {200, {{"patient_id", id}, {"cycles", cycles}, {"versions", versions}}};
    }

    std::vector<std::string> patient_ids() const {
        std::shared_lock lk(mu_);
        std::vector<std::string> ids;
        for (const auto& [id, s] : sessions_) ids.push_back(id);
        return ids;
    }

    /// Digest of a finished version, for read-only checks.
    std::string version_digest(const std::string& id, int version) {
        auto s = find(id);
        std::lock_guard lk(s->mu_);
        return pick(*s, version, true)->digest;
    }

    json snapshot() const {
        json sessions = json::array();
        json out{{"format", "theramon-monitor"}, {"version", 1}};
        std::shared_lock lk(mu_);
        if (pop_) out["population"] = io::format_samples(io::population_store(*pop_));
        for (const auto& [id, s] : sessions_) {
            std::lock_guard sl(s->mu_);
            json cov = json::object();
            for (const auto& [k, v] : s->covariates_) cov[k] = v;
            json cycles = json::array();
            for (const auto& c : s->cycles_) cycles.push_back(io::cycle_to_json(c));
            json versions = json::array();
            for (const auto& v : s->versions_) {
                json e{{"version", v->version}, {"last_cycle", v->last_cycle}, {"state", state_name(v->state)}};
                if (v->state == VersionState::ready) e["samples"] = io::format_samples(io::case_store(*v->posterior));
                if (v->state == VersionState::failed)
                    e.update({{"status", v->error_status}, {"error", v->error}, {"node", v->error_node}});
                versions.push_back(std::move(e));
            }
            sessions.push_back({{"patient_id", id},
                                {"covariates", cov},
                                {"prior", io::prior_to_json(s->prior_)},
                                {"cycles", cycles},
                                {"versions", versions}});
        }
        out["sessions"] = std::move(sessions);
        return out;
    }

    /// Rebuilds sessions from a snapshot. Versions that were still pending
    /// are queued again.
    void restore(const json& snap) {
        io::allow_keys(snap, {"format", "version", "population", "sessions"}, "");
        if (io::as_string(io::required(snap, "format", ""), "format") != "theramon-monitor")
            throw ParseError("not a monitor snapshot");
        if (io::as_count(io::required(snap, "version", ""), "version") != 1)
            throw VersionError("unsupported monitor snapshot version");
        std::shared_ptr<const inference::PopulationPosterior> pop;
        if (auto* p = io::optional(snap, "population"))
            pop = std::make_shared<const inference::PopulationPosterior>(io::population_from_store(
                io::parse_samples(io::as_string(*p, "population"), "snapshot population"), "snapshot population"));

        std::map<std::string, std::shared_ptr<Session>> sessions;
        std::vector<std::pair<std::shared_ptr<Session>, std::shared_ptr<PosteriorVersion>>> requeue;
        const auto& arr = io::required(snap, "sessions", "");
        auto cfg = config();
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const auto path = io::index_path("sessions", i);
            const auto& e = arr[i];
            const auto id = io::as_string(io::required(e, "patient_id", path), io::field_path(path, "patient_id"));
            std::vector<std::pair<std::string, std::string>> cov;
            for (const auto& [k, v] : io::required(e, "covariates", path).items()) cov.emplace_back(k, v.get<std::string>());
            auto prior = io::prior_from_json(io::required(e, "prior", path), io::field_path(path, "prior"));
            auto s = std::make_shared<Session>(id, std::move(prior), std::move(cov), cfg);
            const auto& cycles = io::required(e, "cycles", path);
            for (std::size_t k = 0; k < cycles.size(); ++k)
                s->cycles_.push_back(io::cycle_from_json(cycles[k], io::index_path(io::field_path(path, "cycles"), k)));
            for (const auto& ve : io::required(e, "versions", path)) {
                auto v = std::make_shared<PosteriorVersion>();
                v->version = ve.at("version").get<int>();
                v->last_cycle = ve.at("last_cycle").get<int>();
                const auto st = ve.at("state").get<std::string>();
                if (st == "ready") {
                    v->posterior = io::case_from_store(io::parse_samples(ve.at("samples").get<std::string>(), id),
                                                       "snapshot session " + id);
                    v->digest = posterior_digest(*v->posterior);
                    v->state = VersionState::ready;
                } else if (st == "failed") {
                    v->state = VersionState::failed;
                    v->error_status = ve.at("status").get<int>();
                    v->error = ve.at("error").get<std::string>();
                    v->error_node = ve.at("node").get<std::string>();
                } else {
                    requeue.emplace_back(s, v);
                }
                s->versions_.push_back(v);
            }
            if (s->versions_.empty()) throw DataError("snapshot session '" + id + "' has no versions");
            sessions.emplace(id, s);
        }
        {
            std::unique_lock lk(mu_);
            pop_ = pop;
            sessions_ = std::move(sessions);
        }
        for (auto& [s, v] : requeue) {
            std::lock_guard lk(s->mu_);
            enqueue(s, v);
        }
    }

    void load_snapshot(const std::filesystem::path& path) { restore(io::parse_json(io::read_file(path), path.string())); }

    void save_snapshot() const {
        if (!snapshot_) return;
        const auto text = snapshot().dump() + "\n";
        std::lock_guard lk(snapshot_mu_);
        io::write_file_atomic(*snapshot_, text);
    }

private:
    static io::RunConfig parse_config_at(const json& j, const std::string& prefix) {
        try {
            return io::parse_config(j);
        } catch (const io::FieldError& e) {
            const auto& p = e.path();
            throw io::FieldError(p.empty() ? prefix : prefix + "." + p,
                                 std::string(e.what()).substr(p.empty() ? 6 : p.size() + 2));
        }
    }

    static std::vector<model::PatientRecord> parse_db(const json& j) {
        if (j.is_string()) return io::parse_patient_db(j.get<std::string>(), {}, "db");
        if (!j.is_array()) throw io::FieldError("db", "expected CSV text or an array of patients");
        std::vector<model::PatientRecord> db;
        for (std::size_t i = 0; i < j.size(); ++i) {
            const auto p = io::index_path("db", i);
            io::allow_keys(j[i], {"patient_id", "cycles"}, p);
            model::PatientRecord r;
            r.patient_id = io::as_string(io::required(j[i], "patient_id", p), io::field_path(p, "patient_id"));
            const auto cp = io::field_path(p, "cycles");
            const auto& cycles = io::required(j[i], "cycles", p);
            if (!cycles.is_array()) throw io::FieldError(cp, "expected an array");
            for (std::size_t k = 0; k < cycles.size(); ++k)
                r.cycles.push_back(io::cycle_from_json(cycles[k], io::index_path(cp, k)));
            try {
                r.validate();
            } catch (const DataError& e) {
                throw io::FieldError(p, e.what());
            }
            db.push_back(std::move(r));
        }
        return db;
    }

    std::shared_ptr<Session> find(const std::string& id) const {
        std::shared_lock lk(mu_);
        auto it = sessions_.find(id);
        if (it == sessions_.end()) throw NotFound("unknown patient '" + id + "'");
        return it->second;
    }

    static inference::ChainSettings chain_for(const Session& s, int version) {
        auto chain = s.config().chain;
        chain.seed = splitmix64(chain.seed ^ fnv1a64("update:" + s.id() + ":" + std::to_string(version)));
        return chain;
    }

    static std::shared_ptr<PosteriorVersion> prior_version(const Session& s) {
        auto v = std::make_shared<PosteriorVersion>();
        v->posterior = inference::case_update(s.prior(), s.record_prefix(0), chain_for(s, 0));
        v->digest = posterior_digest(*v->posterior);
        v->state = VersionState::ready;
        return v;
    }

    /// Caller holds s->mu_.
    void enqueue(const std::shared_ptr<Session>& s, const std::shared_ptr<PosteriorVersion>& v) {
        auto record = s->record_prefix(v->last_cycle);
        auto prev = s->tail_;
        s->tail_ = std::async(std::launch::async, [this, s, v, prev, record = std::move(record)] {
                       if (prev.valid()) prev.wait();
                       run_update(*s, *v, record);
                       save_snapshot();
                   }).share();
    }

    static void run_update(Session& s, PosteriorVersion& v, const model::PatientRecord& record) {
        std::optional<inference::CasePosterior> post;
        int status = 0;
        std::string error, node;
        try {
            post = inference::case_update(s.prior(), record, chain_for(s, v.version));
        } catch (const CapabilityError& e) {
            status = 500, error = e.what(), node = e.node();
        } catch (const InputError& e) {
            status = 400, error = e.what();
        } catch (const std::exception& e) {
            status = 500, error = e.what();
        }
        std::string digest = post ? posterior_digest(*post) : std::string();
        {
            std::lock_guard lk(s.mu_);
            if (post) {
                v.posterior = std::move(post);
                v.digest = std::move(digest);
                v.state = VersionState::ready;
            } else {
                v.error_status = status;
                v.error = std::move(error);
                v.error_node = std::move(node);
                v.state = VersionState::failed;
            }
        }
        s.done_.notify_all();
    }

    /// Caller holds s.mu_. Without a version, the latest ready one.
    static std::shared_ptr<PosteriorVersion> pick(const Session& s, std::optional<int> version, bool need_ready) {
        if (!version) {
            for (auto it = s.versions_.rbegin(); it != s.versions_.rend(); ++it)
                if ((*it)->state == VersionState::ready) return *it;
            return s.versions_.front();
        }
        if (*version < 0 || *version >= static_cast<int>(s.versions_.size()))
            throw NotFound("patient '" + s.id() + "' has no version " + std::to_string(*version));
        const auto& v = s.versions_[*version];
        if (need_ready && v->state == VersionState::pending)
            throw Conflict("version " + std::to_string(*version) + " is still pending");
        if (need_ready && v->state == VersionState::failed)
            throw Conflict("version " + std::to_string(*version) + " failed: " + v->error);
        return v;
    }

    /// Caller holds s.mu_.
    static Reply version_reply(const Session& s, const PosteriorVersion& v, bool with_diagnostics) {
        json out{{"patient_id", s.id()},
                 {"version", v.version},
                 {"state", state_name(v.state)},
                 {"window", window_of(v.last_cycle)}};
        if (v.state == VersionState::pending) return {202, out};
        if (v.state == VersionState::failed) {
            out["error"] = v.error;
            if (!v.error_node.empty()) out["node"] = v.error_node;
            return {v.error_status, out};
        }
        const auto& p = *v.posterior;
        const auto& c = s.prior().consts;
        out["draws"] = p.draws.size();
        out["from_prior"] = p.from_prior;
        out["digest"] = v.digest;
        out["marginals"] = io::marginals_to_json(p.pmf_alpha, p.pmf_gamma, p.pmf_tau, c);
        if (with_diagnostics) out["diagnostics"] = io::diagnostics_summary(inference::trace_diagnostics(p.store));
        return {200, out};
    }

    mutable std::shared_mutex mu_;
    io::RunConfig cfg_;
    std::shared_ptr<const inference::PopulationPosterior> pop_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::optional<std::filesystem::path> snapshot_;
    mutable std::mutex snapshot_mu_;
};

}  // namespace theramon::service
