#pragma once

// HTTP/JSON routes over a Monitor.
//
//   POST /population                     fit and install the population posterior
//   POST /patients                       create a session (collapsed prior)
//   GET  /patients/{id}                  session summary and observed cycles
//   POST /patients/{id}/cycles           append one cycle, 202
//   POST /patients/{id}/update[?wait=false]
//   POST /patients/{id}/predict          read-only what-if prediction
//   GET  /patients/{id}/posterior[?version=v]
//
// Errors: {"error": ...} with 400 (plus "path" for a bad field), 404, 409,
// or 500 (plus "node" when no exact sampler exists).

#include <functional>
#include <string>

#include <httplib.h>

#include "theramon/service/monitor.hpp"

namespace theramon::service {

namespace detail {

inline void send(httplib::Response& res, const Reply& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
}

inline void send_error(httplib::Response& res, int status, const std::string& what, json extra = json::object()) {
    extra["error"] = what;
    send(res, {status, std::move(extra)});
}

inline json body_of(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    return io::parse_json(req.body, "request body");
}

/// Runs a handler and maps library errors to statuses.
inline void guarded(httplib::Response& res, const std::function<Reply()>& fn) {
    try {
        send(res, fn());
    } catch (const ServiceError& e) {
        send_error(res, e.status(), e.what());
    } catch (const io::FieldError& e) {
        send_error(res, 400, e.what(), {{"path", e.path()}});
    } catch (const InputError& e) {
        send_error(res, 400, e.what());
    } catch (const CapabilityError& e) {
        send_error(res, 500, e.what(), {{"node", e.node()}});
    } catch (const std::exception& e) {
        send_error(res, 500, e.what());
    }
}

inline std::optional<int> version_param(const httplib::Request& req) {
    if (!req.has_param("version")) return std::nullopt;
    const auto s = req.get_param_value("version");
    try {
        std::size_t used = 0;
        const int v = std::stoi(s, &used);
        if (used == s.size() && v >= 0) return v;
    } catch (const std::exception&) {
    }
    throw io::FieldError("version", "expected a non-negative integer");
}

}  // namespace detail

inline void install_routes(httplib::Server& srv, Monitor& m) {
    using detail::guarded;
    using Req = httplib::Request;
    using Res = httplib::Response;

    srv.Get("/health", [&m](const Req&, Res& res) {
        detail::send(res, {200, {{"status", "ok"}, {"population", m.has_population()}}});
    });
    srv.Post("/population", [&m](const Req& req, Res& res) {
        guarded(res, [&] { return m.fit_population(detail::body_of(req)); });
    });
    srv.Get("/patients", [&m](const Req&, Res& res) {
        guarded(res, [&] { return Reply{200, {{"patients", m.patient_ids()}}}; });
    });
    srv.Post("/patients", [&m](const Req& req, Res& res) {
        guarded(res, [&] { return m.create_patient(detail::body_of(req)); });
    });
    srv.Get(R"(/patients/([^/]+))", [&m](const Req& req, Res& res) {
        guarded(res, [&] { return m.session(req.matches[1]); });
    });
    srv.Post(R"(/patients/([^/]+)/cycles)", [&m](const Req& req, Res& res) {
        guarded(res, [&] { return m.append_cycle(req.matches[1], detail::body_of(req)); });
    });
    srv.Post(R"(/patients/([^/]+)/update)", [&m](const Req& req, Res& res) {
        guarded(res, [&] {
            const bool wait = !req.has_param("wait") || req.get_param_value("wait") != "false";
            return m.update(req.matches[1], wait);
        });
    });
    srv.Post(R"(/patients/([^/]+)/predict)", [&m](const Req& req, Res& res) {
        guarded(res, [&] { return m.predict(req.matches[1], detail::body_of(req)); });
    });
    srv.Get(R"(/patients/([^/]+)/posterior)", [&m](const Req& req, Res& res) {
        guarded(res, [&] { return m.posterior(req.matches[1], detail::version_param(req)); });
    });
}

}  // namespace theramon::service
