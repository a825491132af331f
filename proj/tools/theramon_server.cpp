// Monitoring service: patient sessions over HTTP/JSON.

#include <csignal>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <httplib.h>

#include "theramon/io/config.hpp"
#include "theramon/io/posterior_files.hpp"
#include "theramon/service/http.hpp"
#include "theramon/service/monitor.hpp"

namespace {
httplib::Server* g_server = nullptr;
void on_signal(int) {
    if (g_server) g_server->stop();
}
}  // namespace

int main(int argc, char** argv) {
    using namespace theramon;
    CLI::App app{"Therapy monitoring service", "theramon-server"};
    std::string host = "127.0.0.1";
    int port = 8080;
    std::optional<std::string> config_path, population_path, snapshot_path;
    std::optional<std::uint64_t> seed;
    app.add_option("--host", host, "Address to bind");
    app.add_option("--port", port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));
    app.add_option("--config", config_path, "Configuration JSON (default: $THERAMON_CONFIG, then built-ins)");
    app.add_option("--population", population_path, "Population posterior to serve from startup");
    app.add_option("--seed", seed, "Override the configured seed");
    app.add_option("--snapshot", snapshot_path, "Session snapshot file, restored at startup if present");
    CLI11_PARSE(app, argc, argv);

    try {
        auto cfg = io::resolve_config(config_path);
        if (seed) cfg.chain.seed = *seed;
        std::optional<std::filesystem::path> snap;
        if (snapshot_path) snap = *snapshot_path;
        service::Monitor monitor(cfg, snap);
        if (snap && std::filesystem::exists(*snap)) monitor.load_snapshot(*snap);
        if (population_path) monitor.set_population(io::load_population(*population_path));

        httplib::Server srv;
        service::install_routes(srv, monitor);
        g_server = &srv;
        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);
        const int bound = port == 0 ? srv.bind_to_any_port(host) : (srv.bind_to_port(host, port) ? port : -1);
        if (bound < 0) {
            std::cerr << "error: cannot bind " << host << ':' << port << '\n';
            return 1;
        }
        std::cout << "listening on " << host << ':' << bound << std::endl;
        srv.listen_after_bind();
        monitor.drain();
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
