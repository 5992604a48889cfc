#pragma once

#include <memory>
#include <string>
#include <thread>

#include <httplib.h>

#include "mucorest/error.hpp"
#include "mucorest/simharness.hpp"

namespace mucorest {

/// Serves a SharedScenario over HTTP/1.1 on a background thread. Requests are
/// serialized through the scenario mutex, so the engine and the listener see
/// one consistent state.
class SimServer {
public:
    explicit SimServer(SharedScenario& shared) : shared_(shared) {
        server_.set_keep_alive_max_count(1000000);
        server_.set_tcp_nodelay(true);
        auto handler = [this](const httplib::Request& req, httplib::Response& res) { serve(req, res); };
        server_.Get(".*", handler);
        server_.Post(".*", handler);
        server_.Put(".*", handler);
        server_.Delete(".*", handler);
        server_.Patch(".*", handler);
    }

    SimServer(const SimServer&) = delete;
    SimServer& operator=(const SimServer&) = delete;

    ~SimServer() { stop(); }

    /// Binds and starts listening; port 0 picks an ephemeral port.
    int start(const std::string& host, int port) {
        bound_port_ = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
        if (bound_port_ < 0) throw Error("cannot listen on " + host + ":" + std::to_string(port));
        host_ = host;
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
        return bound_port_;
    }

    // Serves on the calling thread until stop() is called elsewhere.
    void run_blocking(const std::string& host, int port) {
        if (!server_.listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
    }

    void stop() {
        server_.stop();
        if (thread_.joinable()) thread_.join();
    }

    int port() const { return bound_port_; }
    std::string base_url() const { return "http://" + host_ + ":" + std::to_string(bound_port_); }

private:
    void serve(const httplib::Request& req, httplib::Response& res) {
        const auto method = parse_method(req.method);
        HeaderList headers(req.headers.begin(), req.headers.end());
        std::optional<std::string> body;
        if (!req.body.empty()) body = req.body;
        ApiResponse out;
        {
            std::lock_guard lock(shared_.mutex);
            out = method ? shared_.scenario.handle(*method, req.target, headers, body)
                         : ApiResponse::with_status(405, R"({"error":"method not allowed"})");
        }
        res.status = out.status.value_or(500);
        res.set_content(out.body, "application/json");
    }

    SharedScenario& shared_;
    httplib::Server server_;
    std::thread thread_;
    std::string host_ = "127.0.0.1";
    int bound_port_ = -1;
};

}  // namespace mucorest
