#pragma once

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "mucorest/config.hpp"
#include "mucorest/coverage.hpp"
#include "mucorest/default_scenario.hpp"
#include "mucorest/engine.hpp"
#include "mucorest/error.hpp"
#include "mucorest/http_transport.hpp"
#include "mucorest/sim_server.hpp"
#include "mucorest/simharness.hpp"
#include "mucorest/simulate.hpp"
#include "mucorest/spec_model.hpp"

namespace mucorest::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitReplayMismatch = 1,
    kExitConfig = 2,
    kExitUnreachable = 3,
    kExitInternal = 4,
};

inline constexpr const char* kDefaultReportPath = "mucorest-report.json";

inline std::string read_text_file(const std::string& path, const std::string& key) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(key, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline Scenario load_scenario_or_default(const std::string& path) {
    if (path.empty()) return load_scenario(kDefaultScenarioJson);
    return load_scenario(read_text_file(path, "scenario"));
}

inline std::pair<std::string, int> parse_listen(const std::string& text) {
    const auto colon = text.rfind(':');
    if (colon == std::string::npos) throw ConfigError("listen", "expected host:port, got '" + text + "'");
    const std::string host = text.substr(0, colon);
    int port = -1;
    try {
        std::size_t used = 0;
        port = std::stoi(text.substr(colon + 1), &used);
        if (used != text.size() - colon - 1) port = -1;
    } catch (const std::logic_error&) {
        port = -1;
    }
    if (host.empty() || port < 0 || port > 65535) throw ConfigError("listen", "expected host:port, got '" + text + "'");
    return {host, port};
}

inline std::unique_ptr<CoverageProvider> make_provider(const RunConfig& cfg) {
    switch (cfg.coverage) {
        case CoverageProviderKind::None: return std::make_unique<NullCoverageProvider>();
        case CoverageProviderKind::JacocoReport: {
            const std::string where = cfg.jacoco_report;
            const bool remote = where.rfind("http://", 0) == 0 || where.rfind("https://", 0) == 0;
            std::function<std::string()> fetch;
            if (remote) {
                fetch = [where] { return fetch_url(where); };
            } else {
                fetch = [where] { return read_file_or_unavailable(where); };
            }
            return std::make_unique<JacocoReportProvider>(std::move(fetch), cfg.coverage_poll_every);
        }
        case CoverageProviderKind::Synthetic: break;
    }
    throw ConfigError("coverage.provider", "synthetic coverage is only available in the sim subcommand");
}

/// Human-readable summary of a report document. Every number is copied from
/// the document as stored.
inline void print_summary(const nlohmann::json& doc, std::ostream& out) {
    if (!doc.is_object() || !doc.contains("stats") || !doc["stats"].is_object()) {
        throw ParseError("not a mucorest report: missing 'stats'");
    }
    const auto& stats = doc["stats"];
    out << "status        " << doc.value("status", std::string("unknown"));
    if (doc.contains("abort_reason") && doc["abort_reason"].is_string()) {
        out << " (" << doc["abort_reason"].get<std::string>() << ")";
    }
    out << '\n';
    if (doc.contains("config") && doc["config"].contains("seed")) out << "seed          " << doc["config"]["seed"] << '\n';
    out << "calls_made    " << stats.value("calls_made", nlohmann::json(0)) << '\n';
    out << "unique_bugs   " << stats.value("unique_bugs", nlohmann::json(0)) << '\n';
    if (stats.contains("coverage_curve") && !stats["coverage_curve"].empty()) {
        const auto& last = stats["coverage_curve"].back();
        out << "coverage      " << last["covered"] << "/" << last["total"] << " at call " << last["call"] << '\n';
    }
    if (stats.contains("reward_sums")) {
        const auto& r = stats["reward_sums"];
        out << "reward_sums   r_cc=" << r["r_cc"] << " r_oc=" << r["r_oc"] << " r_bd=" << r["r_bd"]
            << " total=" << r["total"] << '\n';
    }
    if (stats.contains("status_histogram")) {
        out << "statuses     ";
        for (const auto& [code, n] : stats["status_histogram"].items()) out << ' ' << code << ':' << n;
        out << '\n';
    }
    if (doc.contains("bugs") && doc["bugs"].is_array() && !doc["bugs"].empty()) {
        out << "bugs\n";
        for (const auto& b : doc["bugs"]) {
            out << "  #" << std::left << std::setw(6) << b.value("first_call_index", nlohmann::json(0)).dump() << ' '
                << b.value("status", 0) << ' ' << b.value("op_id", std::string()) << "  x"
                << b.value("count", nlohmann::json(0)).dump() << "  " << b.value("message", std::string()) << '\n';
        }
    }
}

inline void finish_run(const RunConfig& cfg, const RunReport& report) {
    write_report(cfg.report_out, report.document);
    print_summary(report.document, std::cerr);
    std::cerr << "report        " << cfg.report_out << '\n';
}

inline int cmd_run(const RunConfig& cfg) {
    if (cfg.spec_path.empty()) throw ConfigError("spec.path", "--spec is required");
    if (cfg.base_url.empty()) throw ConfigError("base_url", "--base-url is required");
    const ApiSpec spec = parse_spec(read_text_file(cfg.spec_path, "spec.path"), guess_spec_format(cfg.spec_path));
    if (!split_url(cfg.base_url)) throw ConfigError("base_url", "expected an absolute http(s) URL");
    auto provider = make_provider(cfg);
    HttpTransport transport(cfg.base_url);
    Engine engine(spec, cfg, transport, *provider);
    const RunReport report = engine.run();
    finish_run(cfg, report);
    return report.status == RunStatus::Completed ? kExitOk : kExitUnreachable;
}

inline int cmd_sim(RunConfig cfg, bool serve_only) {
    if (cfg.coverage == CoverageProviderKind::JacocoReport) {
        throw ConfigError("coverage.provider", "the simulator provides synthetic coverage only");
    }
    SharedScenario shared(load_scenario_or_default(cfg.scenario_path));
    if (serve_only) {
        const auto [host, port] = parse_listen(cfg.listen.empty() ? std::string("127.0.0.1:8080") : cfg.listen);
        SimServer server(shared);
        spdlog::info("serving scenario '{}' on http://{}:{}{}", shared.scenario.name, host, port,
                     shared.scenario.base_path);
        server.run_blocking(host, port);
        return kExitOk;
    }
    const ApiSpec spec = scenario_spec(shared.scenario);
    auto provider = make_sim_provider(shared, cfg.coverage);
    std::optional<SimServer> server;
    RunReport report;
    {
        std::unique_ptr<Transport> transport;
        if (cfg.listen.empty()) {
            if (cfg.base_url.empty()) cfg.base_url = kSimBaseUrl;
            transport = std::make_unique<InProcessTransport>(shared);
        } else {
            const auto [host, port] = parse_listen(cfg.listen);
            server.emplace(shared);
            server->start(host, port);
            cfg.base_url = server->base_url();
            transport = std::make_unique<HttpTransport>(cfg.base_url);
        }
        Engine engine(spec, cfg, *transport, *provider);
        report = engine.run();
    }
    // The client's keep-alive connection is closed by now, so stop() returns at once.
    if (server) server->stop();
    finish_run(cfg, report);
    return report.status == RunStatus::Completed ? kExitOk : kExitUnreachable;
}

inline nlohmann::json read_report_file(const std::string& path) {
    const auto doc = nlohmann::json::parse(read_text_file(path, "report"), nullptr, false);
    if (doc.is_discarded()) throw ParseError("'" + path + "' is not valid JSON");
    return doc;
}

inline ApiCall call_from_trace(const nlohmann::json& rec) {
    const auto& req = rec.at("request");
    ApiCall call;
    call.call_index = rec.at("call").get<std::uint64_t>();
    call.op_id = rec.at("op").get<std::string>();
    const auto method = parse_method(req.at("method").get<std::string>());
    if (!method) throw ParseError("trace record " + std::to_string(call.call_index) + " has an unknown method");
    call.method = *method;
    call.url = req.at("url").get<std::string>();
    for (const auto& h : req.at("headers")) call.headers.emplace_back(h.at(0).get<std::string>(), h.at(1).get<std::string>());
    if (req.at("body").is_string()) call.body = req["body"].get<std::string>();
    return call;
}

/// Re-sends every traced request in order and compares status and normalized
/// response digest with the recorded ones.
inline int cmd_replay(const std::string& report_path, const std::optional<std::string>& base_url,
                      const std::optional<std::string>& scenario_path) {
    const auto doc = read_report_file(report_path);
    if (!doc.contains("trace") || !doc["trace"].is_array()) {
        throw ConfigError("trace", "report has no per-call trace; rerun with --trace-rewards");
    }
    std::unique_ptr<SharedScenario> shared;
    std::unique_ptr<Transport> transport;
    if (base_url) {
        if (!split_url(*base_url)) throw ConfigError("base_url", "expected an absolute http(s) URL");
        transport = std::make_unique<HttpTransport>(*base_url);
    } else {
        std::string path = scenario_path.value_or("");
        if (!scenario_path && doc.contains("config") && doc["config"].value("scenario", nlohmann::json()).is_string()) {
            path = doc["config"]["scenario"].get<std::string>();
        }
        shared = std::make_unique<SharedScenario>(load_scenario_or_default(path));
        transport = std::make_unique<InProcessTransport>(*shared);
    }
    ExecutorOptions options;
    if (doc.contains("config") && doc["config"].contains("executor")) {
        const auto& e = doc["config"]["executor"];
        options.timeout_ms = e.value("timeout_ms", options.timeout_ms);
        options.body_cap_bytes = e.value("body_cap_bytes", options.body_cap_bytes);
    }
    Executor executor(*transport, options);
    std::uint64_t mismatches = 0;
    std::uint64_t replayed = 0;
    for (const auto& rec : doc["trace"]) {
        ApiCall call = call_from_trace(rec);
        if (base_url) {
            const auto parts = split_url(call.url);
            const auto target = split_url(*base_url);
            if (parts && target) call.url = target->origin + parts->target;
        }
        const ApiResponse resp = executor.execute_call(call);
        ++replayed;
        const nlohmann::json status = resp.status ? nlohmann::json(*resp.status) : nlohmann::json(nullptr);
        const std::string digest = CallRecord::digest_hex(detail::fnv1a64(normalize_message(resp.body)));
        const bool same_status = status == rec.at("status");
        const bool same_body = digest == rec.value("response_digest", std::string());
        if (!same_status || !same_body) {
            ++mismatches;
            std::cerr << "call " << call.call_index << " " << call.op_id << ": recorded " << rec.at("status").dump()
                      << ", replayed " << status.dump() << (same_body ? "" : " (body differs)") << '\n';
        }
    }
    std::cerr << "replayed " << replayed << " calls, " << mismatches << " mismatches\n";
    return mismatches == 0 ? kExitOk : kExitReplayMismatch;
}

inline int cmd_report(const std::string& path) {
    print_summary(read_report_file(path), std::cout);
    return kExitOk;
}

inline void setup_logging(const std::string& level) {
    auto logger = spdlog::stderr_color_mt("mucorest");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
    const auto lvl = spdlog::level::from_str(level);
    if (lvl == spdlog::level::off && level != "off") throw ConfigError("log_level", "unknown level '" + level + "'");
    spdlog::set_level(lvl);
}

template <typename T>
void add_optional(CLI::App& app, const std::string& name, std::optional<T>& slot, const std::string& help) {
    app.add_option_function<T>(name, [&slot](const T& v) { slot = v; }, help);
}

inline void add_run_flags(CLI::App& app, CliFlags& f, std::optional<std::string>& config_file) {
    add_optional(app, "--config", config_file, "JSON config file (flags override it)");
    add_optional(app, "--max-calls", f.max_calls, "call budget (default 20000)");
    add_optional(app, "--time-budget", f.time_budget_s, "wall-clock budget in seconds");
    add_optional(app, "--seed", f.seed, "RNG seed (falls back to MUCOREST_SEED)");
    add_optional(app, "--alpha", f.alpha, "learning rate");
    add_optional(app, "--gamma", f.gamma, "discount factor");
    add_optional(app, "--epsilon", f.epsilon, "exploration probability");
    add_optional(app, "--epsilon-decay", f.epsilon_decay, "per-call epsilon multiplier");
    add_optional(app, "--coverage", f.coverage, "coverage provider: none, jacoco or synthetic");
    app.add_flag("--disable-cc", f.disable_cc, "zero the code-coverage reward");
    app.add_flag("--disable-oc", f.disable_oc, "zero the output-coverage reward");
    add_optional(app, "--report-out", f.report_out, "report file (default mucorest-report.json)");
    app.add_flag("--trace-rewards", f.trace_rewards, "append the per-call trace to the report");
    app.add_flag("--dump-q-tables", f.dump_q_tables, "append the final Q-tables to the report");
}

/// Entry point; returns the process exit code.
inline int main(int argc, char** argv) {
    CLI::App app{"Coverage-guided REST API fuzzer driven by Q-learning"};
    app.require_subcommand(1);
    std::string log_level = "info";
    app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off");

    CliFlags run_flags;
    std::optional<std::string> run_config;
    auto* run = app.add_subcommand("run", "fuzz a live service described by an OpenAPI document");
    add_run_flags(*run, run_flags, run_config);
    add_optional(*run, "--spec", run_flags.spec_path, "OpenAPI 3.x document (JSON or YAML)");
    add_optional(*run, "--base-url", run_flags.base_url, "service origin, e.g. http://localhost:8080");
    add_optional(*run, "--jacoco-report", run_flags.jacoco_report, "JaCoCo XML report path or URL");
    run->add_option("--auth-header", run_flags.auth_headers, "static header 'Name: value' (repeatable)");

    CliFlags sim_flags;
    std::optional<std::string> sim_config;
    bool serve_only = false;
    auto* sim = app.add_subcommand("sim", "fuzz the bundled simulator scenario");
    add_run_flags(*sim, sim_flags, sim_config);
    add_optional(*sim, "--scenario", sim_flags.scenario_path, "scenario JSON (default: bundled storefront)");
    add_optional(*sim, "--listen", sim_flags.listen, "serve the scenario on host:port and fuzz it over TCP");
    sim->add_flag("--serve", serve_only, "only serve the scenario over TCP, no fuzzing");

    std::string replay_file;
    std::optional<std::string> replay_base;
    std::optional<std::string> replay_scenario;
    auto* replay = app.add_subcommand("replay", "re-send the calls of a traced report and diff the responses");
    replay->add_option("report", replay_file, "report written with --trace-rewards")->required();
    add_optional(*replay, "--base-url", replay_base, "replay against a live service instead of the simulator");
    add_optional(*replay, "--scenario", replay_scenario, "scenario JSON for simulator replay");

    std::string report_file;
    auto* report = app.add_subcommand("report", "print a summary of a report file");
    report->add_option("report", report_file, "report JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        setup_logging(log_level);
        auto resolve = [](CliFlags& flags, const std::optional<std::string>& file) {
            std::optional<nlohmann::json> doc;
            if (file) doc = load_config_file(*file);
            RunConfig cfg = resolve_config(flags, doc);
            if (cfg.report_out.empty()) cfg.report_out = kDefaultReportPath;
            return cfg;
        };
        if (run->parsed()) return cmd_run(resolve(run_flags, run_config));
        if (sim->parsed()) {
            std::optional<nlohmann::json> doc;
            if (sim_config) doc = load_config_file(*sim_config);
            const bool file_sets_provider = doc && doc->is_object() && doc->contains("coverage") &&
                                            (*doc)["coverage"].is_object() && (*doc)["coverage"].contains("provider");
            if (!sim_flags.coverage && !file_sets_provider) sim_flags.coverage = "synthetic";
            RunConfig cfg = resolve_config(sim_flags, doc);
            if (cfg.report_out.empty()) cfg.report_out = kDefaultReportPath;
            return cmd_sim(std::move(cfg), serve_only);
        }
        if (replay->parsed()) return cmd_replay(replay_file, replay_base, replay_scenario);
        if (report->parsed()) return cmd_report(report_file);
    } catch (const ConfigError& e) {
        spdlog::error("configuration error: {}", e.what());
        return kExitConfig;
    } catch (const SchemaError& e) {
        spdlog::error("scenario error: {}", e.what());
        return kExitConfig;
    } catch (const UnsupportedFeature& e) {
        spdlog::error("unsupported spec: {}", e.what());
        return kExitConfig;
    } catch (const ParseError& e) {
        spdlog::error("parse error: {}", e.what());
        return kExitConfig;
    } catch (const TargetUnreachable& e) {
        spdlog::error("target unreachable: {}", e.what());
        return kExitUnreachable;
    } catch (const std::exception& e) {
        spdlog::error("internal error: {}", e.what());
        return kExitInternal;
    }
    return kExitInternal;
}

}  // namespace mucorest::cli
