#pragma once

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mucorest/coverage.hpp"
#include "mucorest/engine.hpp"
#include "mucorest/error.hpp"

namespace mucorest {

/// Values given on the command line; unset members leave lower layers alone.
struct CliFlags {
    std::optional<std::string> spec_path;
    std::optional<std::string> base_url;
    std::optional<std::uint64_t> max_calls;
    std::optional<double> time_budget_s;
    std::optional<std::uint64_t> seed;
    std::optional<double> alpha;
    std::optional<double> gamma;
    std::optional<double> epsilon;
    std::optional<double> epsilon_decay;
    std::optional<std::string> coverage;
    std::optional<std::string> jacoco_report;
    std::vector<std::string> auth_headers;  // "Name: value"
    bool disable_cc = false;
    bool disable_oc = false;
    std::optional<std::string> report_out;
    bool trace_rewards = false;
    bool dump_q_tables = false;
    std::optional<std::string> scenario_path;
    std::optional<std::string> listen;
};

inline std::optional<CoverageProviderKind> parse_provider_kind(std::string_view s) {
    if (s == "none") return CoverageProviderKind::None;
    if (s == "jacoco") return CoverageProviderKind::JacocoReport;
    if (s == "synthetic") return CoverageProviderKind::Synthetic;
    return std::nullopt;
}

inline std::pair<std::string, std::string> parse_header_line(const std::string& line, const std::string& key) {
    const auto colon = line.find(':');
    if (colon == std::string::npos || colon == 0) throw ConfigError(key, "expected 'Name: value', got '" + line + "'");
    std::string name = line.substr(0, colon);
    std::string value = line.substr(colon + 1);
    while (!value.empty() && (value.front() == ' ' || value.front() == '\t')) value.erase(value.begin());
    while (!name.empty() && name.back() == ' ') name.pop_back();
    return {name, value};
}

namespace detail {

class ConfigReader {
public:
    explicit ConfigReader(RunConfig& cfg) : cfg_(cfg) {}

    void apply(const nlohmann::json& doc) {
        if (!doc.is_object()) throw ConfigError("", "config file must hold a JSON object");
        check_keys(doc, "",
                   {"max_calls", "time_budget_s", "seed", "policy", "rewards", "ablation", "coverage", "executor",
                    "bugs", "spec", "base_url", "auth_headers", "scenario", "listen", "report_out", "trace_rewards",
                    "dump_q_tables", "checkpoint_every"});
        read_uint(doc, "", "max_calls", cfg_.max_calls);
        if (doc.contains("time_budget_s")) {
            if (doc["time_budget_s"].is_null()) {
                cfg_.time_budget_s.reset();
            } else {
                double t = 0;
                read_number(doc, "", "time_budget_s", t);
                cfg_.time_budget_s = t;
            }
        }
        read_uint(doc, "", "seed", cfg_.rng_seed);
        if (const auto* p = section(doc, "policy", {"alpha", "gamma", "epsilon", "epsilon_decay"})) {
            read_number(*p, "policy.", "alpha", cfg_.policy.alpha);
            read_number(*p, "policy.", "gamma", cfg_.policy.gamma);
            read_number(*p, "policy.", "epsilon", cfg_.policy.epsilon);
            read_number(*p, "policy.", "epsilon_decay", cfg_.policy.epsilon_decay);
        }
        if (const auto* r = section(doc, "rewards", {"R_fg", "R_uniq", "R_denied", "R_invalid", "R_success",
                                                      "R_failure", "H"})) {
            read_number(*r, "rewards.", "R_fg", cfg_.rewards.R_fg);
            read_number(*r, "rewards.", "R_uniq", cfg_.rewards.R_uniq);
            read_number(*r, "rewards.", "R_denied", cfg_.rewards.R_denied);
            read_number(*r, "rewards.", "R_invalid", cfg_.rewards.R_invalid);
            read_number(*r, "rewards.", "R_success", cfg_.rewards.R_success);
            read_number(*r, "rewards.", "R_failure", cfg_.rewards.R_failure);
            if (r->contains("H")) {
                const auto& h = (*r)["H"];
                if (!h.is_number_integer()) throw ConfigError("rewards.H", "must be an integer");
                cfg_.rewards.H = h.get<long long>();
            }
        }
        if (const auto* a = section(doc, "ablation", {"disable_cc", "disable_oc"})) {
            read_bool(*a, "ablation.", "disable_cc", cfg_.ablation.disable_cc);
            read_bool(*a, "ablation.", "disable_oc", cfg_.ablation.disable_oc);
        }
        if (const auto* c = section(doc, "coverage", {"provider", "jacoco_report", "poll_every"})) {
            if (c->contains("provider")) {
                std::string s;
                read_string(*c, "coverage.", "provider", s);
                const auto kind = parse_provider_kind(s);
                if (!kind) throw ConfigError("coverage.provider", "expected none, jacoco or synthetic");
                cfg_.coverage = *kind;
            }
            read_string(*c, "coverage.", "jacoco_report", cfg_.jacoco_report);
            std::uint64_t poll = cfg_.coverage_poll_every;
            read_uint(*c, "coverage.", "poll_every", poll);
            cfg_.coverage_poll_every = static_cast<std::size_t>(poll);
        }
        if (const auto* e = section(doc, "executor", {"timeout_ms", "body_cap_bytes", "random"})) {
            std::uint64_t timeout = static_cast<std::uint64_t>(cfg_.executor.timeout_ms);
            read_uint(*e, "executor.", "timeout_ms", timeout);
            if (timeout > 3600000) throw ConfigError("executor.timeout_ms", "must be at most one hour");
            cfg_.executor.timeout_ms = static_cast<int>(timeout);
            std::uint64_t cap = cfg_.executor.body_cap_bytes;
            read_uint(*e, "executor.", "body_cap_bytes", cap);
            cfg_.executor.body_cap_bytes = static_cast<std::size_t>(cap);
            if (const auto* r = section(*e, "executor.random", "random",
                                        {"int_min", "int_max", "number_min", "number_max", "string_min_len",
                                         "string_max_len", "array_max_items"})) {
                auto& rr = cfg_.executor.random;
                read_int(*r, "executor.random.", "int_min", rr.int_min);
                read_int(*r, "executor.random.", "int_max", rr.int_max);
                read_number(*r, "executor.random.", "number_min", rr.number_min);
                read_number(*r, "executor.random.", "number_max", rr.number_max);
                read_size(*r, "executor.random.", "string_min_len", rr.string_min_len);
                read_size(*r, "executor.random.", "string_max_len", rr.string_max_len);
                read_size(*r, "executor.random.", "array_max_items", rr.array_max_items);
            }
        }
        if (const auto* b = section(doc, "bugs", {"per_operation"})) {
            read_bool(*b, "bugs.", "per_operation", cfg_.bugs_per_operation);
        }
        if (const auto* s = section(doc, "spec", {"path", "frequency_includes_body_fields"})) {
            read_string(*s, "spec.", "path", cfg_.spec_path);
            read_bool(*s, "spec.", "frequency_includes_body_fields", cfg_.frequency_includes_body_fields);
        }
        read_string(doc, "", "base_url", cfg_.base_url);
        if (doc.contains("auth_headers")) {
            const auto& list = doc["auth_headers"];
            if (!list.is_array()) throw ConfigError("auth_headers", "must be an array of 'Name: value' strings");
            cfg_.auth_headers.clear();
            for (std::size_t i = 0; i < list.size(); ++i) {
                const std::string key = "auth_headers." + std::to_string(i);
                if (!list[i].is_string()) throw ConfigError(key, "must be a string");
                cfg_.auth_headers.push_back(parse_header_line(list[i].get<std::string>(), key));
            }
        }
        read_string(doc, "", "scenario", cfg_.scenario_path);
        read_string(doc, "", "listen", cfg_.listen);
        read_string(doc, "", "report_out", cfg_.report_out);
        read_bool(doc, "", "trace_rewards", cfg_.trace_rewards);
        read_bool(doc, "", "dump_q_tables", cfg_.dump_q_tables);
        read_uint(doc, "", "checkpoint_every", cfg_.checkpoint_every);
    }

private:
    static void check_keys(const nlohmann::json& obj, const std::string& prefix, const std::set<std::string>& allowed) {
        for (const auto& [key, _] : obj.items()) {
            if (allowed.count(key) == 0) throw ConfigError(prefix + key, "unknown key");
        }
    }

    static const nlohmann::json* section(const nlohmann::json& doc, const std::string& name,
                                         const std::set<std::string>& allowed) {
        return section(doc, name, name, allowed);
    }

    static const nlohmann::json* section(const nlohmann::json& doc, const std::string& path, const std::string& key,
                                         const std::set<std::string>& allowed) {
        if (!doc.contains(key)) return nullptr;
        const auto& s = doc[key];
        if (!s.is_object()) throw ConfigError(path, "must be an object");
        check_keys(s, path + ".", allowed);
        return &s;
    }

    static void read_int(const nlohmann::json& obj, const std::string& prefix, const char* key, std::int64_t& out) {
        if (!obj.contains(key)) return;
        if (!obj[key].is_number_integer()) throw ConfigError(prefix + key, "must be an integer");
        out = obj[key].get<std::int64_t>();
    }

    static void read_size(const nlohmann::json& obj, const std::string& prefix, const char* key, std::size_t& out) {
        std::uint64_t v = out;
        read_uint(obj, prefix, key, v);
        out = static_cast<std::size_t>(v);
    }

    static void read_number(const nlohmann::json& obj, const std::string& prefix, const char* key, double& out) {
        if (!obj.contains(key)) return;
        if (!obj[key].is_number()) throw ConfigError(prefix + key, "must be a number");
        out = obj[key].get<double>();
    }

    static void read_uint(const nlohmann::json& obj, const std::string& prefix, const char* key, std::uint64_t& out) {
        if (!obj.contains(key)) return;
        const auto& v = obj[key];
        if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)) {
            throw ConfigError(prefix + key, "must be a non-negative integer");
        }
        out = v.get<std::uint64_t>();
    }

    static void read_bool(const nlohmann::json& obj, const std::string& prefix, const char* key, bool& out) {
        if (!obj.contains(key)) return;
        if (!obj[key].is_boolean()) throw ConfigError(prefix + key, "must be a boolean");
        out = obj[key].get<bool>();
    }

    static void read_string(const nlohmann::json& obj, const std::string& prefix, const char* key, std::string& out) {
        if (!obj.contains(key)) return;
        if (!obj[key].is_string()) throw ConfigError(prefix + key, "must be a string");
        out = obj[key].get<std::string>();
    }

    RunConfig& cfg_;
};

}  // namespace detail

inline nlohmann::json load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config", "cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    auto doc = nlohmann::json::parse(ss.str(), nullptr, false);
    if (doc.is_discarded()) throw ConfigError("config", "config file '" + path + "' is not valid JSON");
    return doc;
}

inline std::optional<std::uint64_t> seed_from_env() {
    const char* raw = std::getenv("MUCOREST_SEED");
    if (raw == nullptr || *raw == '\0') return std::nullopt;
    const std::string text(raw);
    std::size_t used = 0;
    try {
        if (text.front() == '-') throw std::invalid_argument("");
        const auto v = std::stoull(text, &used);
        if (used != text.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::logic_error&) {
        throw ConfigError("seed", "MUCOREST_SEED must be a non-negative integer, got '" + text + "'");
    }
}

/// Layers defaults < config file < flags. The seed falls back to
/// MUCOREST_SEED when neither the file nor the flags set it.
inline RunConfig resolve_config(const CliFlags& flags, const std::optional<nlohmann::json>& file) {
    RunConfig cfg;
    bool seed_set = false;
    if (file) {
        detail::ConfigReader(cfg).apply(*file);
        seed_set = file->contains("seed");
    }
    if (flags.seed) {
        cfg.rng_seed = *flags.seed;
        seed_set = true;
    }
    if (!seed_set) {
        if (const auto env = seed_from_env()) cfg.rng_seed = *env;
    }
    if (flags.spec_path) cfg.spec_path = *flags.spec_path;
    if (flags.base_url) cfg.base_url = *flags.base_url;
    if (flags.max_calls) cfg.max_calls = *flags.max_calls;
    if (flags.time_budget_s) cfg.time_budget_s = *flags.time_budget_s;
    if (flags.alpha) cfg.policy.alpha = *flags.alpha;
    if (flags.gamma) cfg.policy.gamma = *flags.gamma;
    if (flags.epsilon) cfg.policy.epsilon = *flags.epsilon;
    if (flags.epsilon_decay) cfg.policy.epsilon_decay = *flags.epsilon_decay;
    if (flags.coverage) {
        const auto kind = parse_provider_kind(*flags.coverage);
        if (!kind) throw ConfigError("coverage.provider", "expected none, jacoco or synthetic");
        cfg.coverage = *kind;
    }
    if (flags.jacoco_report) {
        if (flags.coverage && cfg.coverage != CoverageProviderKind::JacocoReport) {
            throw ConfigError("coverage.jacoco_report", "--jacoco-report conflicts with --coverage " + *flags.coverage);
        }
        cfg.jacoco_report = *flags.jacoco_report;
        cfg.coverage = CoverageProviderKind::JacocoReport;
    } else if (flags.coverage && cfg.coverage != CoverageProviderKind::JacocoReport) {
        cfg.jacoco_report.clear();
    }
    if (!flags.auth_headers.empty()) {
        cfg.auth_headers.clear();
        for (const auto& h : flags.auth_headers) cfg.auth_headers.push_back(parse_header_line(h, "auth_headers"));
    }
    if (flags.disable_cc) cfg.ablation.disable_cc = true;
    if (flags.disable_oc) cfg.ablation.disable_oc = true;
    if (flags.report_out) cfg.report_out = *flags.report_out;
    if (flags.trace_rewards) cfg.trace_rewards = true;
    if (flags.dump_q_tables) cfg.dump_q_tables = true;
    if (flags.scenario_path) cfg.scenario_path = *flags.scenario_path;
    if (flags.listen) cfg.listen = *flags.listen;
    cfg.validate();
    return cfg;
}

}  // namespace mucorest
