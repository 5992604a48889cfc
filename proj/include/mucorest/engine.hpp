#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "mucorest/agent.hpp"
#include "mucorest/bugledger.hpp"
#include "mucorest/call.hpp"
#include "mucorest/coverage.hpp"
#include "mucorest/error.hpp"
#include "mucorest/executor.hpp"
#include "mucorest/reward.hpp"
#include "mucorest/rng.hpp"
#include "mucorest/spec_model.hpp"

namespace mucorest {

inline constexpr int kReportSchemaVersion = 1;

struct RunConfig {
    std::uint64_t max_calls = 20000;
    std::optional<double> time_budget_s;
    std::uint64_t rng_seed = 0;
    PolicyConfig policy;
    RewardConfig rewards;
    RewardMask ablation;
    CoverageProviderKind coverage = CoverageProviderKind::None;
    std::string jacoco_report;  // path or http(s) URL
    std::size_t coverage_poll_every = 1;
    ExecutorOptions executor;
    bool bugs_per_operation = true;
    bool frequency_includes_body_fields = true;
    std::string spec_path;
    std::string base_url;
    HeaderList auth_headers;
    std::string scenario_path;  // sim only; empty means the bundled scenario
    std::string listen;         // sim only; host:port of a loopback listener
    std::string report_out;
    bool trace_rewards = false;
    bool dump_q_tables = false;
    std::uint64_t checkpoint_every = 1000;
    std::uint64_t abort_after_transport_errors = 10;

    void validate() const {
        if (max_calls < 1) throw ConfigError("max_calls", "must be at least 1");
        if (time_budget_s && !(*time_budget_s > 0.0)) throw ConfigError("time_budget_s", "must be positive");
        policy.validate();
        rewards.validate();
        if (coverage_poll_every < 1) throw ConfigError("coverage.poll_every", "must be at least 1");
        if (executor.timeout_ms < 1) throw ConfigError("executor.timeout_ms", "must be positive");
        if (executor.body_cap_bytes < 1) throw ConfigError("executor.body_cap_bytes", "must be positive");
        const auto& rr = executor.random;
        if (rr.int_min > rr.int_max) throw ConfigError("executor.random.int_max", "must not be below int_min");
        if (!(rr.number_min <= rr.number_max)) {
            throw ConfigError("executor.random.number_max", "must not be below number_min");
        }
        if (rr.string_min_len > rr.string_max_len) {
            throw ConfigError("executor.random.string_max_len", "must not be below string_min_len");
        }
        if (coverage == CoverageProviderKind::JacocoReport && jacoco_report.empty()) {
            throw ConfigError("coverage.jacoco_report", "required when coverage is jacoco");
        }
        if (coverage != CoverageProviderKind::JacocoReport && !jacoco_report.empty()) {
            throw ConfigError("coverage.jacoco_report", "only valid with coverage provider jacoco");
        }
    }

    // Echo for the report. Output locations are left out so that two runs
    // writing to different files still produce identical documents.
    nlohmann::json to_json() const {
        nlohmann::json j;
        j["max_calls"] = max_calls;
        j["time_budget_s"] = time_budget_s ? nlohmann::json(*time_budget_s) : nlohmann::json(nullptr);
        j["seed"] = rng_seed;
        j["policy"] = {{"alpha", policy.alpha},
                       {"gamma", policy.gamma},
                       {"epsilon", policy.epsilon},
                       {"epsilon_decay", policy.epsilon_decay}};
        j["rewards"] = {{"R_fg", rewards.R_fg},           {"R_uniq", rewards.R_uniq},
                        {"R_denied", rewards.R_denied},   {"R_invalid", rewards.R_invalid},
                        {"R_success", rewards.R_success}, {"R_failure", rewards.R_failure},
                        {"H", rewards.H}};
        j["ablation"] = {{"disable_cc", ablation.disable_cc}, {"disable_oc", ablation.disable_oc}};
        j["coverage"] = {{"provider", std::string(to_string(coverage))},
                         {"jacoco_report", jacoco_report.empty() ? nlohmann::json(nullptr) : nlohmann::json(jacoco_report)},
                         {"poll_every", coverage_poll_every}};
        const auto& rr = executor.random;
        j["executor"] = {{"timeout_ms", executor.timeout_ms},
                         {"body_cap_bytes", executor.body_cap_bytes},
                         {"random",
                          {{"int_min", rr.int_min},
                           {"int_max", rr.int_max},
                           {"number_min", rr.number_min},
                           {"number_max", rr.number_max},
                           {"string_min_len", rr.string_min_len},
                           {"string_max_len", rr.string_max_len},
                           {"array_max_items", rr.array_max_items}}}};
        j["bugs"] = {{"per_operation", bugs_per_operation}};
        j["spec"] = {{"path", spec_path}, {"frequency_includes_body_fields", frequency_includes_body_fields}};
        j["base_url"] = base_url;
        nlohmann::json auth = nlohmann::json::array();
        for (const auto& [name, _] : auth_headers) auth.push_back(name);  // values are secrets
        j["auth_header_names"] = auth;
        j["scenario"] = scenario_path.empty() ? nlohmann::json(nullptr) : nlohmann::json(scenario_path);
        j["trace_rewards"] = trace_rewards;
        j["dump_q_tables"] = dump_q_tables;
        return j;
    }
};

/// Everything the engine learned from one call.
struct CallRecord {
    std::uint64_t call_index = 0;
    ActionRecord action;
    ApiCall call;
    ApiResponse response;
    std::uint64_t value_fallbacks = 0;
    CoverageSnapshot coverage;
    double coverage_delta = 0.0;
    Stage stage = Stage::FastGrowing;
    std::size_t history_matches = 0;
    std::optional<std::uint64_t> occurrences;
    bool new_bug = false;
    RewardBreakdown reward;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["call"] = call_index;
        j["op"] = action.op_id;
        j["params"] = action.params;
        j["source"] = std::string(to_string(action.source));
        j["values"] = nlohmann::json::object();
        for (const auto& [k, v] : call.param_values) j["values"][k] = v;
        j["fallbacks"] = value_fallbacks;
        nlohmann::json headers = nlohmann::json::array();
        for (const auto& [n, v] : call.headers) headers.push_back({n, v});
        j["request"] = {{"method", std::string(to_string(call.method))},
                        {"url", call.url},
                        {"headers", headers},
                        {"body", call.body ? nlohmann::json(*call.body) : nlohmann::json(nullptr)}};
        j["status"] = response.status ? nlohmann::json(*response.status) : nlohmann::json(nullptr);
        j["transport_error"] =
            response.transport_error ? nlohmann::json(*response.transport_error) : nlohmann::json(nullptr);
        j["truncated"] = response.truncated;
        j["response_digest"] = digest_hex(detail::fnv1a64(normalize_message(response.body)));
        j["coverage"] = {{"covered", coverage.covered_units}, {"total", coverage.total_units}};
        j["delta"] = coverage_delta;
        j["stage"] = std::string(to_string(stage));
        j["N"] = history_matches;
        j["k"] = occurrences ? nlohmann::json(*occurrences) : nlohmann::json(nullptr);
        j["new_bug"] = new_bug;
        j["reward"] = {{"r_cc", reward.r_cc}, {"r_oc", reward.r_oc}, {"r_bd", reward.r_bd}, {"total", reward.total}};
        return j;
    }

    static std::string digest_hex(std::uint64_t d) {
        static constexpr char kHex[] = "0123456789abcdef";
        std::string s(16, '0');
        for (int i = 15; i >= 0; --i, d >>= 4) s[static_cast<std::size_t>(i)] = kHex[d & 0xF];
        return s;
    }
};

struct CoveragePoint {
    std::uint64_t call = 0;
    CoverageSnapshot snapshot;
};

struct RunStats {
    std::uint64_t calls_made = 0;
    std::size_t unique_bugs = 0;
    std::map<std::string, std::uint64_t> status_histogram;  // "200", ..., "none"
    std::vector<CoveragePoint> coverage_curve;                // every kCoverageSampleEvery calls
    std::vector<std::pair<std::uint64_t, std::size_t>> bug_curve;  // (call index, unique bugs so far)
    RewardBreakdown reward_sums;
    std::uint64_t value_fallbacks = 0;
    double wall_time_s = 0.0;

    static constexpr std::uint64_t kCoverageSampleEvery = 50;

    // Index of the call that brought the unique-bug count to `n`, if any.
    std::optional<std::uint64_t> calls_to_reach(std::size_t n) const {
        for (const auto& [call, bugs] : bug_curve) {
            if (bugs >= n) return call;
        }
        return std::nullopt;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["calls_made"] = calls_made;
        j["unique_bugs"] = unique_bugs;
        j["status_histogram"] = nlohmann::json::object();
        for (const auto& [k, v] : status_histogram) j["status_histogram"][k] = v;
        j["coverage_curve"] = nlohmann::json::array();
        for (const auto& p : coverage_curve) {
            j["coverage_curve"].push_back({{"call", p.call},
                                           {"covered", p.snapshot.covered_units},
                                           {"total", p.snapshot.total_units},
                                           {"fraction", p.snapshot.fraction()}});
        }
        j["bug_curve"] = nlohmann::json::array();
        for (const auto& [call, bugs] : bug_curve) j["bug_curve"].push_back({{"call", call}, {"unique_bugs", bugs}});
        j["reward_sums"] = {{"r_cc", reward_sums.r_cc},
                            {"r_oc", reward_sums.r_oc},
                            {"r_bd", reward_sums.r_bd},
                            {"total", reward_sums.total}};
        j["value_fallbacks"] = value_fallbacks;
        return j;
    }
};

enum class RunStatus { Completed, Aborted };

struct RunReport {
    RunStatus status = RunStatus::Completed;
    std::string abort_reason;
    RunStats stats;
    nlohmann::json document;
};

/// The per-call loop: select, generate, execute, measure, reward, update.
class Engine {
public:
    Engine(const ApiSpec& spec, RunConfig config, Transport& transport, CoverageProvider& coverage)
        : spec_(spec),
          config_(std::move(config)),
          policy_(config_.policy),
          executor_(transport, config_.executor),
          coverage_(coverage),
          history_(static_cast<std::size_t>(config_.rewards.H)),
          ledger_(config_.bugs_per_operation),
          rng_(config_.rng_seed) {
        config_.validate();
        policy_.rng_seed = config_.rng_seed;
        q_ = init_q_tables(spec_, parameter_frequency(spec_, config_.frequency_includes_body_fields));
        base_url_ = config_.base_url;
        while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
        const std::string& bp = spec_.base_path;
        if (base_url_.size() < bp.size() || base_url_.compare(base_url_.size() - bp.size(), bp.size(), bp) != 0) {
            base_url_ += bp;
        }
        try {
            prev_coverage_ = coverage_.read_snapshot();
        } catch (const Error& e) {
            spdlog::warn("initial coverage snapshot unavailable: {}", e.what());
        }
    }

    CallRecord step() {
        CallRecord rec;
        rec.call_index = ++calls_;

        // Choose the action.
        rec.action.op_id = select_operation(q_, policy_, rng_);
        const OperationDesc& op = *spec_.find(rec.action.op_id);
        rec.action.params = select_parameters(q_, op, policy_, rng_);
        rec.action.source = select_value_source(q_, op.op_id, policy_, rng_);

        // Materialize and execute.
        std::map<std::string, Value> values;
        for (const auto& p : op.params) {
            if (rec.action.params.count(p.name) == 0 || values.count(p.name) != 0) continue;
            auto generated = generate_value(p, rec.action.source, executor_.pool(), rng_, config_.executor.random);
            rec.value_fallbacks += generated.fell_back ? 1 : 0;
            values.emplace(p.name, std::move(generated.value));
        }
        std::optional<Value> whole_body;
        if (op.body_schema && op.body_schema->type != SchemaType::Object) {
            whole_body = detail::random_from_schema(*op.body_schema, rng_, config_.executor.random);
        }
        rec.call = build_request(op, values, base_url_, config_.auth_headers, whole_body);
        rec.call.call_index = rec.call_index;
        rec.call.source = rec.action.source;
        rec.response = executor_.execute_call(rec.call);

        // Coverage.
        rec.coverage = prev_coverage_.value_or(CoverageSnapshot{});
        try {
            const CoverageSnapshot cur = coverage_.read_snapshot();
            if (prev_coverage_) rec.coverage_delta = coverage_improvement(*prev_coverage_, cur);
            prev_coverage_ = cur;
            rec.coverage = cur;
        } catch (const TotalsMismatch& e) {
            spdlog::warn("{}; restarting coverage baseline", e.what());
            prev_coverage_.reset();
        } catch (const ProviderUnavailable& e) {
            spdlog::warn("coverage provider unavailable: {}", e.what());
        } catch (const MalformedReport& e) {
            spdlog::warn("coverage report unreadable: {}", e.what());
        } catch (const MissingLineCounter& e) {
            spdlog::warn("coverage report unreadable: {}", e.what());
        }
        rec.stage = classify_stage(stage_, rec.coverage_delta);

        // Output history and failure ledger.
        std::uint64_t k = 1;
        if (rec.response.status) {
            std::string normalized = normalize_message(rec.response.body);
            rec.history_matches = history_.match_and_insert(op.op_id, *rec.response.status, normalized);
            if (rec.response.is_server_error()) {
                const auto sig = ledger_.signature_for(op.op_id, *rec.response.status, std::move(normalized));
                const auto outcome = ledger_.record_failure(
                    sig, rec.call_index,
                    RequestSummary{std::string(to_string(rec.call.method)), rec.call.url, rec.call.body});
                k = outcome.k;
                rec.occurrences = outcome.k;
                rec.new_bug = outcome.is_new;
            }
        }

        // Reward and update.
        rec.reward = total_reward(code_coverage_reward(rec.coverage_delta, rec.stage, config_.rewards),
                                  output_coverage_reward(rec.response, rec.history_matches, config_.rewards),
                                  bug_discoverability_reward(rec.response, k, config_.rewards), config_.ablation);
        update_q(q_, rec.action, rec.reward.total, policy_);
        policy_.epsilon *= policy_.epsilon_decay;

        record_stats(rec);
        if (trace_enabled_) trace_.push_back(rec.to_json());

        if (rec.response.status) {
            consecutive_transport_errors_ = 0;
        } else if (++consecutive_transport_errors_ >= config_.abort_after_transport_errors) {
            throw TargetUnreachable(std::to_string(consecutive_transport_errors_) +
                                    " consecutive transport errors, last: " +
                                    rec.response.transport_error.value_or("unknown"));
        }
        return rec;
    }

    /// Steps until the call or time budget runs out, or the target is lost.
    RunReport run() {
        const auto start = std::chrono::steady_clock::now();
        auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };
        RunReport report;
        try {
            if (!executor_.transport().probe()) throw TargetUnreachable("target did not answer the initial probe");
            while (calls_ < config_.max_calls) {
                if (config_.time_budget_s && elapsed() >= *config_.time_budget_s) break;
                step();
                if (!config_.report_out.empty() && config_.checkpoint_every > 0 &&
                    calls_ % config_.checkpoint_every == 0) {
                    write_checkpoint();
                }
            }
        } catch (const TargetUnreachable& e) {
            report.status = RunStatus::Aborted;
            report.abort_reason = e.what();
            spdlog::error("run aborted: {}", e.what());
        }
        stats_.wall_time_s = elapsed();
        report.stats = stats_;
        report.document = emit_report(report.status, report.abort_reason);
        return report;
    }

    nlohmann::json emit_report(RunStatus status, const std::string& abort_reason) const {
        nlohmann::json doc;
        doc["schema_version"] = kReportSchemaVersion;
        doc["tool"] = "mucorest";
        doc["status"] = status == RunStatus::Completed ? "completed" : "aborted";
        doc["abort_reason"] = abort_reason.empty() ? nlohmann::json(nullptr) : nlohmann::json(abort_reason);
        doc["config"] = config_.to_json();
        doc["stats"] = stats_.to_json();
        doc["bugs"] = bugs_to_json(ledger_);
        doc["timing"] = {{"wall_time_s", stats_.wall_time_s}};
        if (config_.dump_q_tables) doc["q_tables"] = q_tables_to_json(q_);
        if (config_.trace_rewards) doc["trace"] = trace_;
        return doc;
    }

    static nlohmann::json bugs_to_json(const BugLedger& ledger) {
        nlohmann::json bugs = nlohmann::json::array();
        for (const auto& r : ledger.records()) {
            bugs.push_back({{"op_id", r.signature.op_id},
                            {"status", r.signature.status},
                            {"message", r.signature.normalized_message},
                            {"digest", CallRecord::digest_hex(r.signature.digest)},
                            {"count", r.count},
                            {"first_call_index", r.first_call_index},
                            {"sample_request",
                             {{"method", r.sample_request.method},
                              {"url", r.sample_request.url},
                              {"body", r.sample_request.body ? nlohmann::json(*r.sample_request.body)
                                                             : nlohmann::json(nullptr)}}}});
        }
        return bugs;
    }

    void set_trace(bool enabled) { trace_enabled_ = enabled; }
    const QTableSet& q_tables() const { return q_; }
    const BugLedger& ledger() const { return ledger_; }
    const RunStats& stats() const { return stats_; }
    const RunConfig& config() const { return config_; }
    const PolicyConfig& policy() const { return policy_; }
    const StageTracker& stage_tracker() const { return stage_; }
    std::uint64_t calls() const { return calls_; }

private:
    void record_stats(const CallRecord& rec) {
        ++stats_.calls_made;
        ++stats_.status_histogram[rec.response.status ? std::to_string(*rec.response.status) : "none"];
        stats_.reward_sums.r_cc += rec.reward.r_cc;
        stats_.reward_sums.r_oc += rec.reward.r_oc;
        stats_.reward_sums.r_bd += rec.reward.r_bd;
        stats_.reward_sums.total += rec.reward.total;
        stats_.value_fallbacks += rec.value_fallbacks;
        if (rec.new_bug) {
            stats_.unique_bugs = ledger_.unique_bug_count();
            stats_.bug_curve.emplace_back(rec.call_index, stats_.unique_bugs);
        }
        if (rec.call_index % RunStats::kCoverageSampleEvery == 0) {
            stats_.coverage_curve.push_back({rec.call_index, rec.coverage});
        }
    }

    void write_checkpoint() const {
        nlohmann::json doc;
        doc["schema_version"] = kReportSchemaVersion;
        doc["checkpoint"] = true;
        doc["stats"] = stats_.to_json();
        doc["bugs"] = bugs_to_json(ledger_);
        const std::string path = config_.report_out + ".checkpoint.json";
        std::ofstream out(path, std::ios::trunc);
        if (!out) {
            spdlog::warn("cannot write checkpoint '{}'", path);
            return;
        }
        out << doc.dump(2) << '\n';
    }

    const ApiSpec& spec_;
    RunConfig config_;
    PolicyConfig policy_;
    Executor executor_;
    CoverageProvider& coverage_;
    ResponseHistory history_;
    BugLedger ledger_;
    Rng rng_;
    QTableSet q_;
    StageTracker stage_;
    std::optional<CoverageSnapshot> prev_coverage_;
    std::string base_url_;
    std::uint64_t calls_ = 0;
    std::uint64_t consecutive_transport_errors_ = 0;
    RunStats stats_;
    bool trace_enabled_ = config_.trace_rewards;
    nlohmann::json trace_ = nlohmann::json::array();
};

/// Writes a report document, pretty-printed.
inline void write_report(const std::string& path, const nlohmann::json& doc) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ReportWriteFailure("cannot open report file '" + path + "' for writing");
    out << doc.dump(2) << '\n';
    out.flush();
    if (!out) throw ReportWriteFailure("failed writing report file '" + path + "'");
}

}  // namespace mucorest
