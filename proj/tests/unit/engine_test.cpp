#include <gtest/gtest.h>

#include <cstdio>

#include "mucorest/default_scenario.hpp"
#include "mucorest/simulate.hpp"

using namespace mucorest;

namespace {

const Scenario& scenario() {
    static const Scenario s = load_scenario(kDefaultScenarioJson);
    return s;
}

RunConfig sim_config(std::uint64_t calls, std::uint64_t seed = 7) {
    RunConfig cfg;
    cfg.max_calls = calls;
    cfg.rng_seed = seed;
    cfg.coverage = CoverageProviderKind::Synthetic;
    cfg.trace_rewards = true;
    return cfg;
}

class DeadTransport final : public Transport {
public:
    ApiResponse send(const ApiCall&, int) override { return ApiResponse::failed("connection refused"); }
};

class FlakyProvider final : public CoverageProvider {
public:
    CoverageSnapshot read_snapshot() override {
        if (++reads_ % 2 == 0) throw ProviderUnavailable("down");
        return {0, 10};
    }
    CoverageProviderKind kind() const override { return CoverageProviderKind::JacocoReport; }

private:
    int reads_ = 0;
};

nlohmann::json without_timing(nlohmann::json doc) {
    doc.erase("timing");
    return doc;
}

}  // namespace

TEST(RunConfigTest, Validation) {
    RunConfig cfg;
    EXPECT_EQ(cfg.max_calls, 20000u);
    EXPECT_NO_THROW(cfg.validate());
    cfg.max_calls = 0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = {};
    cfg.coverage = CoverageProviderKind::JacocoReport;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg.jacoco_report = "jacoco.xml";
    EXPECT_NO_THROW(cfg.validate());
    cfg = {};
    cfg.time_budget_s = -1.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(EngineTest, CallBudgetIsExact) {
    const auto report = simulate(scenario(), sim_config(100));
    EXPECT_EQ(report.status, RunStatus::Completed);
    EXPECT_EQ(report.stats.calls_made, 100u);
    EXPECT_EQ(report.document["trace"].size(), 100u);
    EXPECT_EQ(report.document["stats"]["calls_made"], 100);
    std::uint64_t histogram_total = 0;
    for (const auto& [_, n] : report.document["stats"]["status_histogram"].items()) histogram_total += n.get<std::uint64_t>();
    EXPECT_EQ(histogram_total, 100u);
}

TEST(EngineTest, FirstRecordIsFullyPopulated) {
    const auto report = simulate(scenario(), sim_config(1));
    const auto& rec = report.document["trace"].at(0);
    for (const char* key : {"call", "op", "params", "source", "values", "request", "status", "response_digest",
                            "coverage", "delta", "stage", "N", "k", "new_bug", "reward"}) {
        EXPECT_TRUE(rec.contains(key)) << key;
    }
    for (const char* key : {"r_cc", "r_oc", "r_bd", "total"}) EXPECT_TRUE(rec["reward"].contains(key)) << key;
    EXPECT_EQ(rec["call"], 1);
}

TEST(EngineTest, TraceMatchesRewardRules) {
    const auto report = simulate(scenario(), sim_config(600, 3));
    const RewardConfig r;
    for (const auto& rec : report.document["trace"]) {
        const auto& rw = rec["reward"];
        EXPECT_NEAR(rw["total"].get<double>(),
                    rw["r_cc"].get<double>() + rw["r_oc"].get<double>() + rw["r_bd"].get<double>(), 1e-12);
        const double oc = rw["r_oc"].get<double>();
        EXPECT_LE(std::abs(oc), r.R_uniq + 1e-12);
        EXPECT_LE(rec["N"].get<int>(), r.H);
        if (rec["delta"].get<double>() == 0.0) {
            EXPECT_EQ(rw["r_cc"].get<double>(), 0.0);
        }
    }
}

TEST(EngineTest, DisableCodeCoverage) {
    auto cfg = sim_config(400);
    cfg.ablation.disable_cc = true;
    const auto report = simulate(scenario(), cfg);
    for (const auto& rec : report.document["trace"]) EXPECT_EQ(rec["reward"]["r_cc"].get<double>(), 0.0);
}

TEST(EngineTest, BothDisabledLeavesBugReward) {
    auto cfg = sim_config(400);
    cfg.ablation = {true, true};
    const auto report = simulate(scenario(), cfg);
    for (const auto& rec : report.document["trace"]) {
        EXPECT_EQ(rec["reward"]["total"].get<double>(), rec["reward"]["r_bd"].get<double>());
    }
}

TEST(EngineTest, SameSeedSameReport) {
    const auto a = simulate(scenario(), sim_config(500, 21));
    const auto b = simulate(scenario(), sim_config(500, 21));
    EXPECT_EQ(without_timing(a.document).dump(), without_timing(b.document).dump());
    const auto c = simulate(scenario(), sim_config(500, 22));
    EXPECT_NE(a.document["trace"].dump(), c.document["trace"].dump());
}

TEST(EngineTest, ShortRunIsPrefixOfLongRun) {
    const auto shortrun = simulate(scenario(), sim_config(150, 5));
    const auto longrun = simulate(scenario(), sim_config(300, 5));
    for (std::size_t i = 0; i < 150; ++i) EXPECT_EQ(shortrun.document["trace"][i], longrun.document["trace"][i]);
}

TEST(EngineTest, UniqueBugsMatchLedger) {
    SharedScenario shared(scenario());
    const auto spec = scenario_spec(shared.scenario);
    InProcessTransport transport(shared);
    SyntheticCoverageProvider provider(shared);
    auto cfg = sim_config(1500, 9);
    cfg.base_url = kSimBaseUrl;
    Engine engine(spec, cfg, transport, provider);
    const auto report = engine.run();
    EXPECT_EQ(report.stats.unique_bugs, engine.ledger().unique_bug_count());
    EXPECT_EQ(report.document["bugs"].size(), engine.ledger().records().size());
    EXPECT_LE(report.stats.calls_made, cfg.max_calls);
    std::uint64_t new_bugs = 0;
    for (const auto& rec : report.document["trace"]) new_bugs += rec["new_bug"].get<bool>();
    EXPECT_EQ(new_bugs, report.stats.unique_bugs);
    EXPECT_LE(report.stats.unique_bugs, scenario().bug_count());
    EXPECT_EQ(report.stats.coverage_curve.size(), 1500u / RunStats::kCoverageSampleEvery);
}

TEST(EngineTest, AbortsOnDeadTarget) {
    const auto spec = scenario_spec(scenario());
    DeadTransport transport;
    NullCoverageProvider provider;
    auto cfg = sim_config(1000);
    cfg.base_url = "http://127.0.0.1:1";
    Engine engine(spec, cfg, transport, provider);
    const auto report = engine.run();
    EXPECT_EQ(report.status, RunStatus::Aborted);
    EXPECT_EQ(report.stats.calls_made, 10u);
    EXPECT_EQ(report.document["status"], "aborted");
    EXPECT_NE(report.document["abort_reason"].get<std::string>().find("connection refused"), std::string::npos);
    EXPECT_EQ(report.document["stats"]["status_histogram"]["none"], 10);
}

TEST(EngineTest, ProviderErrorsCountAsNoChange) {
    const auto spec = scenario_spec(scenario());
    SharedScenario shared(scenario());
    InProcessTransport transport(shared);
    FlakyProvider provider;
    auto cfg = sim_config(50);
    cfg.base_url = kSimBaseUrl;
    Engine engine(spec, cfg, transport, provider);
    const auto report = engine.run();
    EXPECT_EQ(report.status, RunStatus::Completed);
    EXPECT_EQ(report.stats.reward_sums.r_cc, 0.0);
}

TEST(EngineTest, EmptyRunReport) {
    const auto spec = scenario_spec(scenario());
    SharedScenario shared(scenario());
    InProcessTransport transport(shared);
    NullCoverageProvider provider;
    RunConfig cfg;
    cfg.base_url = kSimBaseUrl;
    Engine engine(spec, cfg, transport, provider);
    const auto doc = engine.emit_report(RunStatus::Completed, "");
    EXPECT_EQ(doc["schema_version"], kReportSchemaVersion);
    EXPECT_EQ(doc["stats"]["calls_made"], 0);
    EXPECT_EQ(doc["stats"]["unique_bugs"], 0);
    EXPECT_TRUE(doc["bugs"].empty());
    EXPECT_TRUE(doc["abort_reason"].is_null());
    EXPECT_FALSE(doc.contains("trace"));
}

TEST(EngineTest, ConfigEchoHasNoSecrets) {
    auto cfg = sim_config(5);
    cfg.auth_headers = {{"Authorization", "Bearer hunter2"}};
    cfg.report_out = "/tmp/somewhere.json";
    const auto doc = simulate(scenario(), cfg).document;
    const auto text = doc["config"].dump();
    EXPECT_EQ(text.find("hunter2"), std::string::npos);
    EXPECT_EQ(text.find("somewhere"), std::string::npos);
    EXPECT_NE(text.find("Authorization"), std::string::npos);
}

TEST(EngineTest, TimeBudgetStopsRun) {
    auto cfg = sim_config(100000000);
    cfg.trace_rewards = false;
    cfg.time_budget_s = 0.2;
    const auto report = simulate(scenario(), cfg);
    EXPECT_EQ(report.status, RunStatus::Completed);
    EXPECT_LT(report.stats.calls_made, cfg.max_calls);
    EXPECT_GT(report.stats.calls_made, 0u);
}

TEST(EngineTest, QTableDumpOnRequest) {
    auto cfg = sim_config(20);
    cfg.dump_q_tables = true;
    const auto doc = simulate(scenario(), cfg).document;
    ASSERT_TRUE(doc.contains("q_tables"));
    EXPECT_EQ(doc["q_tables"]["operations"].size(), 6u);
}

TEST(EngineTest, ReportWriteFailure) {
    EXPECT_THROW(write_report("/nonexistent-dir/r.json", nlohmann::json::object()), ReportWriteFailure);
}
