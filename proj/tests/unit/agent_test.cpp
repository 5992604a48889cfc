#include <gtest/gtest.h>

#include <map>

#include "mucorest/agent.hpp"
#include "mucorest/default_scenario.hpp"
#include "mucorest/simulate.hpp"

using namespace mucorest;

namespace {

ParamDesc param(std::string name, bool required) {
    ParamDesc p;
    p.name = std::move(name);
    p.required = required;
    return p;
}

OperationDesc op(std::string id, std::vector<ParamDesc> params) {
    OperationDesc o;
    o.op_id = std::move(id);
    o.path_template = "/" + o.op_id;
    o.params = std::move(params);
    return o;
}

PolicyConfig greedy() {
    PolicyConfig c;
    c.epsilon = 0.0;
    return c;
}

PolicyConfig uniform() {
    PolicyConfig c;
    c.epsilon = 1.0;
    return c;
}

QTableSet two_ops(double a, double b) {
    QTableSet q;
    q.op_q = {{"A", a}, {"B", b}};
    return q;
}

}  // namespace

TEST(AgentInit, ParameterAndOperationValues) {
    ApiSpec spec;
    spec.operations = {op("A", {param("id", false), param("name", false)}), op("B", {param("id", true)}),
                       op("C", {})};
    const FrequencyMap freq{{"id", 2}, {"name", 1}};
    const auto q = init_q_tables(spec, freq);
    EXPECT_EQ(q.param_q.at({"A", "id"}), 2.0);
    EXPECT_EQ(q.param_q.at({"A", "name"}), 1.0);
    EXPECT_EQ(q.op_q.at("A"), 1.5);
    EXPECT_EQ(q.op_q.at("B"), 2.0);
    EXPECT_EQ(q.op_q.at("C"), 0.0);
    for (const auto& [key, v] : q.source_q) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(q.source_q.size(), 3 * kAllSources.size());
}

TEST(AgentSelect, GreedyOperation) {
    Rng rng(1);
    EXPECT_EQ(select_operation(two_ops(1, 5), greedy(), rng), "B");
}

TEST(AgentSelect, TieGoesToSmallestId) {
    Rng rng(1);
    for (int i = 0; i < 20; ++i) EXPECT_EQ(select_operation(two_ops(3, 3), greedy(), rng), "A");
}

TEST(AgentSelect, EmptyActionSpace) {
    Rng rng(1);
    EXPECT_THROW(select_operation(QTableSet{}, greedy(), rng), EmptyActionSpace);
}

TEST(AgentSelect, UniformOperationFrequency) {
    Rng rng(12345);
    const auto q = two_ops(1, 100);
    int a = 0;
    constexpr int kDraws = 10000;
    for (int i = 0; i < kDraws; ++i) a += select_operation(q, uniform(), rng) == "A";
    EXPECT_NEAR(static_cast<double>(a) / kDraws, 0.5, 0.05);
}

TEST(AgentSelect, OnlyRequiredParameters) {
    Rng rng(3);
    const auto o = op("A", {param("id", true), param("key", true)});
    QTableSet q;
    for (int i = 0; i < 50; ++i) {
        EXPECT_EQ(select_parameters(q, o, uniform(), rng), (std::set<std::string>{"id", "key"}));
    }
}

TEST(AgentSelect, GreedyOptionalPick) {
    Rng rng(3);
    const auto o = op("A", {param("id", true), param("x", false), param("y", false)});
    QTableSet q;
    q.param_q = {{{"A", "id"}, 0.0}, {{"A", "x"}, 9.0}, {{"A", "y"}, 1.0}};
    EXPECT_EQ(select_parameters(q, o, 1, greedy(), rng), (std::set<std::string>{"id", "x"}));
}

TEST(AgentSelect, EverySubsetSizeObserved) {
    Rng rng(99);
    const auto o = op("A", {param("r", true), param("a", false), param("b", false), param("c", false)});
    QTableSet q;
    std::set<std::size_t> sizes;
    for (int i = 0; i < 2000; ++i) {
        const auto chosen = select_parameters(q, o, uniform(), rng);
        ASSERT_EQ(chosen.count("r"), 1u);
        sizes.insert(chosen.size() - 1);
    }
    EXPECT_EQ(sizes, (std::set<std::size_t>{0, 1, 2, 3}));
}

TEST(AgentSelect, SourceGreedyAndTieBreak) {
    Rng rng(5);
    QTableSet q;
    for (auto k : kAllSources) q.source_q[{"A", k}] = 0.0;
    EXPECT_EQ(select_value_source(q, "A", greedy(), rng), SourceKind::SpecExample);
    q.source_q[{"A", SourceKind::Random}] = 4.0;
    EXPECT_EQ(select_value_source(q, "A", greedy(), rng), SourceKind::Random);
}

TEST(AgentSelect, UniformSourceFrequency) {
    Rng rng(777);
    QTableSet q;
    for (auto k : kAllSources) q.source_q[{"A", k}] = 0.0;
    q.source_q[{"A", SourceKind::EnumPick}] = 50.0;
    std::map<SourceKind, int> counts;
    constexpr int kDraws = 10000;
    for (int i = 0; i < kDraws; ++i) ++counts[select_value_source(q, "A", uniform(), rng)];
    for (auto k : kAllSources) EXPECT_NEAR(static_cast<double>(counts[k]) / kDraws, 0.2, 0.03) << to_string(k);
}

TEST(AgentSelect, SameSeedSameSequence) {
    const auto spec = scenario_spec(load_scenario(kDefaultScenarioJson));
    const auto q = init_q_tables(spec, parameter_frequency(spec));
    PolicyConfig cfg;
    cfg.epsilon = 0.5;
    auto sequence = [&](std::uint64_t seed) {
        Rng rng(seed);
        std::vector<std::string> out;
        for (int i = 0; i < 200; ++i) {
            const auto id = select_operation(q, cfg, rng);
            out.push_back(id);
            for (const auto& p : select_parameters(q, *spec.find(id), cfg, rng)) out.push_back(p);
            out.emplace_back(to_string(select_value_source(q, id, cfg, rng)));
        }
        return out;
    };
    EXPECT_EQ(sequence(42), sequence(42));
    EXPECT_NE(sequence(42), sequence(43));
}

namespace {

QTableSet single_entry_tables() {
    QTableSet q;
    q.op_q = {{"A", 0.0}};
    q.param_q = {{{"A", "p"}, 0.0}};
    for (auto k : kAllSources) q.source_q[{"A", k}] = 0.0;
    return q;
}

}  // namespace

TEST(AgentUpdate, FixedPointWithZeroDiscount) {
    auto q = single_entry_tables();
    PolicyConfig cfg;
    cfg.alpha = 1.0;
    cfg.gamma = 0.0;
    update_q(q, {"A", {"p"}, SourceKind::SpecExample}, 7.0, cfg);
    EXPECT_EQ(q.op_q.at("A"), 7.0);
    EXPECT_EQ(q.param_q.at({"A", "p"}), 7.0);
    EXPECT_EQ((q.source_q.at({"A", SourceKind::SpecExample})), 7.0);
}

TEST(AgentUpdate, ZeroLearningRateLeavesTables) {
    auto q = single_entry_tables();
    q.op_q["A"] = 3.0;
    const auto before = q;
    PolicyConfig cfg;
    cfg.alpha = 0.0;  // bypasses validate on purpose
    for (double r : {-10.0, 0.0, 50.0}) update_q(q, {"A", {"p"}, SourceKind::Random}, r, cfg);
    EXPECT_EQ(q, before);
}

TEST(AgentUpdate, SingleStepSubstitution) {
    QTableSet q;
    q.op_q = {{"A", 2.0}, {"B", 4.0}};
    q.param_q = {{{"A", "p"}, 2.0}, {{"B", "p"}, 4.0}};
    q.source_q = {{{"A", SourceKind::SpecExample}, 2.0}, {{"B", SourceKind::SpecExample}, 4.0}};
    PolicyConfig cfg;
    cfg.alpha = 0.5;
    cfg.gamma = 0.9;
    update_q(q, {"A", {"p"}, SourceKind::SpecExample}, 1.0, cfg);
    const double expected = 2.0 + 0.5 * (1.0 + 0.9 * 4.0 - 2.0);
    EXPECT_DOUBLE_EQ(expected, 3.3);
    EXPECT_EQ(q.op_q.at("A"), expected);
    EXPECT_EQ(q.param_q.at({"A", "p"}), expected);
    EXPECT_EQ((q.source_q.at({"A", SourceKind::SpecExample})), expected);
    EXPECT_EQ(q.op_q.at("B"), 4.0);
}

TEST(AgentUpdate, TouchesOnlyActionEntries) {
    const auto spec = scenario_spec(load_scenario(kDefaultScenarioJson));
    auto q = init_q_tables(spec, parameter_frequency(spec));
    const auto before = q;
    const ActionRecord action{"GET /products", {"category", "limit"}, SourceKind::EnumPick};
    update_q(q, action, 13.0, PolicyConfig{});
    std::size_t changed = 0;
    for (const auto& [k, v] : q.op_q) changed += v != before.op_q.at(k);
    for (const auto& [k, v] : q.param_q) changed += v != before.param_q.at(k);
    for (const auto& [k, v] : q.source_q) changed += v != before.source_q.at(k);
    EXPECT_EQ(changed, 2 + action.params.size());
}

TEST(AgentUpdate, ValuesStayWithinRewardBound) {
    // |Q| <= max(|Q0|, R_max / (1 - gamma)) whatever the reward sequence.
    auto q = single_entry_tables();
    q.op_q["B"] = 0.0;
    for (auto k : kAllSources) q.source_q[{"B", k}] = 0.0;
    PolicyConfig cfg;
    cfg.alpha = 0.3;
    cfg.gamma = 0.9;
    const double r_max = 80.0;
    const double bound = r_max / (1.0 - cfg.gamma);
    Rng rng(8);
    for (int i = 0; i < 5000; ++i) {
        const double r = rng.uniform_real(-r_max, r_max);
        update_q(q, {rng.coin() ? "A" : "B", {}, SourceKind::Random}, r, cfg);
        for (const auto& [_, v] : q.op_q) ASSERT_LE(std::abs(v), bound + 1e-9);
    }
}

TEST(AgentPolicy, Validation) {
    PolicyConfig c;
    EXPECT_NO_THROW(c.validate());
    c.alpha = 0.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.gamma = 1.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.epsilon = 1.5;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.epsilon_decay = 0.0;
    EXPECT_THROW(c.validate(), ConfigError);
}
