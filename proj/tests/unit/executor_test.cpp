#include <gtest/gtest.h>

#include "mucorest/default_scenario.hpp"
#include "mucorest/executor.hpp"
#include "mucorest/http_transport.hpp"
#include "mucorest/simulate.hpp"
#include "test_util.hpp"

using namespace mucorest;
using mucorest::testing::fixture;

namespace {

ParamDesc typed(std::string name, SchemaType t) {
    ParamDesc p;
    p.name = std::move(name);
    p.schema_type = t;
    return p;
}

const ApiSpec& toy() {
    static const ApiSpec spec = parse_spec(fixture("toy_users.json"), SpecFormat::Json);
    return spec;
}

class FixedTransport final : public Transport {
public:
    explicit FixedTransport(ApiResponse r) : response_(std::move(r)) {}
    ApiResponse send(const ApiCall&, int) override { return response_; }

private:
    ApiResponse response_;
};

}  // namespace

TEST(GenerateValue, SpecSources) {
    ValuePool pool;
    Rng rng(1);
    auto p = typed("mode", SchemaType::String);
    p.enum_values = std::vector<Value>{"a"};
    p.default_value = Value(5);
    p.example_value = Value("ex");
    EXPECT_EQ(generate_value(p, SourceKind::EnumPick, pool, rng).value, Value("a"));
    EXPECT_EQ(generate_value(p, SourceKind::SpecDefault, pool, rng).value, Value(5));
    const auto ex = generate_value(p, SourceKind::SpecExample, pool, rng);
    EXPECT_EQ(ex.value, Value("ex"));
    EXPECT_FALSE(ex.fell_back);
    EXPECT_EQ(ex.used, SourceKind::SpecExample);
}

TEST(GenerateValue, FallbackToRandom) {
    ValuePool pool;
    Rng rng(1);
    const auto p = typed("id", SchemaType::Integer);
    for (auto source : {SourceKind::SpecExample, SourceKind::SpecDefault, SourceKind::EnumPick,
                        SourceKind::ResponseDerived}) {
        const auto g = generate_value(p, source, pool, rng);
        EXPECT_TRUE(g.fell_back) << to_string(source);
        EXPECT_EQ(g.used, SourceKind::Random);
        EXPECT_TRUE(g.value.is_number_integer());
    }
    EXPECT_FALSE(generate_value(p, SourceKind::Random, pool, rng).fell_back);
}

TEST(GenerateValue, RandomRanges) {
    ValuePool pool;
    Rng rng(2024);
    for (int i = 0; i < 2000; ++i) {
        const auto n = generate_value(typed("n", SchemaType::Integer), SourceKind::Random, pool, rng).value;
        ASSERT_GE(n.get<std::int64_t>(), -(std::int64_t{1} << 31));
        ASSERT_LT(n.get<std::int64_t>(), std::int64_t{1} << 31);
        const auto x = generate_value(typed("x", SchemaType::Number), SourceKind::Random, pool, rng).value;
        ASSERT_GE(x.get<double>(), -1e6);
        ASSERT_LE(x.get<double>(), 1e6);
        const auto s = generate_value(typed("s", SchemaType::String), SourceKind::Random, pool, rng).value;
        const auto text = s.get<std::string>();
        ASSERT_GE(text.size(), 1u);
        ASSERT_LE(text.size(), 20u);
        for (char c : text) ASSERT_TRUE(std::isalnum(static_cast<unsigned char>(c)));
        ASSERT_TRUE(generate_value(typed("b", SchemaType::Boolean), SourceKind::Random, pool, rng).value.is_boolean());
    }
}

TEST(GenerateValue, ResponseDerivedUsesPool) {
    ValuePool pool;
    pool.harvest(R"({"orderId": 700001, "items": [{"sku": "A1"}], "nested": {"deep": 1}})");
    Rng rng(1);
    const auto g = generate_value(typed("orderid", SchemaType::Integer), SourceKind::ResponseDerived, pool, rng);
    EXPECT_FALSE(g.fell_back);
    EXPECT_EQ(g.value, Value(700001));
    EXPECT_NE(pool.find("SKU"), nullptr);
    EXPECT_EQ(pool.find("deep"), nullptr);
}

TEST(ValuePoolTest, RingIsBounded) {
    ValuePool pool;
    for (int i = 0; i < 200; ++i) pool.add("id", Value(i));
    pool.add("id", Value(199));
    const auto* ring = pool.find("id");
    ASSERT_NE(ring, nullptr);
    EXPECT_EQ(ring->size(), ValuePool::kCapacity);
    EXPECT_EQ(ring->front(), Value(200 - 64));
    EXPECT_EQ(ring->back(), Value(199));
}

TEST(BuildRequest, PathSubstitution) {
    const auto call = build_request(toy().operations[0], {{"id", 42}}, "http://h:1/v1/", {});
    EXPECT_EQ(call.url, "http://h:1/v1/users/42");
    EXPECT_FALSE(call.body.has_value());
    EXPECT_EQ(call.method, HttpMethod::Get);
}

TEST(BuildRequest, QueryEncoding) {
    const auto call = build_request(toy().operations[0], {{"id", "a b"}, {"verbose", "x y&z"}}, "http://h", {});
    EXPECT_EQ(call.url, "http://h/users/a%20b?verbose=x%20y%26z");
}

TEST(BuildRequest, BodyAssembly) {
    const HeaderList auth{{"Authorization", "Bearer t"}};
    const auto call = build_request(toy().operations[1], {{"name", "x"}}, "http://h", auth);
    ASSERT_TRUE(call.body.has_value());
    EXPECT_EQ(nlohmann::json::parse(*call.body), nlohmann::json({{"name", "x"}}));
    ASSERT_EQ(call.headers.size(), 2u);
    EXPECT_EQ(call.headers[0], auth[0]);
    EXPECT_EQ(call.headers[1].first, "Content-Type");
}

TEST(BuildRequest, MissingRequiredValue) {
    EXPECT_THROW(build_request(toy().operations[0], {}, "http://h", {}), MissingRequiredValue);
}

TEST(BuildRequest, HeaderParameters) {
    const auto scenario = load_scenario(kDefaultScenarioJson);
    const auto spec = scenario_spec(scenario);
    const auto* op = spec.find("DELETE /sessions/{sessionId}");
    ASSERT_NE(op, nullptr);
    const auto call = build_request(*op, {{"sessionId", "c0ffee"}, {"X-Request-Id", "req-1"}}, "http://s/api", {});
    EXPECT_EQ(call.url, "http://s/api/sessions/c0ffee");
    ASSERT_EQ(call.headers.size(), 1u);
    EXPECT_EQ(call.headers[0], (std::pair<std::string, std::string>{"X-Request-Id", "req-1"}));
}

TEST(Execute, CapsBodyAndHarvests) {
    FixedTransport t(ApiResponse::with_status(200, R"({"token":"abcdef","pad":")" + std::string(100, 'x') + "\"}"));
    ExecutorOptions opts;
    opts.body_cap_bytes = 40;
    Executor ex(t, opts);
    const auto r = ex.execute_call(ApiCall{});
    EXPECT_EQ(*r.status, 200);
    EXPECT_TRUE(r.truncated);
    EXPECT_EQ(r.body.size(), 40u);
    EXPECT_NE(ex.pool().find("token"), nullptr);
    EXPECT_GE(r.latency_ms, 0.0);
}

TEST(Execute, SimulatorHappyPathAndBug) {
    SharedScenario shared(load_scenario(kDefaultScenarioJson));
    InProcessTransport t(shared);
    Executor ex(t);
    const auto spec = scenario_spec(shared.scenario);
    const auto ok = ex.execute_call(build_request(*spec.find("GET /products"), {{"category", "books"}},
                                                  "http://sim.local/api", {}));
    EXPECT_EQ(ok.status, 200);
    const auto bug = ex.execute_call(build_request(*spec.find("POST /reports"), {{"mode", "compact"}},
                                                   "http://sim.local/api", {}));
    EXPECT_EQ(bug.status, 500);
    EXPECT_EQ(normalize_message(bug.body), "ArithmeticException: / by zero in CompactReportWriter.columnWidth");
}

TEST(Execute, UnreachablePort) {
    HttpTransport t;
    ExecutorOptions opts;
    opts.timeout_ms = 2000;
    Executor ex(t, opts);
    ApiCall call;
    call.url = "http://127.0.0.1:1/nothing";
    const auto r = ex.execute_call(call);
    EXPECT_FALSE(r.status.has_value());
    EXPECT_EQ(r.transport_error, "connection refused");
}

TEST(GenerateValue, ConfiguredRanges) {
    ValuePool pool;
    Rng rng(6);
    RandomRanges r;
    r.int_min = 5;
    r.int_max = 7;
    r.string_min_len = 3;
    r.string_max_len = 3;
    r.array_max_items = 0;
    std::set<std::int64_t> ints;
    for (int i = 0; i < 300; ++i) {
        ints.insert(generate_value(typed("n", SchemaType::Integer), SourceKind::Random, pool, rng, r).value.get<std::int64_t>());
        EXPECT_EQ(generate_value(typed("s", SchemaType::String), SourceKind::Random, pool, rng, r).value.get<std::string>().size(), 3u);
        EXPECT_TRUE(generate_value(typed("a", SchemaType::Array), SourceKind::Random, pool, rng, r).value.empty());
    }
    EXPECT_EQ(ints, (std::set<std::int64_t>{5, 6, 7}));
}
