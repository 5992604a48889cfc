#include <gtest/gtest.h>

#include "mucorest/default_scenario.hpp"
#include "mucorest/simulate.hpp"
#include "mucorest/spec_model.hpp"
#include "test_util.hpp"

using namespace mucorest;
using mucorest::testing::fixture;

namespace {

// Ops A(id,name), B(id), C(name,flag).
constexpr const char* kFrequencyToy = R"({
  "openapi": "3.0.0",
  "paths": {
    "/a": {"get": {"parameters": [
      {"name": "id", "in": "query", "schema": {"type": "integer"}},
      {"name": "name", "in": "query", "schema": {"type": "string"}}]}},
    "/b": {"get": {"parameters": [
      {"name": "id", "in": "query", "schema": {"type": "integer"}}]}},
    "/c": {"get": {"parameters": [
      {"name": "name", "in": "query", "schema": {"type": "string"}},
      {"name": "flag", "in": "header", "schema": {"type": "boolean"}}]}}
  }
})";

ApiSpec toy_users() { return parse_spec(fixture("toy_users.json"), SpecFormat::Json); }

}  // namespace

TEST(SpecModel, EmptyPathsGivesNoOperations) {
    const auto spec = parse_spec(R"({"openapi":"3.0.0","paths":{}})", SpecFormat::Json);
    EXPECT_TRUE(spec.operations.empty());
    EXPECT_TRUE(parameter_frequency(spec).empty());
    EXPECT_TRUE(enumerate_operations(spec).empty());
}

TEST(SpecModel, ToyUsersSpec) {
    const auto spec = toy_users();
    ASSERT_EQ(spec.operations.size(), 2u);
    EXPECT_EQ(spec.base_path, "/v1");
    EXPECT_EQ(enumerate_operations(spec), (std::vector<std::string>{"GET /users/{id}", "POST /users"}));

    const auto& get = spec.operations[0];
    EXPECT_EQ(get.method, HttpMethod::Get);
    const auto* id = get.find_param("id");
    ASSERT_NE(id, nullptr);
    EXPECT_EQ(id->location, ParamLocation::Path);
    EXPECT_TRUE(id->required);
    EXPECT_EQ(id->schema_type, SchemaType::Integer);
    EXPECT_EQ(id->example_value, Value(42));
    const auto* verbose = get.find_param("verbose");
    ASSERT_NE(verbose, nullptr);
    EXPECT_FALSE(verbose->required);
    EXPECT_EQ(verbose->default_value, Value(false));
    EXPECT_EQ(get.declared_responses.count("404"), 1u);
    EXPECT_EQ(get.body_schema, nullptr);

    const auto& post = spec.operations[1];
    ASSERT_NE(post.body_schema, nullptr);
    EXPECT_TRUE(post.body_required);
    const auto* name = post.find_param("name");
    ASSERT_NE(name, nullptr);
    EXPECT_EQ(name->location, ParamLocation::BodyField);
    EXPECT_TRUE(name->required);
    const auto* role = post.find_param("role");
    ASSERT_NE(role, nullptr);
    ASSERT_TRUE(role->enum_values.has_value());
    EXPECT_EQ(role->enum_values->size(), 2u);
    const auto* address = post.find_param("address");
    ASSERT_NE(address, nullptr);
    EXPECT_EQ(address->schema_type, SchemaType::Object);
}

TEST(SpecModel, YamlAndJsonAgree) {
    const auto yaml = parse_spec(fixture("toy_users.yaml"), SpecFormat::Yaml);
    EXPECT_EQ(yaml, toy_users());
}

TEST(SpecModel, ParsingIsDeterministic) {
    EXPECT_EQ(toy_users(), toy_users());
}

TEST(SpecModel, FrequencyToy) {
    const auto spec = parse_spec(kFrequencyToy, SpecFormat::Json);
    const FrequencyMap expected{{"id", 2}, {"name", 2}, {"flag", 1}};
    EXPECT_EQ(parameter_frequency(spec), expected);
}

TEST(SpecModel, DuplicateNameCountsOncePerOperation) {
    const auto spec = parse_spec(R"({"openapi":"3.0.0","paths":{"/x":{"get":{"parameters":[
        {"name":"trace","in":"query","schema":{"type":"string"}},
        {"name":"trace","in":"header","schema":{"type":"string"}}]}}}})",
                                 SpecFormat::Json);
    EXPECT_EQ(parameter_frequency(spec).at("trace"), 1u);
}

TEST(SpecModel, BodyFieldsCanBeLeftOutOfFrequency) {
    const auto spec = toy_users();
    EXPECT_EQ(parameter_frequency(spec, true).count("name"), 1u);
    EXPECT_EQ(parameter_frequency(spec, false).count("name"), 0u);
}

TEST(SpecModel, FrequencyIsAtMostOperationCount) {
    const auto spec = scenario_spec(load_scenario(kDefaultScenarioJson));
    for (const auto& [name, count] : parameter_frequency(spec)) {
        EXPECT_GE(count, 1u) << name;
        EXPECT_LE(count, spec.operations.size()) << name;
    }
}

TEST(SpecModel, SimulatorScenarioShape) {
    const auto spec = scenario_spec(load_scenario(kDefaultScenarioJson));
    ASSERT_EQ(spec.operations.size(), 6u);
    std::size_t params = 0;
    for (const auto& op : spec.operations) params += op.params.size();
    EXPECT_EQ(params, 14u);
    EXPECT_EQ(enumerate_operations(spec),
              (std::vector<std::string>{"GET /products", "POST /orders", "GET /orders/{orderId}", "POST /reports",
                                        "GET /export", "DELETE /sessions/{sessionId}"}));
}

TEST(SpecModel, OperationIdsAreUnique) {
    const auto spec = scenario_spec(load_scenario(kDefaultScenarioJson));
    auto ids = enumerate_operations(spec);
    std::sort(ids.begin(), ids.end());
    EXPECT_EQ(std::adjacent_find(ids.begin(), ids.end()), ids.end());
}

TEST(SpecModel, SwaggerTwoIsUnsupported) {
    EXPECT_THROW(parse_spec(R"({"swagger":"2.0","paths":{}})", SpecFormat::Json), UnsupportedFeature);
}

TEST(SpecModel, ExternalRefIsUnsupported) {
    const char* doc = R"({"openapi":"3.0.0","paths":{"/x":{"get":{"parameters":[
        {"$ref":"common.yaml#/components/parameters/Page"}]}}}})";
    EXPECT_THROW(parse_spec(doc, SpecFormat::Json), UnsupportedFeature);
}

TEST(SpecModel, MalformedInputIsParseError) {
    EXPECT_THROW(parse_spec("{\"openapi\": ", SpecFormat::Json), ParseError);
    EXPECT_THROW(parse_spec("openapi: [unclosed", SpecFormat::Yaml), ParseError);
}

TEST(SpecModel, FormatGuessFromExtension) {
    EXPECT_EQ(guess_spec_format("api.json"), SpecFormat::Json);
    EXPECT_EQ(guess_spec_format("api.yaml"), SpecFormat::Yaml);
    EXPECT_EQ(guess_spec_format("api.yml"), SpecFormat::Yaml);
}
