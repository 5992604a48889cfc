#pragma once

#include <memory>
#include <string>

#include "mucorest/coverage.hpp"
#include "mucorest/engine.hpp"
#include "mucorest/simharness.hpp"
#include "mucorest/spec_model.hpp"

namespace mucorest {

inline constexpr const char* kSimBaseUrl = "http://sim.local";

/// The spec_model view of a scenario, parsed from its generated OpenAPI text.
inline ApiSpec scenario_spec(const Scenario& scenario) {
    return parse_spec(scenario.openapi_text(), SpecFormat::Json);
}

inline std::unique_ptr<CoverageProvider> make_sim_provider(SharedScenario& shared, CoverageProviderKind kind) {
    if (kind == CoverageProviderKind::None) return std::make_unique<NullCoverageProvider>();
    return std::make_unique<SyntheticCoverageProvider>(shared);
}

/// One engine run against a fresh copy of `scenario` through the in-process
/// transport.
inline RunReport simulate(const Scenario& scenario, RunConfig config) {
    SharedScenario shared(scenario);
    const ApiSpec spec = scenario_spec(shared.scenario);
    if (config.base_url.empty()) config.base_url = kSimBaseUrl;
    if (config.coverage == CoverageProviderKind::JacocoReport) {
        throw ConfigError("coverage.provider", "the simulator provides synthetic coverage only");
    }
    InProcessTransport transport(shared);
    auto provider = make_sim_provider(shared, config.coverage);
    Engine engine(spec, std::move(config), transport, *provider);
    return engine.run();
}

}  // namespace mucorest
