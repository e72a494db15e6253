#pragma once

#include "sarguard/engine.hpp"
#include "sarguard/runner.hpp"
#include "sarguard/text.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace sar::testing {

inline std::string scenario_path(const std::string& id) { return data_path("scenarios/" + id + ".json"); }

inline std::unique_ptr<MissionEngine> engine_for(const std::string& scenario, const nlohmann::json& config = nullptr) {
    auto setup = load_setup(scenario_path(scenario));
    apply_config(setup.scenario, config);
    return make_engine(setup, scenario);
}

/// Runs a shipped scenario to the end under a policy spec ("always-approve", ...).
inline std::unique_ptr<MissionEngine> run_shipped(const std::string& scenario, const std::string& policy,
                                                  const nlohmann::json& config = nullptr) {
    auto engine = engine_for(scenario, config);
    auto pol = make_policy(policy);
    run_mission(*engine, *pol);
    return engine;
}

inline std::vector<const MissionEvent*> events_of(const MissionEngine& e, const std::string& kind,
                                                  const std::function<bool(const nlohmann::json&)>& pred = nullptr) {
    std::vector<const MissionEvent*> out;
    for (const auto& ev : e.events())
        if (ev.kind == kind && (!pred || pred(ev.data))) out.push_back(&ev);
    return out;
}

inline bool is_pipeline_positive(const nlohmann::json& d) {
    return d.value("kind", "") == "positive" && d.value("source", "") == "pipeline";
}

} // namespace sar::testing
