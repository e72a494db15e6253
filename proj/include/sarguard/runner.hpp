#pragma once

#include "sarguard/engine.hpp"

#include <nlohmann/json.hpp>

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace sar {

/// Stands in for the operator during headless runs.
class OperatorPolicy {
public:
    virtual ~OperatorPolicy() = default;
    /// Spec string recorded in replay headers ("always-approve", "approve-after:30", ...).
    virtual std::string name() const = 0;
    /// Commands to submit before the next tick.
    virtual std::vector<OperatorCommand> decide(const MissionEngine& engine) = 0;
};

/// always-approve | always-reject | approve-after:N | scripted:<path>
std::unique_ptr<OperatorPolicy> make_policy(const std::string& spec);

/// Scripted policy from an already-parsed document:
/// {"default": "approve"|"reject"|"none", "default_delay": N,
///  "actions": [{"tick": T, "decision": ...} | {"match": {"kind"|"clue_id"|"purpose": ...}, "decision": ..., "delay": N}]}
std::unique_ptr<OperatorPolicy> make_scripted_policy(const nlohmann::json& doc, std::string name = "scripted");

/// Everything a mission needs, loaded from files.
struct MissionSetup {
    Scenario scenario;
    std::shared_ptr<const BayesNet> network;
    std::shared_ptr<const PipelineResources> resources;
    std::string backend = "stub";
};

/// Loads the scenario, applies an optional config file and the overrides, and
/// reads the shipped network and pipeline resources.
MissionSetup load_setup(const std::string& scenario_path, const std::string& config_path = {},
                        std::optional<int> ticks_max = {}, const std::string& backend = "stub");

std::unique_ptr<MissionEngine> make_engine(const MissionSetup& setup, const std::string& mission_id,
                                           std::optional<std::uint64_t> seed = {});

struct ClueMetrics {
    int true_positive = 0;
    int false_positive = 0;
    int false_negative = 0;
    int true_negative = 0;
    std::optional<double> precision;  // undefined when nothing was flagged
    std::optional<double> recall;     // undefined when no clue is relevant
};

struct RunSummary {
    std::string mission_id;
    std::string outcome;
    int ticks = 0;
    std::size_t events = 0;
    int pipeline_updates = 0;    // positive belief updates from clue traces
    int negative_updates = 0;
    int approvals_requested = 0;
    int approvals_approved = 0;
    int approvals_rejected = 0;
    int approvals_expired = 0;
    int envelope_interventions = 0;
    std::optional<int> found_tick;
    std::string final_dominant;
    std::string final_active;
    ClueMetrics clues;
};

nlohmann::json to_json(const RunSummary& s);

/// Precision/recall of clue relevance against the scenario's ground truth.
/// A clue counts as flagged when its last trace pass rated it anything but None;
/// relevant clues that were never detected are misses.
ClueMetrics clue_metrics(const Scenario& scenario, const std::vector<MissionEvent>& events);

RunSummary summarize(const MissionEngine& engine);

/// Steps the engine to a terminal state, letting `policy` act before each tick.
RunSummary run_mission(MissionEngine& engine, OperatorPolicy& policy);

} // namespace sar
