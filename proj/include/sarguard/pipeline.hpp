#pragma once

#include "sarguard/backend.hpp"
#include "sarguard/belief_update.hpp"
#include "sarguard/guardrails.hpp"
#include "sarguard/knowledge.hpp"
#include "sarguard/repair.hpp"
#include "sarguard/scenario.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sar {

/// Knowledge base, advocate rules, prompt templates and stage schemas.
struct PipelineResources {
    KnowledgeBase knowledge;
    std::vector<AdvocateRule> advocate_rules;
    std::map<int, std::string> prompts;   // stage -> template text
    std::map<int, StageSchema> schemas;   // stage -> output schema
};

/// Loads everything from the data directory (see data_dir()).
PipelineResources load_pipeline_resources();
PipelineResources load_pipeline_resources(const std::string& dir);

struct PipelineSettings {
    Hyperparams hp;
    EntropyPolicy entropy;
    CostBenefitPolicy cost;
    int repair_budget = 2;
    std::size_t top_k = 3;
};

/// What the pipeline may see of a clue: never the ground-truth tag.
struct ClueView {
    std::string id;
    std::string description;
    std::string image_ref;
    Vec2 location;
    std::optional<ClassifierTag> stage1;
    std::optional<ClassifierTag> stage2;
    bool has_closeup = false;
    bool inspected = false;
    std::vector<std::string> location_tags;  // primary terrain tag first
};

/// Builds the view; after an inspection the close-up description and tags replace the originals.
ClueView view_of(const Clue& clue, const Scenario& scenario, bool inspected);

/// Terrain-derived tags ("clue-location/shoreline", "clue-location/near-lkp", ...).
std::vector<std::string> location_tags(Vec2 p, const Scenario& scenario);

struct Classification {
    std::string label;
    Level stage1 = Level::Low;
    std::optional<Level> stage2;
    bool stage2_skipped = false;
    Level cv = Level::Low;
    std::vector<std::string> warnings;
};

/// Stages 1-2. Stage 2 is consulted only when stage 1 is not High; the
/// combined C_cv is the higher of the two. Missing tags default to Low.
Classification classify(const ClueView& clue);

struct StageOutput {
    int stage = 0;
    nlohmann::json payload;
    std::string raw;
    bool repaired = false;
    bool skipped = false;
    int regenerations = 0;
    std::vector<std::string> notes;
};

nlohmann::json to_json(const StageOutput& s);

/// Mission state the reasoning stages need.
struct MissionView {
    const Scenario* scenario = nullptr;
    StrategyBelief belief;
    Strategy active = Strategy::Region;
    std::string agent_id;
    Vec2 agent_position;
    std::array<bool, kStrategyCount> crosses_restricted{};  // planner tasks enter restricted airspace
};

enum class PassOutcome { rejected, inspect, decided, escalated };
std::string_view to_string(PassOutcome o) noexcept;

struct PassResult {
    int pass = 1;
    std::vector<StageOutput> stages;
    PassOutcome outcome = PassOutcome::escalated;
    Classification classification;
    std::string relevance = "None";  // High | Medium | Low | None
    ClueAssessment assessment;        // meaningful when relevance != None
    double gamma = 0.0;
    Strategy strategy = Strategy::Region;
    nlohmann::json plan;
    nlohmann::json plan_attributes;
    AdvocateReview review;
    AutonomyVerdict verdict;
    CostBenefitResult cost;
    Decision decision = Decision::RequiresApproval;
    std::string note;
};

nlohmann::json to_json(const PassResult& p);

/// Renders the stage prompt, queries the backend and validates/repairs the
/// output. nullopt (with `error` set) when the backend is unreachable or the
/// repair budget is exhausted.
std::optional<StageOutput> run_stage(int stage, const nlohmann::json& context, Backend& backend,
                                     const PipelineResources& res, const PipelineSettings& settings, std::string& error);

/// Attributes the advocate rules match against.
nlohmann::json plan_attributes(const PassResult& pass, const ClueView& clue, const MissionView& mission);

/// Stages 6-7: advocates, then entropy gating and cost-benefit; the most
/// restrictive verdict wins and an advocate escalation forces approval.
void decide(PassResult& pass, const ClueView& clue, const MissionView& mission, const PipelineResources& res,
            const PipelineSettings& settings);

/// Stages 1-7 for one look at a clue.
PassResult run_pass(const ClueView& clue, const MissionView& mission, const PipelineResources& res,
                    const PipelineSettings& settings, Backend& backend, int pass_no);

} // namespace sar
