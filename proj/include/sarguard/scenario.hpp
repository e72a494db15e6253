#pragma once

#include "sarguard/bayes_net.hpp"
#include "sarguard/belief_update.hpp"
#include "sarguard/guardrails.hpp"
#include "sarguard/terrain.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace sar {

inline constexpr int kScenarioSchemaVersion = 1;

struct ProfileItem {
    std::string item;                  // noun used for matching ("hat")
    std::string color;                 // empty when colour is not part of the description
    std::vector<std::string> aliases;  // extra nouns that count as the same item
};

struct Profile {
    std::string description;
    std::string age_group;   // child | adult | elderly
    std::string experience;  // hiker | novice
    std::vector<ProfileItem> items;
    bool life_risk = false;
    Vec2 lkp;
    double elapsed_min = 0.0;
};

struct Environment {
    std::string weather;   // clear | rain | cold
    std::string daylight;  // day | night
};

struct ClassifierTag {
    std::string label;
    std::optional<Level> confidence;
};

struct CloseUp {
    std::string description;
    std::optional<ClassifierTag> stage1;
    std::optional<ClassifierTag> stage2;
};

struct Clue {
    std::string id;
    Vec2 location;
    std::string description;
    std::string image_ref;
    std::optional<ClassifierTag> stage1;
    std::optional<ClassifierTag> stage2;
    std::optional<CloseUp> closeup;
    bool ground_truth_relevant = false;  // scoring only; never shown to the pipeline
    std::vector<std::string> location_tags;  // optional override of terrain-derived tags
};

struct LostPerson {
    Vec2 location;
    std::string description;
};

struct AirspaceRegion {
    std::string id;
    Polygon area;
    bool restricted = true;
    std::string note;
};

struct SimConstants {
    double tick_s = 1.0;
    double cruise_speed_mps = 10.0;
    double footprint_radius_m = 30.0;
    double cruise_altitude_m = 60.0;
    double battery_drain_per_s = 1.0 / 2400.0;
    double region_radius_m = 400.0;
    double contour_radius_m = 600.0;
    double contour_band_m = 15.0;
    double near_lkp_m = 150.0;
    double steep_slope = 0.25;
    int approval_timeout_ticks = 300;
    int ticks_max = 7200;
    bool preempt_on_switch = false;
    double miss_probability = 0.0;
};

struct Scenario {
    std::string id;
    std::string name;
    TerrainGrid grid;
    Profile profile;
    Environment environment;
    std::vector<Clue> clues;
    LostPerson person;
    SafetyEnvelope envelope;
    int agent_count = 1;
    std::uint64_t seed = 0;
    SimConstants constants;
    std::vector<AirspaceRegion> airspace;
    EvidenceAssignment evidence_overrides;
    Hyperparams hyperparams;
    EntropyPolicy entropy;
    CostBenefitPolicy cost;
    nlohmann::json document;  // the validated source, embedded verbatim in replays
};

/// Parses and validates a scenario document. Throws Error(parse|validation).
Scenario parse_scenario(const nlohmann::json& doc);
Scenario load_scenario(const std::string& text);
Scenario load_scenario_file(const std::string& path);

/// Initial evidence: profile and environment attributes plus terrain flags
/// (trails, water, buildings, steep ground) within `radius_m` of the LKP.
/// Scenario overrides win.
EvidenceAssignment derive_evidence(const Scenario& s, double radius_m);
inline EvidenceAssignment derive_evidence(const Scenario& s) { return derive_evidence(s, s.constants.region_radius_m); }

/// Applies an optional config document {hyperparams, entropy, cost_benefit, constants}
/// on top of the scenario's own settings.
void apply_config(Scenario& s, const nlohmann::json& config);

Hyperparams parse_hyperparams(const nlohmann::json& j, Hyperparams base = {});
nlohmann::json to_json(const Hyperparams& hp);

Polygon parse_polygon(const nlohmann::json& j);
nlohmann::json to_json(const Polygon& p);
Vec2 parse_point(const nlohmann::json& j);

} // namespace sar
