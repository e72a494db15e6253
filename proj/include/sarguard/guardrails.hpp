#pragma once

#include "sarguard/geometry.hpp"
#include "sarguard/strategy.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sar {

// ---------------------------------------------------------------------------
// Entropy gating

/// Base-2 Shannon entropy divided by log2(5): 0 for a point mass, 1 for uniform.
double normalized_entropy(const StrategyBelief& belief);

struct EntropyPolicy {
    double high_entropy_threshold = 0.85;
    double delta_threshold = 0.05;

    void validate() const;
};

/// Ordered from least to most restrictive.
enum class Decision { Autonomous = 0, AutonomousNotify = 1, Defer = 2, RequiresApproval = 3 };

std::string_view to_string(Decision d) noexcept;
std::optional<Decision> parse_decision(std::string_view text);

/// Returns whichever decision is more restrictive.
Decision most_restrictive(Decision a, Decision b) noexcept;

struct AutonomyVerdict {
    Decision decision = Decision::RequiresApproval;
    std::string rationale;
    double entropy = 0.0;
    bool high_entropy = false;
    Strategy dominant = Strategy::Region;
    Strategy current = Strategy::Region;
    Strategy proposed = Strategy::Region;
};

nlohmann::json to_json(const AutonomyVerdict& v);

/// Low entropy: autonomous only when the proposal is the dominant strategy.
/// High entropy: autonomous-with-notify when the proposal is within
/// `delta_threshold` of the dominant strategy, otherwise approval.
AutonomyVerdict entropy_verdict(const StrategyBelief& belief, Strategy current, Strategy proposed,
                                const EntropyPolicy& policy);

// ---------------------------------------------------------------------------
// Safety envelope

struct SafetyEnvelope {
    double min_altitude_m = 30.0;
    double max_altitude_m = 120.0;
    double max_range_m = 3000.0;
    Vec2 home;
    std::vector<Polygon> include;
    std::vector<Polygon> exclude;
    double battery_reserve_fraction = 0.2;

    void validate() const;
    /// Inside at least one include polygon (or no include polygons) and outside every exclude polygon.
    bool geofence_allows(Vec2 p, double tol = 1e-6) const;
    bool range_allows(Vec2 p, double tol = 1e-6) const;
};

enum class EnvelopeConstraint { battery_reserve, altitude_min, altitude_max, geofence, max_range, waypoint_geofence, waypoint_range };
enum class EnforcedAction { return_home, clamp_altitude, clamp_position, clamp_waypoint, reject_task };

std::string_view to_string(EnvelopeConstraint c) noexcept;
std::string_view to_string(EnforcedAction a) noexcept;

struct EnvelopeAgentState {
    Vec2 position;
    double altitude_m = 0.0;
    double battery = 1.0;
    bool returning = false;
    std::optional<Vec2> waypoint;
};

struct EnvelopeViolation {
    EnvelopeConstraint constraint;
    EnforcedAction action;
    std::optional<Vec2> corrected_point;
    double corrected_altitude = 0.0;
    std::string detail;
};

/// Moves a point to the nearest location the geofence and range limit allow.
Vec2 clamp_to_envelope(Vec2 p, const SafetyEnvelope& env);

/// Reports the first violated constraint and the correction to apply.
std::optional<EnvelopeViolation> check_envelope(const EnvelopeAgentState& agent, const SafetyEnvelope& env);

// ---------------------------------------------------------------------------
// Cost-benefit

struct CostBenefitPolicy {
    double value_constant_min = 20.0;  // minutes of search value per unit alpha
    double threshold = 1.0;            // maximum acceptable cost / benefit
    double cruise_speed_mps = 10.0;
    double inspection_dwell_min = 2.0;
    double inspect_radius_m = 15.0;

    void validate() const;
};

struct ProposedTask {
    std::string clue_id;
    std::string image_ref;
    Vec2 location;
    Vec2 agent_position;
    double alpha = 0.0;
    bool on_current_path = false;
};

struct QueuedTask {
    std::string id;
    std::string clue_id;
    std::string image_ref;
    Vec2 location;
    double cost_min = 0.0;
    double benefit_min = 0.0;
    std::string reason;
};

nlohmann::json to_json(const QueuedTask& q);

struct CostBenefitResult {
    Decision decision = Decision::Defer;  // Autonomous (proceed) or Defer
    double cost_min = 0.0;
    double benefit_min = 0.0;
    double detour_m = 0.0;
    std::string rationale;
    std::optional<QueuedTask> queued;
};

nlohmann::json to_json(const CostBenefitResult& r);

/// Detour length for an out-and-back inspection circle around `location`.
double inspection_detour_m(Vec2 agent, Vec2 location, double inspect_radius_m);

CostBenefitResult cost_benefit(const ProposedTask& task, const SafetyEnvelope& envelope, const CostBenefitPolicy& policy);

// ---------------------------------------------------------------------------
// Advocate personas

enum class Persona { Safety, Ethics, Regulatory };
enum class Severity { info, warn, block };
enum class Stance { oppose, endorse };

std::string_view to_string(Persona p) noexcept;
std::string_view to_string(Severity s) noexcept;
std::string_view to_string(Stance s) noexcept;

/// `pattern` maps plan attribute names to predicates: a literal (equality) or an
/// object of comparison operators {eq, ne, gt, ge, lt, le, in}. All must hold.
struct AdvocateRule {
    Persona persona = Persona::Safety;
    std::string rule_id;
    nlohmann::json pattern;
    Severity severity = Severity::warn;
    Stance stance = Stance::oppose;
    std::string grounding;
};

struct AdvocateConcern {
    Persona persona = Persona::Safety;
    Severity severity = Severity::warn;
    Stance stance = Stance::oppose;
    std::string rule_id;
    std::string grounding;
};

enum class Consensus { Clear, Escalate };

struct AdvocateReview {
    Consensus consensus = Consensus::Escalate;
    std::vector<AdvocateConcern> concerns;
    std::string note;
};

nlohmann::json to_json(const AdvocateReview& r);
AdvocateReview advocate_review_from_json(const nlohmann::json& j);

std::vector<AdvocateRule> parse_advocate_rules(const nlohmann::json& doc);
std::vector<AdvocateRule> load_advocate_rules_file(const std::string& path);

/// Clear iff no block concern and no persona's warning opposes what another's endorses.
/// Any evaluation error yields Escalate.
AdvocateReview run_advocates(const nlohmann::json& plan_attributes, const std::vector<AdvocateRule>& rules);

} // namespace sar
