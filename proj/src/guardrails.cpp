#include "sarguard/guardrails.hpp"

#include "sarguard/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace sar {

// ---------------------------------------------------------------------------
// Entropy gating

double normalized_entropy(const StrategyBelief& belief) {
    double h = 0.0;
    for (double p : belief.p)
        if (p > 0.0) h -= p * std::log2(p);
    return h / std::log2(static_cast<double>(kStrategyCount));
}

void EntropyPolicy::validate() const {
    auto unit = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
    if (!unit(high_entropy_threshold)) throw Error(ErrorCode::validation, "high_entropy_threshold must lie in [0,1]");
    if (!unit(delta_threshold)) throw Error(ErrorCode::validation, "delta_threshold must lie in [0,1]");
}

std::string_view to_string(Decision d) noexcept {
    switch (d) {
    case Decision::Autonomous: return "Autonomous";
    case Decision::AutonomousNotify: return "AutonomousNotify";
    case Decision::Defer: return "Defer";
    case Decision::RequiresApproval: return "RequiresApproval";
    }
    return "RequiresApproval";
}

std::optional<Decision> parse_decision(std::string_view text) {
    for (Decision d : {Decision::Autonomous, Decision::AutonomousNotify, Decision::Defer, Decision::RequiresApproval})
        if (to_string(d) == text) return d;
    return std::nullopt;
}

Decision most_restrictive(Decision a, Decision b) noexcept {
    return static_cast<int>(a) >= static_cast<int>(b) ? a : b;
}

nlohmann::json to_json(const AutonomyVerdict& v) {
    return {{"decision", std::string(to_string(v.decision))},
            {"rationale", v.rationale},
            {"entropy", v.entropy},
            {"high_entropy", v.high_entropy},
            {"dominant", std::string(to_string(v.dominant))},
            {"current", std::string(to_string(v.current))},
            {"proposed", std::string(to_string(v.proposed))}};
}

AutonomyVerdict entropy_verdict(const StrategyBelief& belief, Strategy current, Strategy proposed,
                                const EntropyPolicy& policy) {
    AutonomyVerdict v;
    v.entropy = normalized_entropy(belief);
    v.dominant = belief.dominant();
    v.current = current;
    v.proposed = proposed;
    v.high_entropy = v.entropy >= policy.high_entropy_threshold;

    std::ostringstream why;
    why.precision(4);
    if (!v.high_entropy) {
        why << "low entropy (" << v.entropy << "); ";
        if (proposed == v.dominant) {
            v.decision = Decision::Autonomous;
            why << (current == proposed ? "acting within" : "switching into") << " dominant "
                << display_name(v.dominant);
        } else {
            v.decision = Decision::RequiresApproval;
            why << "moving to " << display_name(proposed) << " departs from dominant " << display_name(v.dominant);
        }
    } else {
        const double gap = belief[v.dominant] - belief[proposed];
        why << "high entropy (" << v.entropy << "); gap to dominant " << display_name(v.dominant) << " is " << gap;
        if (gap <= policy.delta_threshold + 1e-12) {
            v.decision = Decision::AutonomousNotify;
            why << ", within delta " << policy.delta_threshold;
        } else {
            v.decision = Decision::RequiresApproval;
            why << ", exceeds delta " << policy.delta_threshold;
        }
    }
    v.rationale = why.str();
    return v;
}

// ---------------------------------------------------------------------------
// Safety envelope

namespace {

bool strictly_inside(const Polygon& poly, Vec2 p, double tol) {
    return boundary_distance(poly, p) > tol && contains(poly, p, 0.0);
}

} // namespace

void SafetyEnvelope::validate() const {
    if (!(std::isfinite(min_altitude_m) && std::isfinite(max_altitude_m) && min_altitude_m < max_altitude_m))
        throw Error(ErrorCode::validation, "envelope min_altitude_m must be below max_altitude_m");
    if (!(battery_reserve_fraction > 0.0 && battery_reserve_fraction < 1.0))
        throw Error(ErrorCode::validation, "envelope battery_reserve_fraction must lie in (0,1)");
    if (!(max_range_m > 0.0)) throw Error(ErrorCode::validation, "envelope max_range_m must be positive");
    for (const auto& poly : include)
        if (!is_simple(poly)) throw Error(ErrorCode::validation, "envelope include polygon is not simple");
    for (const auto& poly : exclude)
        if (!is_simple(poly)) throw Error(ErrorCode::validation, "envelope exclude polygon is not simple");
    if (!geofence_allows(home)) throw Error(ErrorCode::validation, "envelope home position lies outside the geofence");
}

bool SafetyEnvelope::geofence_allows(Vec2 p, double tol) const {
    if (!include.empty()) {
        bool inside = std::any_of(include.begin(), include.end(), [&](const Polygon& poly) { return contains(poly, p, tol); });
        if (!inside) return false;
    }
    return std::none_of(exclude.begin(), exclude.end(), [&](const Polygon& poly) { return strictly_inside(poly, p, tol); });
}

bool SafetyEnvelope::range_allows(Vec2 p, double tol) const { return distance(p, home) <= max_range_m + tol; }

std::string_view to_string(EnvelopeConstraint c) noexcept {
    switch (c) {
    case EnvelopeConstraint::battery_reserve: return "battery_reserve";
    case EnvelopeConstraint::altitude_min: return "altitude_min";
    case EnvelopeConstraint::altitude_max: return "altitude_max";
    case EnvelopeConstraint::geofence: return "geofence";
    case EnvelopeConstraint::max_range: return "max_range";
    case EnvelopeConstraint::waypoint_geofence: return "waypoint_geofence";
    case EnvelopeConstraint::waypoint_range: return "waypoint_range";
    }
    return "unknown";
}

std::string_view to_string(EnforcedAction a) noexcept {
    switch (a) {
    case EnforcedAction::return_home: return "return_home";
    case EnforcedAction::clamp_altitude: return "clamp_altitude";
    case EnforcedAction::clamp_position: return "clamp_position";
    case EnforcedAction::clamp_waypoint: return "clamp_waypoint";
    case EnforcedAction::reject_task: return "reject_task";
    }
    return "unknown";
}

Vec2 clamp_to_envelope(Vec2 p, const SafetyEnvelope& env) {
    Vec2 q = p;
    for (int iter = 0; iter < 8; ++iter) {
        if (!env.include.empty() &&
            std::none_of(env.include.begin(), env.include.end(), [&](const Polygon& poly) { return contains(poly, q); })) {
            double best = std::numeric_limits<double>::infinity();
            Vec2 pick = q;
            for (const auto& poly : env.include) {
                Vec2 c = nearest_boundary_point(poly, q);
                if (double d = distance(c, q); d < best) {
                    best = d;
                    pick = c;
                }
            }
            q = pick;
        }
        for (const auto& poly : env.exclude)
            if (strictly_inside(poly, q, 1e-6)) q = nearest_boundary_point(poly, q);
        if (double d = distance(q, env.home); d > env.max_range_m) q = env.home + (q - env.home) * (env.max_range_m / d);
        if (env.geofence_allows(q) && env.range_allows(q)) return q;
    }
    return env.home;
}

std::optional<EnvelopeViolation> check_envelope(const EnvelopeAgentState& agent, const SafetyEnvelope& env) {
    std::ostringstream detail;
    if (agent.battery < env.battery_reserve_fraction && !agent.returning) {
        detail << "battery " << agent.battery << " below reserve " << env.battery_reserve_fraction;
        return EnvelopeViolation{EnvelopeConstraint::battery_reserve, EnforcedAction::return_home, env.home,
                                 agent.altitude_m, detail.str()};
    }
    if (agent.altitude_m < env.min_altitude_m) {
        detail << "altitude " << agent.altitude_m << " m below minimum " << env.min_altitude_m;
        return EnvelopeViolation{EnvelopeConstraint::altitude_min, EnforcedAction::clamp_altitude, std::nullopt,
                                 env.min_altitude_m, detail.str()};
    }
    if (agent.altitude_m > env.max_altitude_m) {
        detail << "altitude " << agent.altitude_m << " m above maximum " << env.max_altitude_m;
        return EnvelopeViolation{EnvelopeConstraint::altitude_max, EnforcedAction::clamp_altitude, std::nullopt,
                                 env.max_altitude_m, detail.str()};
    }
    if (!env.geofence_allows(agent.position)) {
        return EnvelopeViolation{EnvelopeConstraint::geofence, EnforcedAction::clamp_position,
                                 clamp_to_envelope(agent.position, env), agent.altitude_m, "position outside geofence"};
    }
    if (!env.range_allows(agent.position)) {
        return EnvelopeViolation{EnvelopeConstraint::max_range, EnforcedAction::clamp_position,
                                 clamp_to_envelope(agent.position, env), agent.altitude_m, "position beyond max range"};
    }
    if (agent.waypoint) {
        if (!env.geofence_allows(*agent.waypoint)) {
            return EnvelopeViolation{EnvelopeConstraint::waypoint_geofence, EnforcedAction::clamp_waypoint,
                                     clamp_to_envelope(*agent.waypoint, env), agent.altitude_m,
                                     "waypoint outside geofence"};
        }
        if (!env.range_allows(*agent.waypoint)) {
            return EnvelopeViolation{EnvelopeConstraint::waypoint_range, EnforcedAction::reject_task, std::nullopt,
                                     agent.altitude_m, "waypoint beyond max range"};
        }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Cost-benefit

void CostBenefitPolicy::validate() const {
    if (!(threshold > 0.0)) throw Error(ErrorCode::validation, "cost-benefit threshold must be positive");
    if (!(value_constant_min > 0.0)) throw Error(ErrorCode::validation, "value constant must be positive");
    if (!(cruise_speed_mps > 0.0)) throw Error(ErrorCode::validation, "cruise speed must be positive");
    if (!(inspection_dwell_min >= 0.0)) throw Error(ErrorCode::validation, "inspection dwell must be non-negative");
    if (!(inspect_radius_m >= 0.0)) throw Error(ErrorCode::validation, "inspect radius must be non-negative");
}

nlohmann::json to_json(const QueuedTask& q) {
    return {{"id", q.id},
            {"clue_id", q.clue_id},
            {"image_ref", q.image_ref},
            {"location", {q.location.x, q.location.y}},
            {"cost_min", q.cost_min},
            {"benefit_min", q.benefit_min},
            {"reason", q.reason}};
}

nlohmann::json to_json(const CostBenefitResult& r) {
    nlohmann::json j = {{"decision", std::string(to_string(r.decision))},
                        {"cost_min", r.cost_min},
                        {"benefit_min", r.benefit_min},
                        {"detour_m", r.detour_m},
                        {"rationale", r.rationale}};
    if (r.queued) j["queued"] = to_json(*r.queued);
    return j;
}

double inspection_detour_m(Vec2 agent, Vec2 location, double inspect_radius_m) {
    return 2.0 * distance(agent, location) + octagon_perimeter(inspect_radius_m);
}

CostBenefitResult cost_benefit(const ProposedTask& task, const SafetyEnvelope& envelope, const CostBenefitPolicy& policy) {
    CostBenefitResult r;
    r.benefit_min = std::max(0.0, task.alpha) * policy.value_constant_min;
    auto defer = [&](std::string reason) {
        r.decision = Decision::Defer;
        r.rationale = reason;
        r.queued = QueuedTask{"queued-" + task.clue_id, task.clue_id, task.image_ref, task.location,
                              r.cost_min,           r.benefit_min, std::move(reason)};
        return r;
    };

    if (!envelope.geofence_allows(task.location) || !envelope.range_allows(task.location)) {
        r.cost_min = std::numeric_limits<double>::infinity();
        return defer("unreachable: location lies outside the safety envelope");
    }

    if (task.on_current_path) {
        r.detour_m = 0.0;
        r.cost_min = 0.0;
    } else {
        r.detour_m = inspection_detour_m(task.agent_position, task.location, policy.inspect_radius_m);
        r.cost_min = r.detour_m / policy.cruise_speed_mps / 60.0 + policy.inspection_dwell_min;
    }

    std::ostringstream why;
    why.precision(4);
    why << "cost " << r.cost_min << " min vs benefit " << r.benefit_min << " min";
    if (r.cost_min == 0.0 && r.benefit_min > 0.0) {
        r.decision = Decision::Autonomous;
        r.rationale = why.str() + "; no detour required";
        return r;
    }
    if (!(r.benefit_min > 0.0)) return defer(why.str() + "; no expected benefit");
    const double ratio = r.cost_min / r.benefit_min;
    why << " (ratio " << ratio << ", threshold " << policy.threshold << ")";
    if (ratio <= policy.threshold) {
        r.decision = Decision::Autonomous;
        r.rationale = why.str();
        return r;
    }
    return defer(why.str());
}

// ---------------------------------------------------------------------------
// Advocates

std::string_view to_string(Persona p) noexcept {
    switch (p) {
    case Persona::Safety: return "Safety";
    case Persona::Ethics: return "Ethics";
    case Persona::Regulatory: return "Regulatory";
    }
    return "Safety";
}

std::string_view to_string(Severity s) noexcept {
    switch (s) {
    case Severity::info: return "info";
    case Severity::warn: return "warn";
    case Severity::block: return "block";
    }
    return "info";
}

std::string_view to_string(Stance s) noexcept { return s == Stance::oppose ? "oppose" : "endorse"; }

namespace {

Persona parse_persona(const std::string& s) {
    if (s == "Safety") return Persona::Safety;
    if (s == "Ethics") return Persona::Ethics;
    if (s == "Regulatory") return Persona::Regulatory;
    throw Error(ErrorCode::parse, "unknown advocate persona '" + s + "'");
}

Severity parse_severity(const std::string& s) {
    if (s == "info") return Severity::info;
    if (s == "warn") return Severity::warn;
    if (s == "block") return Severity::block;
    throw Error(ErrorCode::parse, "unknown advocate severity '" + s + "'");
}

Stance parse_stance(const std::string& s) {
    if (s == "oppose") return Stance::oppose;
    if (s == "endorse") return Stance::endorse;
    throw Error(ErrorCode::parse, "unknown advocate stance '" + s + "'");
}

double as_number(const nlohmann::json& v, const std::string& what) {
    if (!v.is_number()) throw Error(ErrorCode::validation, "predicate '" + what + "' needs a numeric operand");
    return v.get<double>();
}

bool eval_predicate(const nlohmann::json& value, const nlohmann::json& predicate) {
    if (!predicate.is_object()) return value == predicate;
    if (predicate.empty()) throw Error(ErrorCode::validation, "empty predicate object");
    for (const auto& [op, operand] : predicate.items()) {
        bool ok = false;
        if (op == "eq") ok = value == operand;
        else if (op == "ne") ok = value != operand;
        else if (op == "gt") ok = as_number(value, op) > as_number(operand, op);
        else if (op == "ge") ok = as_number(value, op) >= as_number(operand, op);
        else if (op == "lt") ok = as_number(value, op) < as_number(operand, op);
        else if (op == "le") ok = as_number(value, op) <= as_number(operand, op);
        else if (op == "in") {
            if (!operand.is_array()) throw Error(ErrorCode::validation, "'in' predicate needs an array");
            ok = std::find(operand.begin(), operand.end(), value) != operand.end();
        } else {
            throw Error(ErrorCode::validation, "unknown predicate operator '" + op + "'");
        }
        if (!ok) return false;
    }
    return true;
}

bool rule_matches(const AdvocateRule& rule, const nlohmann::json& attrs) {
    if (!rule.pattern.is_object() || rule.pattern.empty())
        throw Error(ErrorCode::validation, "rule '" + rule.rule_id + "' has no pattern");
    for (const auto& [attr, predicate] : rule.pattern.items()) {
        auto it = attrs.find(attr);
        if (it == attrs.end()) return false;
        if (!eval_predicate(*it, predicate)) return false;
    }
    return true;
}

} // namespace

nlohmann::json to_json(const AdvocateReview& r) {
    nlohmann::json concerns = nlohmann::json::array();
    for (const auto& c : r.concerns)
        concerns.push_back({{"persona", std::string(to_string(c.persona))},
                            {"severity", std::string(to_string(c.severity))},
                            {"stance", std::string(to_string(c.stance))},
                            {"rule_id", c.rule_id},
                            {"grounding", c.grounding}});
    return {{"consensus", r.consensus == Consensus::Clear ? "Clear" : "Escalate"},
            {"concerns", concerns},
            {"note", r.note}};
}

AdvocateReview advocate_review_from_json(const nlohmann::json& j) {
    AdvocateReview r;
    r.consensus = j.at("consensus").get<std::string>() == "Clear" ? Consensus::Clear : Consensus::Escalate;
    r.note = j.value("note", "");
    for (const auto& c : j.at("concerns"))
        r.concerns.push_back({parse_persona(c.at("persona")), parse_severity(c.at("severity")),
                              parse_stance(c.value("stance", "oppose")), c.at("rule_id"), c.value("grounding", "")});
    return r;
}

std::vector<AdvocateRule> parse_advocate_rules(const nlohmann::json& doc) {
    try {
        const auto& list = doc.is_object() ? doc.at("rules") : doc;
        std::vector<AdvocateRule> rules;
        for (const auto& r : list) {
            AdvocateRule rule;
            rule.persona = parse_persona(r.at("persona").get<std::string>());
            rule.rule_id = r.at("rule_id").get<std::string>();
            rule.pattern = r.at("pattern");
            rule.severity = parse_severity(r.at("severity").get<std::string>());
            rule.stance = parse_stance(r.value("stance", std::string("oppose")));
            rule.grounding = r.value("grounding_text", std::string());
            rules.push_back(std::move(rule));
        }
        return rules;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::parse, std::string("malformed advocate rules: ") + e.what());
    }
}

std::vector<AdvocateRule> load_advocate_rules_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io, "cannot open advocate rules '" + path + "'");
    try {
        return parse_advocate_rules(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::parse, std::string("advocate rules are not valid JSON: ") + e.what());
    }
}

AdvocateReview run_advocates(const nlohmann::json& plan_attributes, const std::vector<AdvocateRule>& rules) {
    AdvocateReview review;
    try {
        if (!plan_attributes.is_object()) throw Error(ErrorCode::validation, "plan attributes must be an object");
        for (const auto& rule : rules) {
            if (rule_matches(rule, plan_attributes))
                review.concerns.push_back({rule.persona, rule.severity, rule.stance, rule.rule_id, rule.grounding});
        }
    } catch (const std::exception& e) {
        review.consensus = Consensus::Escalate;
        review.note = std::string("rule evaluation failed: ") + e.what();
        return review;
    }

    bool blocked = false;
    std::optional<Persona> oppose_by;
    std::optional<Persona> endorse_by;
    bool conflict = false;
    for (const auto& c : review.concerns) {
        if (c.severity == Severity::block) blocked = true;
        if (c.severity != Severity::warn) continue;
        if (c.stance == Stance::oppose) {
            if (endorse_by && *endorse_by != c.persona) conflict = true;
            oppose_by = c.persona;
        } else {
            if (oppose_by && *oppose_by != c.persona) conflict = true;
            endorse_by = c.persona;
        }
    }
    if (blocked) {
        review.consensus = Consensus::Escalate;
        review.note = "blocking concern raised";
    } else if (conflict) {
        review.consensus = Consensus::Escalate;
        review.note = "advocates disagree";
    } else {
        review.consensus = Consensus::Clear;
    }
    return review;
}

} // namespace sar
