#include "sarguard/guardrails.hpp"
#include "sarguard/text.hpp"

#include "../support/oracle.hpp"
#include "../support/testing.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace sar;
using namespace sar::testing;
using nlohmann::json;

namespace {

double entropy_oracle(const StrategyBelief& b) {
    double h = 0.0;
    for (double p : b.p)
        if (p > 0) h -= p * std::log2(p);
    return h / std::log2(5.0);
}

SafetyEnvelope square_envelope() {
    SafetyEnvelope env;
    env.home = {500, 500};
    env.max_range_m = 2000;
    env.include = {Polygon{{{0, 0}, {1000, 0}, {1000, 1000}, {0, 1000}}}};
    return env;
}

std::vector<AdvocateRule> shipped_rules() { return load_advocate_rules_file(data_path("advocate_rules.json")); }

bool has_concern(const AdvocateReview& r, Persona p, Severity s, Stance st) {
    for (const auto& c : r.concerns)
        if (c.persona == p && c.severity == s && c.stance == st) return true;
    return false;
}

} // namespace

TEST_CASE("normalized entropy") {
    CHECK(std::abs(normalized_entropy(StrategyBelief::uniform()) - 1.0) < 1e-12);
    CHECK(normalized_entropy(belief_of(0, 0, 1, 0, 0)) == 0.0);
    const double low = normalized_entropy(low_entropy_table());
    const double high = normalized_entropy(high_entropy_table());
    CHECK(std::abs(low - entropy_oracle(low_entropy_table())) < 1e-12);
    CHECK(std::abs(high - entropy_oracle(high_entropy_table())) < 1e-12);
    CHECK(std::abs(low - 0.6938) < 1e-4);
    CHECK(std::abs(high - 0.9857) < 1e-4);
}

TEST_CASE("low entropy: autonomy only within the dominant strategy") {
    const EntropyPolicy policy;
    const auto b = low_entropy_table();
    CHECK(entropy_verdict(b, Strategy::Region, Strategy::Region, policy).decision == Decision::Autonomous);
    CHECK(entropy_verdict(b, Strategy::Trail, Strategy::Region, policy).decision == Decision::Autonomous);
    const auto away = entropy_verdict(b, Strategy::Region, Strategy::Trail, policy);
    CHECK(away.decision == Decision::RequiresApproval);
    CHECK_FALSE(away.high_entropy);
    CHECK(entropy_verdict(b, Strategy::Trail, Strategy::Shelter, policy).decision == Decision::RequiresApproval);
}

TEST_CASE("high entropy: notify within delta of the dominant, approval otherwise") {
    EntropyPolicy policy;
    policy.delta_threshold = 0.05;
    const auto b = high_entropy_table();
    const auto contour = entropy_verdict(b, Strategy::Region, Strategy::Contour, policy);
    CHECK(contour.high_entropy);
    CHECK(contour.decision == Decision::RequiresApproval);
    CHECK(entropy_verdict(b, Strategy::Region, Strategy::Shelter, policy).decision == Decision::AutonomousNotify);
    for (Strategy s : {Strategy::Trail, Strategy::Waterways, Strategy::Region})
        CHECK(entropy_verdict(b, Strategy::Region, s, policy).decision == Decision::AutonomousNotify);
}

TEST_CASE("entropy verdicts follow the threshold over random beliefs") {
    std::mt19937_64 rng(3);
    const EntropyPolicy policy;
    for (int i = 0; i < 2000; ++i) {
        const auto b = random_belief(rng);
        const Strategy cur = kAllStrategies[rng() % 5], prop = kAllStrategies[rng() % 5];
        const auto v = entropy_verdict(b, cur, prop, policy);
        const Strategy dom = b.dominant();
        if (entropy_oracle(b) < policy.high_entropy_threshold) {
            CHECK(v.decision == (prop == dom ? Decision::Autonomous : Decision::RequiresApproval));
        } else {
            const bool close = b[dom] - b[prop] <= policy.delta_threshold;
            CHECK(v.decision == (close ? Decision::AutonomousNotify : Decision::RequiresApproval));
        }
    }
}

TEST_CASE("most restrictive decision wins") {
    CHECK(most_restrictive(Decision::Autonomous, Decision::RequiresApproval) == Decision::RequiresApproval);
    CHECK(most_restrictive(Decision::Defer, Decision::AutonomousNotify) == Decision::Defer);
    CHECK(parse_decision("AutonomousNotify") == Decision::AutonomousNotify);
}

TEST_CASE("cost-benefit") {
    const CostBenefitPolicy policy;
    const auto env = square_envelope();
    const double orbit = 16.0 * 15.0 * std::sin(std::numbers::pi / 8.0);

    SUBCASE("two-minute detour for a strong clue proceeds") {
        // 1200 m of extra flight at 10 m/s is two minutes.
        const double d = (1200.0 - orbit) / 2.0;
        ProposedTask t{"c1", "img", {100 + d, 500}, {100, 500}, 0.8, false};
        const auto r = cost_benefit(t, env, policy);
        CHECK(std::abs(r.detour_m - 1200.0) < 1e-9);
        CHECK(std::abs(r.cost_min - 4.0) < 1e-9);
        CHECK(r.benefit_min == doctest::Approx(16.0));
        CHECK(r.decision == Decision::Autonomous);
        CHECK_FALSE(r.queued.has_value());
    }
    SUBCASE("object on the current path costs nothing") {
        ProposedTask t{"c2", "img", {100, 100}, {900, 900}, 0.01, true};
        const auto r = cost_benefit(t, env, policy);
        CHECK(r.cost_min == 0.0);
        CHECK(r.decision == Decision::Autonomous);
    }
    SUBCASE("long detour for a weak clue is queued with its geolocation") {
        // A 30-minute detour: 16.8 km of flight plus the two-minute dwell.
        const double d = (16800.0 - orbit) / 2.0;
        const Vec2 home{500, 500}, far{500 + d, 500};
        SafetyEnvelope wide = env;
        wide.include = {Polygon{{{0, 0}, {10000, 0}, {10000, 1000}, {0, 1000}}}};
        wide.max_range_m = 10000;
        ProposedTask t{"c3", "images/far.jpg", far, home, 0.275, false};
        const auto r = cost_benefit(t, wide, policy);
        const double expect = (2.0 * std::hypot(far.x - home.x, far.y - home.y) + orbit) / 10.0 / 60.0 + 2.0;
        CHECK(std::abs(r.cost_min - expect) < 1e-9);
        CHECK(std::abs(r.cost_min - 30.0) < 1e-9);
        CHECK(r.decision == Decision::Defer);
        REQUIRE(r.queued.has_value());
        CHECK(r.queued->location == far);
        CHECK(r.queued->image_ref == "images/far.jpg");
        CHECK(r.queued->clue_id == "c3");
    }
    SUBCASE("outside the envelope is never inspected") {
        ProposedTask t{"c4", "img", {1500, 500}, {500, 500}, 0.8, false};
        CHECK(cost_benefit(t, env, policy).decision == Decision::Defer);
    }
}

TEST_CASE("advocates") {
    const auto rules = shipped_rules();
    REQUIRE_FALSE(rules.empty());

    SUBCASE("nothing matches") {
        const auto r = run_advocates({{"altitude_m", 60}, {"strategy", "trail"}}, rules);
        CHECK(r.consensus == Consensus::Clear);
        CHECK(r.concerns.empty());
    }
    SUBCASE("restricted airspace blocks") {
        const auto r = run_advocates({{"crosses_restricted_airspace", true}, {"life_risk", false}}, rules);
        CHECK(r.consensus == Consensus::Escalate);
        CHECK(has_concern(r, Persona::Regulatory, Severity::block, Stance::oppose));
    }
    SUBCASE("life risk adds an endorsing ethics warning, still escalated") {
        const auto r = run_advocates({{"crosses_restricted_airspace", true}, {"life_risk", true}}, rules);
        CHECK(r.consensus == Consensus::Escalate);
        CHECK(has_concern(r, Persona::Regulatory, Severity::block, Stance::oppose));
        CHECK(has_concern(r, Persona::Ethics, Severity::warn, Stance::endorse));
    }
    SUBCASE("opposing warnings escalate without a block") {
        std::vector<AdvocateRule> pair = {
            {Persona::Safety, "s", json{{"x", true}}, Severity::warn, Stance::oppose, ""},
            {Persona::Ethics, "e", json{{"x", true}}, Severity::warn, Stance::endorse, ""}};
        CHECK(run_advocates({{"x", true}}, pair).consensus == Consensus::Escalate);
        pair.pop_back();
        CHECK(run_advocates({{"x", true}}, pair).consensus == Consensus::Clear);
    }
    SUBCASE("comparison operators") {
        CHECK(run_advocates({{"altitude_m", 130}}, rules).consensus == Consensus::Escalate);
        CHECK(run_advocates({{"altitude_m", 20}}, rules).consensus == Consensus::Escalate);
        CHECK(run_advocates({{"weather", "storm"}}, rules).concerns.size() == 1);
    }
    SUBCASE("a broken rule escalates rather than throwing") {
        std::vector<AdvocateRule> bad = {
            {Persona::Safety, "bad", json{{"altitude_m", {{"between", 3}}}}, Severity::info, Stance::oppose, ""}};
        CHECK(run_advocates({{"altitude_m", 50}}, bad).consensus == Consensus::Escalate);
    }
}

TEST_CASE("safety envelope") {
    auto env = square_envelope();
    EnvelopeAgentState a{{500, 500}, 60.0, 0.9, false, Vec2{600, 600}};

    SUBCASE("inside all bounds") { CHECK_FALSE(check_envelope(a, env).has_value()); }
    SUBCASE("waypoint 10 m outside the geofence is clamped to the boundary") {
        a.waypoint = Vec2{1010, 400};
        const auto v = check_envelope(a, env);
        REQUIRE(v.has_value());
        CHECK(v->constraint == EnvelopeConstraint::waypoint_geofence);
        CHECK(v->action == EnforcedAction::clamp_waypoint);
        REQUIRE(v->corrected_point.has_value());
        CHECK(std::abs(v->corrected_point->x - 1000.0) < 1e-6);
        CHECK(std::abs(v->corrected_point->y - 400.0) < 1e-6);
        CHECK(env.geofence_allows(*v->corrected_point));
    }
    SUBCASE("battery just under reserve sends the agent home") {
        a.battery = env.battery_reserve_fraction - 0.01;
        const auto v = check_envelope(a, env);
        REQUIRE(v.has_value());
        CHECK(v->action == EnforcedAction::return_home);
        CHECK(v->corrected_point == env.home);
        a.returning = true;
        CHECK_FALSE(check_envelope(a, env).has_value());
    }
    SUBCASE("altitude is clamped into the band") {
        a.altitude_m = 150;
        auto v = check_envelope(a, env);
        REQUIRE(v.has_value());
        CHECK(v->corrected_altitude == env.max_altitude_m);
        a.altitude_m = 10;
        v = check_envelope(a, env);
        REQUIRE(v.has_value());
        CHECK(v->corrected_altitude == env.min_altitude_m);
    }
    SUBCASE("exclusion zones and range") {
        env.exclude = {Polygon{{{400, 400}, {600, 400}, {600, 600}, {400, 600}}}};
        a.position = {450, 450};
        CHECK(check_envelope(a, env)->constraint == EnvelopeConstraint::geofence);
        env.exclude.clear();
        env.max_range_m = 100;
        a.position = {800, 500};
        const auto v = check_envelope(a, env);
        REQUIRE(v.has_value());
        CHECK(v->constraint == EnvelopeConstraint::max_range);
        CHECK(distance(*v->corrected_point, env.home) <= 100.0 + 1e-6);
    }
}

TEST_CASE("clamped points always satisfy the envelope") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-500, 1500);
    auto env = square_envelope();
    env.max_range_m = 600;
    env.exclude = {Polygon{{{700, 700}, {800, 700}, {800, 800}, {700, 800}}}};
    for (int i = 0; i < 2000; ++i) {
        const Vec2 p{u(rng), u(rng)};
        const Vec2 c = clamp_to_envelope(p, env);
        CHECK(env.geofence_allows(c, 1e-6));
        CHECK(env.range_allows(c, 1e-6));
    }
}
