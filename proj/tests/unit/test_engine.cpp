#include "sarguard/engine.hpp"
#include "sarguard/replay.hpp"
#include "sarguard/runner.hpp"

#include "../support/missions.hpp"
#include "../support/testing.hpp"

#include <algorithm>
#include <set>

using namespace sar;
using namespace sar::testing;
using nlohmann::json;

namespace {

void step_until(MissionEngine& e, const std::function<bool()>& done, int limit = 4000) {
    for (int i = 0; i < limit && !done() && !e.terminal(); ++i) e.step();
}

OperatorCommand decision(CommandKind k, const std::string& id) {
    OperatorCommand c;
    c.kind = k;
    c.approval_id = id;
    return c;
}

} // namespace

TEST_CASE("a new Rockies mission starts Region-dominant") {
    auto e = engine_for("rockies");
    CHECK(e->tick() == 0);
    CHECK(e->belief().dominant() == Strategy::Region);
    CHECK(e->active() == Strategy::Region);
    CHECK(e->belief().is_normalized());
    CHECK(e->agents().size() == 7);
    CHECK(events_of(*e, "belief_init").size() == 1);
    CHECK(events_of(*e, "tasks_generated").size() == kStrategyCount);
    for (Strategy s : kAllStrategies) CHECK(e->coverage(s) == 0.0);
    CHECK(e->approvals().empty());
}

TEST_CASE("a strategy with nothing to search counts as covered") {
    // The quarry has no open water.
    auto e = engine_for("quarry");
    CHECK(e->coverage(Strategy::Waterways) == 1.0);
    CHECK(e->coverage(Strategy::Region) == 0.0);
}

TEST_CASE("agents fly at cruise speed") {
    auto e = engine_for("rockies", {{"constants", {{"tick_s", 3.0}}}});
    const Vec2 home = e->scenario().envelope.home;
    e->step();
    for (const auto& a : e->agents()) {
        CAPTURE(a.id);
        REQUIRE(a.task.has_value());
        CHECK(distance(a.position, home) <= 30.0 + 1e-9);
        // Agents whose first waypoint is further than one tick away have flown exactly 30 m towards it.
        if (distance(home, a.task->path.front()) > 30.0) CHECK(std::abs(distance(a.position, home) - 30.0) < 1e-9);
    }
}

TEST_CASE("agents turn home the tick the battery crosses the reserve") {
    // A drain rate that empties 20% of the battery in 100 s.
    auto e = engine_for("rockies", {{"constants", {{"battery_drain_per_s", 0.008}}}});
    const double reserve = e->scenario().envelope.battery_reserve_fraction;
    step_until(*e, [&] { return e->agents().front().battery < reserve; }, 400);
    REQUIRE(e->agents().front().battery < reserve);
    CHECK(e->agents().front().mode == AgentMode::returning);
    const auto enforced = events_of(*e, "envelope_enforced");
    REQUIRE_FALSE(enforced.empty());
    CHECK(enforced.back()->tick == e->tick());
}

TEST_CASE("clues are detected once") {
    auto e = run_shipped("rockies", "always-approve");
    std::set<std::string> seen;
    for (const auto* ev : events_of(*e, "clue_detected")) {
        const auto id = ev->data["clue_id"].get<std::string>();
        CHECK(seen.insert(id).second);
    }
    CHECK(seen.count("clue-red-hat"));
    CHECK(seen.count("clue-doll"));
    // The boots lie in ground the mission never reached.
    CHECK_FALSE(seen.count("clue-boots"));
}

TEST_CASE("the always-approve Rockies run finds the child on the far shore") {
    auto e = run_shipped("rockies", "always-approve");
    CHECK(e->outcome() == "found");
    CHECK(e->belief().dominant() == Strategy::Waterways);
    CHECK(e->active() == Strategy::Waterways);

    const auto hat = events_of(*e, "belief_update", [](const json& d) { return d.value("clue_id", "") == "clue-red-hat"; });
    REQUIRE(hat.size() == 1);
    CHECK(hat[0]->data["target"] == "waterways");
    CHECK(std::abs(hat[0]->data["gamma"].get<double>() - 0.8) < 1e-12);

    SUBCASE("waterways tasks go out right after the switch is approved") {
        const auto switches = events_of(*e, "approval_resolved", [](const json& d) { return d["kind"] == "strategy-switch"; });
        REQUIRE(switches.size() == 1);
        const int t = switches[0]->tick;
        const auto assigned = events_of(*e, "task_assigned", [&](const json& d) { return d["strategy"] == "waterways"; });
        REQUIRE_FALSE(assigned.empty());
        CHECK(assigned.front()->tick <= t + 1);
        CHECK(assigned.front()->seq > switches[0]->seq);
    }
    SUBCASE("region coverage passed the decay threshold") {
        CHECK(e->coverage(Strategy::Region) >= 0.6);
        CHECK_FALSE(events_of(*e, "belief_update", [](const json& d) { return d["kind"] == "negative"; }).empty());
    }
}

TEST_CASE("rejected clues never move the belief") {
    auto e = run_shipped("rockies", "always-reject");
    CHECK(e->outcome() == "exhausted");
    CHECK(events_of(*e, "belief_update", is_pipeline_positive).empty());
    const auto rejected = events_of(*e, "trace_disposition", [](const json& d) { return d["disposition"] == "rejected"; });
    CHECK_FALSE(rejected.empty());
}

TEST_CASE("unanswered approvals time out into the queue") {
    auto e = run_shipped("rockies", "scripted:" + data_path("policies/absent.json"),
                         {{"constants", {{"approval_timeout_ticks", 30}, {"ticks_max", 600}}}});
    const auto expired = events_of(*e, "approval_resolved", [](const json& d) { return d["source"] == "timeout" && d["decision"] == "expired"; });
    REQUIRE_FALSE(expired.empty());
    const auto queued = events_of(*e, "trace_disposition", [](const json& d) { return d["disposition"] == "queued"; });
    CHECK_FALSE(queued.empty());
    CHECK(events_of(*e, "belief_update", is_pipeline_positive).empty());
}

TEST_CASE("first assignments go to the active strategy, nearest agent first") {
    auto e = engine_for("rockies");
    e->step();
    const auto assigned = events_of(*e, "task_assigned");
    REQUIRE(assigned.size() == e->agents().size());
    // Everyone starts at home, so distance ties fall to agent order.
    CHECK(assigned.front()->data["agent"] == "uav-01");
    for (const auto* ev : assigned) {
        CHECK(ev->data["strategy"] == "region");
        CHECK(ev->data["reason"] == "active-strategy");
    }
}

TEST_CASE("busy agents leave tasks in the pool") {
    auto e = engine_for("rockies");
    e->step();
    for (const auto& a : e->agents()) CHECK(a.task.has_value());
    CHECK_FALSE(e->pool().empty());
}

TEST_CASE("operator commands") {
    auto e = engine_for("rockies");
    e->step();

    SUBCASE("boost") {
        const double before = e->belief()[Strategy::Trail];
        OperatorCommand c;
        c.kind = CommandKind::boost;
        c.strategy = Strategy::Trail;
        c.gamma = 0.5;
        e->submit(c);
        e->step();
        CHECK(e->belief()[Strategy::Trail] > before);
        CHECK_FALSE(events_of(*e, "belief_update", [](const json& d) { return d["kind"] == "operator"; }).empty());
    }
    SUBCASE("reset restores the initial belief") {
        const auto initial = e->belief();
        OperatorCommand c;
        c.kind = CommandKind::reduce;
        c.strategy = Strategy::Region;
        c.gamma = 0.5;
        e->submit(c);
        e->step();
        CHECK(e->belief()[Strategy::Region] < initial[Strategy::Region]);
        OperatorCommand r;
        r.kind = CommandKind::reset;
        e->submit(r);
        e->step();
        for (Strategy s : kAllStrategies) CHECK(std::abs(e->belief()[s] - initial[s]) < 1e-9);
    }
    SUBCASE("expanding the region regenerates its tasks") {
        OperatorCommand c;
        c.kind = CommandKind::expand_region;
        c.radius_m = 600;
        e->submit(c);
        e->step();
        const auto gen = events_of(*e, "tasks_generated", [](const json& d) { return d.contains("radius_m"); });
        REQUIRE(gen.size() == 1);
        for (const auto& t : gen[0]->data["tasks"]) CHECK(t["id"].get<std::string>().rfind("region-x1-", 0) == 0);
        CHECK(e->coverage(Strategy::Region) < 0.6);
    }
    SUBCASE("unknown approvals") { CHECK_ERROR_CODE(e->submit(decision(CommandKind::approve, "appr-9999")), ErrorCode::not_found); }
    SUBCASE("malformed commands") {
        OperatorCommand c;
        c.kind = CommandKind::boost;
        CHECK_ERROR_CODE(e->submit(c), ErrorCode::validation);
        CHECK_ERROR_CODE(command_from_json({{"decision", "shrug"}}), ErrorCode::validation);
    }
}

TEST_CASE("resolving an approval twice is a conflict") {
    auto e = engine_for("rockies");
    step_until(*e, [&] { return !e->approvals().empty(); });
    REQUIRE_FALSE(e->approvals().empty());
    const std::string id = e->approvals().begin()->first;
    e->submit(decision(CommandKind::approve, id));
    CHECK_ERROR_CODE(e->submit(decision(CommandKind::reject, id)), ErrorCode::conflict);
    e->step();
    CHECK(e->approvals().count(id) == 0);
    CHECK_ERROR_CODE(e->submit(decision(CommandKind::approve, id)), ErrorCode::conflict);
}

TEST_CASE("a finished mission refuses further commands") {
    auto e = engine_for("rockies");
    e->abort("test");
    CHECK(e->outcome() == "aborted");
    CHECK(e->terminal());
    const auto n = e->events().size();
    e->step();
    CHECK(e->events().size() == n);
    OperatorCommand c;
    c.kind = CommandKind::reset;
    CHECK_ERROR_CODE(e->submit(c), ErrorCode::invalid_transition);
}

TEST_CASE("identical runs produce identical logs") {
    for (const std::string scenario : {"rockies", "quarry"}) {
        auto a = run_shipped(scenario, "always-approve");
        auto b = run_shipped(scenario, "always-approve");
        REQUIRE(a->events().size() == b->events().size());
        for (std::size_t i = 0; i < a->events().size(); ++i)
            REQUIRE(to_json(a->events()[i]).dump() == to_json(b->events()[i]).dump());
    }
}

TEST_CASE("the seed changes stochastic detection") {
    auto setup = load_setup(scenario_path("quarry"));
    auto a = make_engine(setup, "q", 1);
    auto b = make_engine(setup, "q", 2);
    auto p1 = make_policy("always-approve");
    auto p2 = make_policy("always-approve");
    run_mission(*a, *p1);
    run_mission(*b, *p2);
    CHECK(a->seed() == 1);
    CHECK(b->seed() == 2);
    CHECK(export_replay(*a, "x") != export_replay(*b, "x"));
}

TEST_CASE("the quarry heliport forces an advocate escalation") {
    auto e = run_shipped("quarry", "always-approve");
    const auto esc = events_of(*e, "approval_requested", [](const json& d) { return d["kind"] == "advocate-escalation"; });
    CHECK_FALSE(esc.empty());
    CHECK(e->outcome() == "found");
}

TEST_CASE("policies") {
    CHECK(make_policy("always-approve")->name() == "always-approve");
    CHECK(make_policy("approve-after:30")->name() == "approve-after:30");
    CHECK_ERROR_CODE(make_policy("approve-after:x"), ErrorCode::validation);
    CHECK_ERROR_CODE(make_policy("sometimes"), ErrorCode::validation);
    CHECK_ERROR_CODE(make_scripted_policy(json{{"default", "maybe"}}), ErrorCode::validation);
    CHECK_ERROR_CODE(make_scripted_policy(json{{"actions", {{{"decision", "approve"}}}}}), ErrorCode::validation);

    SUBCASE("approve-after waits") {
        auto e = engine_for("rockies");
        auto p = make_policy("approve-after:10");
        step_until(*e, [&] { return !e->approvals().empty(); });
        REQUIRE_FALSE(e->approvals().empty());
        CHECK(p->decide(*e).empty());
        const int created = e->approvals().begin()->second.created_tick;
        while (e->tick() < created + 10) e->step();
        CHECK(p->decide(*e).size() == 1);
    }
}

TEST_CASE("run summaries score clue relevance") {
    auto e = run_shipped("rockies", "always-approve");
    const auto s = summarize(*e);
    CHECK(s.outcome == "found");
    CHECK(s.found_tick.has_value());
    CHECK(s.clues.true_positive == 2);
    CHECK(s.clues.false_positive == 0);
    REQUIRE(s.clues.precision.has_value());
    CHECK(*s.clues.precision == 1.0);
    CHECK(*s.clues.recall == 1.0);
    CHECK(s.pipeline_updates == 2);
}
