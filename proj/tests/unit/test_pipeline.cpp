#include "sarguard/backend.hpp"
#include "sarguard/pipeline.hpp"
#include "sarguard/scenario.hpp"
#include "sarguard/text.hpp"

#include "../support/testing.hpp"

#include <algorithm>

using namespace sar;
using namespace sar::testing;
using nlohmann::json;

namespace {

struct Fixture {
    Scenario rockies = load_scenario_file(data_path("scenarios/rockies.json"));
    PipelineResources res = load_pipeline_resources();
    PipelineSettings settings;

    const Clue& clue(const std::string& id) const {
        auto it = std::find_if(rockies.clues.begin(), rockies.clues.end(), [&](const Clue& c) { return c.id == id; });
        REQUIRE(it != rockies.clues.end());
        return *it;
    }
    ClueView view(const std::string& id, bool inspected = false) const { return view_of(clue(id), rockies, inspected); }
    MissionView mission(const ClueView& v, StrategyBelief b = low_entropy_table(), Strategy active = Strategy::Region) const {
        MissionView m;
        m.scenario = &rockies;
        m.belief = b;
        m.active = active;
        m.agent_id = "uav-01";
        m.agent_position = v.location;
        return m;
    }
};

ClueView bare_clue(std::optional<ClassifierTag> s1, std::optional<ClassifierTag> s2) {
    ClueView v;
    v.id = "c";
    v.stage1 = std::move(s1);
    v.stage2 = std::move(s2);
    return v;
}

} // namespace

TEST_CASE("classification") {
    SUBCASE("a confident first stage skips the second") {
        const auto c = classify(bare_clue(ClassifierTag{"hat", Level::High}, ClassifierTag{"cloth", Level::Low}));
        CHECK(c.cv == Level::High);
        CHECK(c.stage2_skipped);
        CHECK(c.label == "hat");
    }
    SUBCASE("the second stage can raise confidence") {
        const auto c = classify(bare_clue(ClassifierTag{"blurry object", Level::Low}, ClassifierTag{"cloth", Level::Medium}));
        CHECK(c.cv == Level::Medium);
        CHECK_FALSE(c.stage2_skipped);
    }
    SUBCASE("missing tags default to Low with a warning") {
        const auto c = classify(bare_clue(std::nullopt, std::nullopt));
        CHECK(c.cv == Level::Low);
        CHECK_FALSE(c.warnings.empty());
    }
}

TEST_CASE("knowledge retrieval") {
    const Fixture f;
    const auto& kb = f.res.knowledge;
    CHECK(tag_overlap("clue-location/water", "clue-location/water") == 2);
    CHECK(tag_overlap("clue-location/water", "clue-location") == 1);
    CHECK(tag_overlap("clue-location/water", "clue-location/trail") == 0);

    SUBCASE("trail clue") {
        const auto hits = kb.retrieve({"clue-location/trail"}, "backpack on the trail", 3);
        REQUIRE_FALSE(hits.empty());
        CHECK(hits[0].entry->id == "kb-trail-downhill");
        CHECK(hits[0].entry->text.find("downhill") != std::string::npos);
    }
    SUBCASE("water clue") {
        const auto hits = kb.retrieve({"clue-location/water"}, "hat floating", 3);
        REQUIRE_FALSE(hits.empty());
        CHECK(hits[0].entry->id == "kb-water-shoreline");
        CHECK(hits[0].entry->suggests_strategy == Strategy::Waterways);
    }
    SUBCASE("no overlapping tags") { CHECK(kb.retrieve({"nothing/here"}, "hat", 3).empty()); }
    SUBCASE("results are bounded and ranked") {
        const auto hits = kb.retrieve({"clue-location/forest", "profile/child"}, "", 2);
        CHECK(hits.size() == 2);
        CHECK(hits[0].entry->id == "kb-forest-child");
    }
}

TEST_CASE("stub backend") {
    const Fixture f;
    StubBackend stub;

    SUBCASE("red hat for a girl in a red hat is highly relevant") {
        const auto pass = run_pass(f.view("clue-red-hat"), f.mission(f.view("clue-red-hat")), f.res, f.settings, stub, 1);
        CHECK(pass.relevance == "High");
        CHECK(pass.strategy == Strategy::Waterways);
        CHECK(pass.plan["strategy"] == "Waterways Search");
    }
    SUBCASE("adult boots are not relevant to a child") {
        const auto pass = run_pass(f.view("clue-boots"), f.mission(f.view("clue-boots")), f.res, f.settings, stub, 1);
        CHECK((pass.relevance == "Low" || pass.relevance == "None"));
    }
    SUBCASE("a bicycle is rejected") {
        const auto pass = run_pass(f.view("clue-bike"), f.mission(f.view("clue-bike")), f.res, f.settings, stub, 1);
        CHECK(pass.outcome == PassOutcome::rejected);
    }
    SUBCASE("prompt context survives the round trip") {
        const json ctx = {{"stage", 3}, {"x", 1}};
        CHECK(prompt_context(std::string("Assess.\n") + kContextMarker + " " + ctx.dump() + "\n") == ctx);
        CHECK(prompt_context("no context").is_null());
    }
}

TEST_CASE("the red hat trace") {
    const Fixture f;
    StubBackend stub;
    const auto v = f.view("clue-red-hat");
    const auto pass = run_pass(v, f.mission(v), f.res, f.settings, stub, 1);
    REQUIRE(pass.outcome == PassOutcome::decided);
    CHECK(pass.classification.stage2_skipped);
    CHECK(pass.assessment.relevance == Level::High);
    CHECK(pass.assessment.cv_confidence == Level::High);
    CHECK(pass.assessment.interp_confidence == Level::High);
    CHECK(std::abs(pass.gamma - 0.8) < 1e-12);
    // Region dominates at low entropy, so moving to Waterways needs a person.
    CHECK(pass.verdict.decision == Decision::RequiresApproval);
    CHECK(pass.decision == Decision::RequiresApproval);
    // Stages 1 to 7 are all recorded.
    REQUIRE(pass.stages.size() == 7);
    for (int i = 0; i < 7; ++i) CHECK(pass.stages[i].stage == i + 1);
}

TEST_CASE("the doll reinforces the current strategy autonomously") {
    const Fixture f;
    StubBackend stub;
    const auto v = f.view("clue-doll");
    const auto pass = run_pass(v, f.mission(v), f.res, f.settings, stub, 1);
    REQUIRE(pass.outcome == PassOutcome::decided);
    CHECK(pass.strategy == Strategy::Region);
    CHECK(pass.decision == Decision::Autonomous);
}

TEST_CASE("the red cloth asks for a closer look, and the close-up rules it out") {
    const Fixture f;
    StubBackend stub;
    const auto far = f.view("clue-red-cloth");
    CHECK(far.has_closeup);
    const auto first = run_pass(far, f.mission(far), f.res, f.settings, stub, 1);
    CHECK(first.outcome == PassOutcome::inspect);
    const auto near = f.view("clue-red-cloth", true);
    const auto second = run_pass(near, f.mission(near), f.res, f.settings, stub, 2);
    CHECK(second.outcome == PassOutcome::rejected);
}

TEST_CASE("scripted stage answers drive gamma") {
    const Fixture f;
    ScriptedBackend scripted({R"({"relevance": "Medium"})", R"({"interp_confidence": "Low"})",
                              R"({"strategy": "Trail Search"})"});
    const auto v = f.view("clue-doll");
    const auto pass = run_pass(v, f.mission(v), f.res, f.settings, scripted, 1);
    REQUIRE(pass.outcome == PassOutcome::decided);
    CHECK(scripted.calls() == 3);
    CHECK(pass.strategy == Strategy::Trail);
    // 0.5*0.4 + 0.5*(0.5*0.8 + 0.5*0.1)
    CHECK(std::abs(pass.gamma - 0.425) < 1e-12);
}

TEST_CASE("mangled stage answers are repaired before use") {
    const Fixture f;
    ScriptedBackend scripted({"Sure:\n```json\n{'relevance': 'high',}\n```", R"({interp_confidence: "High"})",
                              R"({"strategy": "waterways"})"});
    const auto v = f.view("clue-red-hat");
    const auto pass = run_pass(v, f.mission(v), f.res, f.settings, scripted, 1);
    REQUIRE(pass.outcome == PassOutcome::decided);
    CHECK(pass.stages[2].repaired);
    CHECK(pass.strategy == Strategy::Waterways);
    CHECK(std::abs(pass.gamma - 0.8) < 1e-12);
}

TEST_CASE("an unreachable or hopeless backend escalates") {
    const Fixture f;
    const auto v = f.view("clue-red-hat");
    SUBCASE("unreachable") {
        UnreachableBackend down;
        CHECK(run_pass(v, f.mission(v), f.res, f.settings, down, 1).outcome == PassOutcome::escalated);
    }
    SUBCASE("budget exhausted") {
        ScriptedBackend junk({"no", "still no", "nothing", "never"});
        const auto pass = run_pass(v, f.mission(v), f.res, f.settings, junk, 1);
        CHECK(pass.outcome == PassOutcome::escalated);
        CHECK(junk.calls() == 1 + static_cast<std::size_t>(f.settings.repair_budget));
    }
}

TEST_CASE("a regulatory block forces approval regardless of entropy") {
    const Fixture f;
    StubBackend stub;
    const auto v = f.view("clue-doll");
    auto m = f.mission(v);
    m.crosses_restricted[index_of(Strategy::Region)] = true;
    const auto pass = run_pass(v, m, f.res, f.settings, stub, 1);
    CHECK(pass.verdict.decision == Decision::Autonomous);
    CHECK(pass.review.consensus == Consensus::Escalate);
    CHECK(pass.decision == Decision::RequiresApproval);
}

TEST_CASE("high entropy lets a nearby strategy proceed with notice") {
    const Fixture f;
    StubBackend stub;
    const auto v = f.view("clue-red-hat");
    const auto pass = run_pass(v, f.mission(v, high_entropy_table()), f.res, f.settings, stub, 1);
    CHECK(pass.verdict.high_entropy);
    CHECK(pass.decision == Decision::AutonomousNotify);
}

TEST_CASE("location tags come from the terrain") {
    const Fixture f;
    CHECK(f.view("clue-red-hat").location_tags.front() == "clue-location/shoreline");
    CHECK(f.view("clue-red-cloth").location_tags.front() == "clue-location/forest");
    const auto doll = f.view("clue-doll").location_tags;
    CHECK(std::find(doll.begin(), doll.end(), "clue-location/near-lkp") != doll.end());
}
