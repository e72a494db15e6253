#include "sarguard/pipeline.hpp"

#include "sarguard/error.hpp"
#include "sarguard/tasks.hpp"
#include "sarguard/text.hpp"

#include <algorithm>

namespace sar {

using nlohmann::json;

PipelineResources load_pipeline_resources(const std::string& dir) {
    PipelineResources r;
    r.knowledge = load_knowledge_base_file(dir + "/knowledge_base.json");
    r.advocate_rules = load_advocate_rules_file(dir + "/advocate_rules.json");
    for (int stage : {3, 4, 5}) {
        r.prompts[stage] = read_text_file(dir + "/prompts/stage" + std::to_string(stage) + ".txt");
        r.schemas[stage] = load_stage_schema_file(dir + "/schemas/stage" + std::to_string(stage) + ".json");
    }
    return r;
}

PipelineResources load_pipeline_resources() { return load_pipeline_resources(data_dir()); }

std::vector<std::string> location_tags(Vec2 p, const Scenario& s) {
    std::vector<std::string> tags;
    auto add = [&](std::string t) {
        if (std::find(tags.begin(), tags.end(), t) == tags.end()) tags.push_back(std::move(t));
    };
    const auto& g = s.grid;
    if (auto cell = g.cell_of(p)) {
        const Feature f = g.feature(*cell);
        add("clue-location/" + std::string(to_string(f)));
        if (f != Feature::water) {
            auto ns = g.neighbours(*cell);
            if (std::any_of(ns.begin(), ns.end(), [&](Cell n) { return g.feature(n) == Feature::water; })) {
                add("clue-location/shoreline");
                add("clue-location/water");
            }
        }
        if (g.slope(*cell) > s.constants.steep_slope) add("clue-location/steep");
    }
    if (distance(p, s.profile.lkp) <= s.constants.near_lkp_m) add("clue-location/near-lkp");
    return tags;
}

ClueView view_of(const Clue& clue, const Scenario& scenario, bool inspected) {
    ClueView v;
    v.id = clue.id;
    v.description = clue.description;
    v.image_ref = clue.image_ref;
    v.location = clue.location;
    v.stage1 = clue.stage1;
    v.stage2 = clue.stage2;
    v.has_closeup = clue.closeup.has_value();
    v.inspected = inspected;
    if (inspected && clue.closeup) {
        v.description = clue.closeup->description;
        v.stage1 = clue.closeup->stage1;
        v.stage2 = clue.closeup->stage2;
        v.image_ref = clue.image_ref + "#closeup";
    }
    v.location_tags = clue.location_tags.empty() ? location_tags(clue.location, scenario) : clue.location_tags;
    return v;
}

Classification classify(const ClueView& clue) {
    Classification c;
    auto rank = [](Level l) { return l == Level::High ? 2 : l == Level::Medium ? 1 : 0; };
    if (clue.stage1 && clue.stage1->confidence) {
        c.stage1 = *clue.stage1->confidence;
        c.label = clue.stage1->label;
    } else {
        c.stage1 = Level::Low;
        c.warnings.push_back("stage-1 tag missing; defaulting to Low");
        if (clue.stage1) c.label = clue.stage1->label;
    }
    if (c.stage1 == Level::High) {
        c.stage2_skipped = true;
        c.cv = c.stage1;
        return c;
    }
    if (clue.stage2 && clue.stage2->confidence) {
        c.stage2 = *clue.stage2->confidence;
        if (!clue.stage2->label.empty()) c.label = clue.stage2->label;
    } else {
        c.stage2 = Level::Low;
        c.warnings.push_back("stage-2 tag missing; defaulting to Low");
    }
    c.cv = rank(*c.stage2) > rank(c.stage1) ? *c.stage2 : c.stage1;
    return c;
}

json to_json(const StageOutput& s) {
    json j = {{"stage", s.stage}, {"payload", s.payload}, {"repaired", s.repaired}, {"skipped", s.skipped}};
    if (!s.raw.empty()) j["raw"] = s.raw;
    if (s.regenerations) j["regenerations"] = s.regenerations;
    if (!s.notes.empty()) j["notes"] = s.notes;
    return j;
}

std::string_view to_string(PassOutcome o) noexcept {
    switch (o) {
    case PassOutcome::rejected: return "rejected";
    case PassOutcome::inspect: return "inspect";
    case PassOutcome::decided: return "decided";
    case PassOutcome::escalated: return "escalated";
    }
    return "escalated";
}

json to_json(const PassResult& p) {
    json stages = json::array();
    for (const auto& s : p.stages) stages.push_back(to_json(s));
    json j = {{"pass", p.pass},
              {"outcome", std::string(to_string(p.outcome))},
              {"stages", stages},
              {"relevance", p.relevance},
              {"note", p.note}};
    if (p.outcome == PassOutcome::decided || p.outcome == PassOutcome::inspect) {
        j["assessment"] = {{"relevance", std::string(to_string(p.assessment.relevance))},
                           {"cv_confidence", std::string(to_string(p.assessment.cv_confidence))},
                           {"interp_confidence", std::string(to_string(p.assessment.interp_confidence))},
                           {"strategy", std::string(to_string(p.assessment.strategy))}};
        j["gamma"] = p.gamma;
        j["strategy"] = std::string(to_string(p.strategy));
        j["decision"] = std::string(to_string(p.decision));
        j["verdict"] = to_json(p.verdict);
        j["cost"] = to_json(p.cost);
        j["review"] = to_json(p.review);
    }
    return j;
}

namespace {

json knowledge_context(const std::vector<KnowledgeHit>& hits) {
    json out = json::array();
    for (const auto& h : hits) {
        json e = {{"id", h.entry->id}, {"text", h.entry->text}, {"tags", h.entry->tags}};
        e["suggests_strategy"] = h.entry->suggests_strategy ? json(std::string(display_name(*h.entry->suggests_strategy))) : json(nullptr);
        out.push_back(std::move(e));
    }
    return out;
}

json profile_context(const Profile& p) {
    json items = json::array();
    for (const auto& it : p.items) items.push_back({{"item", it.item}, {"color", it.color}, {"aliases", it.aliases}});
    return {{"description", p.description}, {"age_group", p.age_group}, {"experience", p.experience}, {"items", items}};
}

json belief_context(const StrategyBelief& b) {
    json j = json::object();
    for (Strategy s : kAllStrategies) j[std::string(display_name(s))] = b[s];
    return j;
}

bool touches_restricted(const Scenario& s, const std::vector<Vec2>& path) {
    for (const auto& region : s.airspace) {
        if (!region.restricted) continue;
        for (std::size_t i = 0; i + 1 < path.size(); ++i)
            if (segment_touches(region.area, path[i], path[i + 1])) return true;
        if (path.size() == 1 && contains(region.area, path[0])) return true;
    }
    return false;
}

} // namespace

std::optional<StageOutput> run_stage(int stage, const json& context, Backend& backend, const PipelineResources& res,
                                     const PipelineSettings& settings, std::string& error) {
    auto tmpl = res.prompts.find(stage);
    auto schema = res.schemas.find(stage);
    if (tmpl == res.prompts.end() || schema == res.schemas.end()) {
        error = "no prompt or schema for stage " + std::to_string(stage);
        return std::nullopt;
    }
    std::map<std::string, std::string> values = {{"context_json", context.dump()}, {"stage", std::to_string(stage)}};
    if (context.contains("clue")) values["clue_description"] = context["clue"].value("description", std::string());
    if (context.contains("profile")) values["profile_description"] = context["profile"].value("description", std::string());
    const std::string prompt = render_template(tmpl->second, values);

    std::string raw;
    try {
        raw = backend.complete(prompt);
    } catch (const BackendUnavailable& e) {
        error = e.what();
        return std::nullopt;
    }
    auto regenerate = [&](int attempt, const std::string& problem) -> std::optional<std::string> {
        try {
            return backend.complete("Your previous answer could not be used (" + problem + "). Attempt " +
                                    std::to_string(attempt) + ": reply with a single JSON object only.\n" + prompt);
        } catch (const BackendUnavailable&) {
            return std::nullopt;
        }
    };
    RepairOutcome r = validate_and_repair(raw, schema->second, settings.repair_budget, regenerate);
    if (!r.ok) {
        error = "stage " + std::to_string(stage) + ": " + r.error;
        return std::nullopt;
    }
    StageOutput out;
    out.stage = stage;
    out.payload = std::move(r.payload);
    out.raw = std::move(r.raw);
    out.repaired = r.repaired;
    out.regenerations = r.regenerations;
    out.notes = std::move(r.notes);
    return out;
}

json plan_attributes(const PassResult& pass, const ClueView& clue, const MissionView& mission) {
    const Scenario& s = *mission.scenario;
    const bool inspect = pass.outcome == PassOutcome::inspect;
    bool restricted = false;
    if (inspect) {
        auto orbit = octagon(clue.location, s.cost.inspect_radius_m);
        orbit.insert(orbit.begin(), mission.agent_position);
        restricted = touches_restricted(s, orbit);
    } else {
        restricted = mission.crosses_restricted[index_of(pass.strategy)] ||
                     touches_restricted(s, {mission.agent_position, clue.location});
    }
    bool near_structures = false;
    const auto& g = s.grid;
    for (std::size_t i = 0; i < g.cell_count() && !near_structures; ++i) {
        Cell c = g.cell_at(i);
        near_structures = g.feature(c) == Feature::building && distance(g.center(c), clue.location) <= 50.0;
    }
    json kinds = json::array();
    for (const auto& t : pass.plan.value("tasks", json::array())) kinds.push_back(t.value("kind", std::string()));
    return {{"strategy", std::string(to_string(pass.strategy))},
            {"inspection", inspect},
            {"task_kinds", kinds},
            {"crosses_restricted_airspace", restricted},
            {"night_operation", s.environment.daylight == "night"},
            {"weather", s.environment.weather},
            {"altitude_m", s.constants.cruise_altitude_m},
            {"near_structures", near_structures},
            {"life_risk", s.profile.life_risk},
            {"stores_imagery", true},
            {"relevance", pass.relevance}};
}

void decide(PassResult& pass, const ClueView& clue, const MissionView& mission, const PipelineResources& res,
            const PipelineSettings& settings) {
    pass.plan_attributes = plan_attributes(pass, clue, mission);
    pass.review = run_advocates(pass.plan_attributes, res.advocate_rules);
    StageOutput s6;
    s6.stage = 6;
    s6.payload = to_json(pass.review);
    s6.payload["plan_attributes"] = pass.plan_attributes;
    pass.stages.push_back(std::move(s6));

    const bool inspect = pass.outcome == PassOutcome::inspect;
    const Strategy proposed = inspect ? mission.active : pass.strategy;
    pass.verdict = entropy_verdict(mission.belief, mission.active, proposed, settings.entropy);

    ProposedTask task;
    task.clue_id = clue.id;
    task.image_ref = clue.image_ref;
    task.location = clue.location;
    task.agent_position = mission.agent_position;
    task.alpha = pass.gamma;
    task.on_current_path = !inspect;
    pass.cost = cost_benefit(task, mission.scenario->envelope, settings.cost);

    pass.decision = most_restrictive(pass.verdict.decision, pass.cost.decision);
    if (pass.review.consensus == Consensus::Escalate) pass.decision = Decision::RequiresApproval;

    StageOutput s7;
    s7.stage = 7;
    s7.payload = {{"decision", std::string(to_string(pass.decision))},
                  {"entropy_verdict", to_json(pass.verdict)},
                  {"cost_benefit", to_json(pass.cost)},
                  {"advocates", pass.review.consensus == Consensus::Clear ? "Clear" : "Escalate"}};
    pass.stages.push_back(std::move(s7));
}

PassResult run_pass(const ClueView& clue, const MissionView& mission, const PipelineResources& res,
                    const PipelineSettings& settings, Backend& backend, int pass_no) {
    PassResult pass;
    pass.pass = pass_no;
    const Scenario& s = *mission.scenario;

    pass.classification = classify(clue);
    const auto& cls = pass.classification;
    StageOutput s1;
    s1.stage = 1;
    s1.payload = {{"label", clue.stage1 ? clue.stage1->label : std::string()},
                  {"confidence", std::string(to_string(cls.stage1))},
                  {"warnings", cls.warnings}};
    pass.stages.push_back(std::move(s1));
    StageOutput s2;
    s2.stage = 2;
    s2.skipped = cls.stage2_skipped;
    s2.payload = cls.stage2_skipped ? json{{"reason", "stage-1 confidence is High"}}
                                    : json{{"label", cls.label}, {"confidence", std::string(to_string(*cls.stage2))}};
    s2.payload["cv_confidence"] = std::string(to_string(cls.cv));
    pass.stages.push_back(std::move(s2));

    const std::string text = clue.description + " " + cls.label;
    std::vector<std::string> query = clue.location_tags;
    query.push_back("profile/" + s.profile.age_group);

    json clue_ctx = {{"id", clue.id},
                     {"description", clue.description},
                     {"label", cls.label},
                     {"cv_confidence", std::string(to_string(cls.cv))},
                     {"location_tag", clue.location_tags.empty() ? std::string() : clue.location_tags.front()},
                     {"location_tags", clue.location_tags},
                     {"has_closeup", clue.has_closeup},
                     {"inspected", clue.inspected}};

    std::string error;
    auto escalate = [&](std::string why) {
        pass.outcome = PassOutcome::escalated;
        pass.note = std::move(why);
        return pass;
    };

    // Stage 3: relevance.
    json ctx3 = {{"stage", 3},
                 {"clue", clue_ctx},
                 {"profile", profile_context(s.profile)},
                 {"knowledge", knowledge_context(res.knowledge.retrieve(query, text, settings.top_k, 3))}};
    auto out3 = run_stage(3, ctx3, backend, res, settings, error);
    if (!out3) return escalate(error);
    pass.relevance = out3->payload.at("relevance").get<std::string>();
    pass.stages.push_back(std::move(*out3));
    if (pass.relevance == "None") {
        pass.outcome = PassOutcome::rejected;
        pass.note = "clue judged not relevant";
        return pass;
    }

    // Stage 4: tactical implications.
    json ctx4 = {{"stage", 4},
                 {"clue", clue_ctx},
                 {"relevance", pass.relevance},
                 {"knowledge", knowledge_context(res.knowledge.retrieve(query, text, settings.top_k, 4))}};
    auto out4 = run_stage(4, ctx4, backend, res, settings, error);
    if (!out4) return escalate(error);
    const Level interp = *parse_level(out4->payload.at("interp_confidence").get<std::string>());
    pass.stages.push_back(std::move(*out4));

    // Stage 5: strategic plan.
    json ctx5 = {{"stage", 5},
                 {"clue", clue_ctx},
                 {"relevance", pass.relevance},
                 {"cv_confidence", std::string(to_string(cls.cv))},
                 {"interp_confidence", std::string(to_string(interp))},
                 {"current_strategy", std::string(display_name(mission.active))},
                 {"belief", belief_context(mission.belief)},
                 {"knowledge", knowledge_context(res.knowledge.retrieve(query, text, settings.top_k, 5))}};
    auto out5 = run_stage(5, ctx5, backend, res, settings, error);
    if (!out5) return escalate(error);
    pass.plan = out5->payload;
    pass.stages.push_back(std::move(*out5));
    auto strategy = parse_strategy(pass.plan.at("strategy").get<std::string>());
    if (!strategy) return escalate("stage 5 named an unknown strategy");

    pass.strategy = *strategy;
    pass.assessment = {*parse_level(pass.relevance), cls.cv, interp, pass.strategy};
    pass.gamma = compute_alpha(pass.assessment, settings.hp);
    pass.outcome = pass.plan.value("inspect", false) ? PassOutcome::inspect : PassOutcome::decided;

    decide(pass, clue, mission, res, settings);
    return pass;
}

} // namespace sar
