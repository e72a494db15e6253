#include "sarguard/events.hpp"

#include "sarguard/error.hpp"
#include "sarguard/guardrails.hpp"

namespace sar {

using nlohmann::json;

json to_json(const MissionEvent& e) {
    return {{"seq", e.seq}, {"tick", e.tick}, {"kind", e.kind}, {"data", e.data}};
}

MissionEvent event_from_json(const json& j) {
    try {
        MissionEvent e;
        e.seq = j.at("seq").get<std::uint64_t>();
        e.tick = j.at("tick").get<int>();
        e.kind = j.at("kind").get<std::string>();
        e.data = j.value("data", json::object());
        return e;
    } catch (const json::exception& ex) {
        throw Error(ErrorCode::parse, std::string("malformed event: ") + ex.what());
    }
}

json belief_to_json(const StrategyBelief& b) {
    json j = json::object();
    for (Strategy s : kAllStrategies) j[std::string(to_string(s))] = b[s];
    return j;
}

StrategyBelief belief_from_json(const json& j) {
    StrategyBelief b;
    for (Strategy s : kAllStrategies) b[s] = j.at(std::string(to_string(s))).get<double>();
    return b;
}

namespace {

void erase_by_id(json& list, const std::string& id) {
    for (auto it = list.begin(); it != list.end(); ++it)
        if (it->value("id", std::string()) == id) {
            list.erase(it);
            return;
        }
}

json& clue_entry(std::map<std::string, json>& clues, const std::string& id) {
    auto [it, inserted] = clues.try_emplace(id, json{{"id", id}, {"traces", json::array()}});
    return it->second;
}

} // namespace

void Projection::apply(const MissionEvent& e) {
    if (e.seq != next_seq_)
        throw Error(ErrorCode::integrity, "event seq " + std::to_string(e.seq) + " where " + std::to_string(next_seq_) + " was expected");
    next_seq_ = e.seq + 1;
    tick_ = e.tick;
    const json& d = e.data;
    const std::string& k = e.kind;

    if (k == "mission_created") {
        mission_id_ = d.value("mission_id", std::string());
        agents_ = d.value("agents", json::array());
    } else if (k == "belief_init" || k == "belief_update") {
        belief_ = belief_from_json(d.at("belief"));
        entropy_ = d.at("entropy").get<double>();
        dominant_ = d.at("dominant").get<std::string>();
    } else if (k == "strategy_active") {
        active_ = d.at("strategy").get<std::string>();
    } else if (k == "tasks_generated") {
        for (const auto& t : d.at("tasks")) pool_[t.at("id").get<std::string>()] = t;
    } else if (k == "tasks_withdrawn") {
        for (const auto& id : d.at("task_ids")) pool_.erase(id.get<std::string>());
    } else if (k == "task_created") {
        pool_[d.at("task").at("id").get<std::string>()] = d.at("task");
    } else if (k == "task_assigned") {
        const std::string id = d.at("task_id").get<std::string>();
        auto it = pool_.find(id);
        json task = it != pool_.end() ? it->second : json{{"id", id}};
        if (it != pool_.end()) pool_.erase(it);
        assigned_[d.at("agent").get<std::string>()] = std::move(task);
    } else if (k == "task_completed" || k == "task_abandoned") {
        assigned_.erase(d.at("agent").get<std::string>());
    } else if (k == "task_preempted") {
        assigned_.erase(d.at("agent").get<std::string>());
        if (d.contains("remaining") && !d["remaining"].is_null())
            pool_[d["remaining"].at("id").get<std::string>()] = d["remaining"];
    } else if (k == "task_reprioritized") {
        for (const auto& id : d.at("task_ids"))
            if (auto it = pool_.find(id.get<std::string>()); it != pool_.end()) it->second["priority"] = d.at("priority");
    } else if (k == "agents") {
        agents_ = d.at("agents");
        coverage_ = d.at("coverage");
    } else if (k == "clue_detected") {
        json& c = clue_entry(clues_, d.at("clue_id").get<std::string>());
        c["location"] = d.at("location");
        c["detected_by"] = d.at("agent");
        c["detected_tick"] = e.tick;
        c["description"] = d.value("description", std::string());
        c["image_ref"] = d.value("image_ref", std::string());
        c["disposition"] = nullptr;
    } else if (k == "trace_pass") {
        json& c = clue_entry(clues_, d.at("clue_id").get<std::string>());
        c["traces"].push_back(d);
    } else if (k == "trace_disposition") {
        json& c = clue_entry(clues_, d.at("clue_id").get<std::string>());
        c["disposition"] = d.at("disposition");
        c["local_action"] = d.at("local_action");
    } else if (k == "approval_requested") {
        json a = d;
        a["created_tick"] = e.tick;
        a["created_seq"] = e.seq;
        pending_.push_back(std::move(a));
    } else if (k == "approval_resolved") {
        erase_by_id(pending_, d.at("approval_id").get<std::string>());
        ++approvals_resolved_;
    } else if (k == "queued_task") {
        queued_.push_back(d.at("task"));
    } else if (k == "person_sighted") {
        person_ = {{"sighted_tick", e.tick}, {"agent", d.at("agent")}, {"location", d.at("location")}};
    } else if (k == "found" || k == "exhausted" || k == "aborted") {
        status_ = k;
        outcome_ = d;
    }

    recent_.push_back(to_json(e));
    if (recent_.size() > kRecentEvents) recent_.pop_front();
}

json Projection::snapshot() const {
    json pool = json::array();
    for (const auto& [id, t] : pool_) pool.push_back(t);
    json assigned = json::object();
    for (const auto& [agent, t] : assigned_) assigned[agent] = t;
    json clues = json::array();
    for (const auto& [id, c] : clues_) clues.push_back(c);
    json recent = json::array();
    for (const auto& r : recent_) recent.push_back(r);
    return {{"schema_version", kReplaySchemaVersion},
            {"mission_id", mission_id_},
            {"seq", next_seq_ == 0 ? json(nullptr) : json(next_seq_ - 1)},
            {"tick", tick_},
            {"status", status_},
            {"outcome", outcome_},
            {"belief", belief_to_json(belief_)},
            {"entropy", entropy_},
            {"dominant", dominant_},
            {"active_strategy", active_},
            {"agents", agents_},
            {"coverage", coverage_},
            {"tasks", {{"pool", pool}, {"assigned", assigned}}},
            {"pending_approvals", pending_},
            {"approvals_resolved", approvals_resolved_},
            {"clues", clues},
            {"queued_tasks", queued_},
            {"person", person_},
            {"recent_events", recent}};
}

} // namespace sar
