#include "sarguard/engine.hpp"

#include "sarguard/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace sar {

using nlohmann::json;

std::string_view to_string(CommandKind k) noexcept {
    switch (k) {
    case CommandKind::approve: return "approve";
    case CommandKind::reject: return "reject";
    case CommandKind::modify: return "modify";
    case CommandKind::boost: return "boost";
    case CommandKind::reduce: return "reduce";
    case CommandKind::reset: return "reset";
    case CommandKind::expand_region: return "expand-region";
    }
    return "approve";
}

OperatorCommand command_from_json(const json& j) {
    if (!j.is_object()) throw Error(ErrorCode::validation, "operator action must be a JSON object");
    OperatorCommand c;
    const std::string d = j.value("decision", std::string());
    if (d == "approve") c.kind = CommandKind::approve;
    else if (d == "reject") c.kind = CommandKind::reject;
    else if (d == "modify") c.kind = CommandKind::modify;
    else if (d == "boost") c.kind = CommandKind::boost;
    else if (d == "reduce") c.kind = CommandKind::reduce;
    else if (d == "reset") c.kind = CommandKind::reset;
    else if (d == "expand-region") c.kind = CommandKind::expand_region;
    else throw Error(ErrorCode::validation, "unknown decision '" + d + "'");
    try {
        c.approval_id = j.value("approval_id", std::string());
        if (auto s = j.find("strategy"); s != j.end() && !s->is_null()) c.strategy = strategy_from_string(s->get<std::string>());
        c.gamma = j.value("gamma", 0.0);
        if (auto r = j.find("radius_m"); r != j.end() && !r->is_null()) c.radius_m = r->get<double>();
        c.operator_id = j.value("operator", std::string("operator"));
        c.note = j.value("note", std::string());
    } catch (const json::exception& e) {
        throw Error(ErrorCode::validation, std::string("malformed operator action: ") + e.what());
    }
    return c;
}

json to_json(const OperatorCommand& c) {
    json j = {{"decision", std::string(to_string(c.kind))}, {"operator", c.operator_id}};
    if (!c.approval_id.empty()) j["approval_id"] = c.approval_id;
    if (c.strategy) j["strategy"] = std::string(to_string(*c.strategy));
    if (c.kind == CommandKind::boost || c.kind == CommandKind::reduce) j["gamma"] = c.gamma;
    if (c.radius_m) j["radius_m"] = *c.radius_m;
    if (!c.note.empty()) j["note"] = c.note;
    return j;
}

std::string_view to_string(AgentMode m) noexcept {
    switch (m) {
    case AgentMode::idle: return "idle";
    case AgentMode::enroute: return "enroute";
    case AgentMode::searching: return "searching";
    case AgentMode::inspecting: return "inspecting";
    case AgentMode::returning: return "returning";
    case AgentMode::landed: return "landed";
    }
    return "idle";
}

json to_json(const AgentState& a) {
    return {{"id", a.id},
            {"position", {a.position.x, a.position.y}},
            {"altitude_m", a.altitude_m},
            {"battery", a.battery},
            {"mode", std::string(to_string(a.mode))},
            {"task", a.task ? json(a.task->id) : json(nullptr)}};
}

namespace {

json point(Vec2 p) { return json::array({p.x, p.y}); }

bool airborne(const AgentState& a) { return a.mode != AgentMode::landed; }

bool available(const AgentState& a) { return a.mode == AgentMode::idle && !a.task; }

double path_distance(const Task& t, Vec2 p) {
    double best = std::numeric_limits<double>::infinity();
    for (Vec2 q : t.path) best = std::min(best, distance(p, q));
    return best;
}

} // namespace

MissionEngine::MissionEngine(Scenario scenario, std::shared_ptr<const BayesNet> net,
                             std::shared_ptr<const PipelineResources> res, std::unique_ptr<Backend> backend,
                             std::string mission_id, std::optional<std::uint64_t> seed)
    : scenario_(std::move(scenario)),
      net_(std::move(net)),
      res_(std::move(res)),
      backend_(std::move(backend)),
      mission_id_(std::move(mission_id)),
      seed_(seed.value_or(scenario_.seed)),
      rng_(seed_),
      coverage_map_(scenario_.grid) {
    if (!net_ || !res_) throw Error(ErrorCode::validation, "engine needs a network and pipeline resources");
    if (!backend_) backend_ = std::make_unique<StubBackend>();
    backend_name_ = backend_->name();
    settings_.hp = scenario_.hyperparams;
    settings_.entropy = scenario_.entropy;
    settings_.cost = scenario_.cost;

    eligible_mask_.assign(scenario_.grid.cell_count(), 0);
    for (Strategy s : kAllStrategies) rebuild_eligibility(s);
    clues_.resize(scenario_.clues.size());

    for (int i = 0; i < scenario_.agent_count; ++i) {
        char id[16];
        std::snprintf(id, sizeof id, "uav-%02d", i + 1);
        AgentState a;
        a.id = id;
        a.position = scenario_.envelope.home;
        a.altitude_m = scenario_.constants.cruise_altitude_m;
        agents_.push_back(std::move(a));
    }

    json agents = json::array();
    for (const auto& a : agents_) agents.push_back(to_json(a));
    const auto& g = scenario_.grid;
    emit("mission_created", {{"mission_id", mission_id_},
                             {"scenario_id", scenario_.id},
                             {"scenario_name", scenario_.name},
                             {"seed", seed_},
                             {"backend", backend_name_},
                             {"grid", {{"width", g.width()}, {"height", g.height()}, {"cell_size_m", g.cell_size()}}},
                             {"home", point(scenario_.envelope.home)},
                             {"lkp", point(scenario_.profile.lkp)},
                             {"profile", scenario_.profile.description},
                             {"agents", agents},
                             {"settings", {{"hyperparams", to_json(settings_.hp)},
                                           {"entropy", {{"high_entropy_threshold", settings_.entropy.high_entropy_threshold},
                                                        {"delta_threshold", settings_.entropy.delta_threshold}}},
                                           {"approval_timeout_ticks", scenario_.constants.approval_timeout_ticks},
                                           {"preempt_on_switch", scenario_.constants.preempt_on_switch}}}});

    const auto evidence = derive_evidence(scenario_);
    belief_ = infer_strategies(*net_, evidence);
    json init = belief_fields();
    init["evidence"] = evidence;
    emit("belief_init", std::move(init));

    for (Strategy s : kAllStrategies) {
        auto tasks = generate_tasks(s, scenario_);
        json list = json::array();
        for (const auto& t : tasks) {
            list.push_back(to_json(t));
            for (const auto& region : scenario_.airspace)
                for (std::size_t i = 0; region.restricted && i + 1 < t.path.size(); ++i)
                    if (segment_touches(region.area, t.path[i], t.path[i + 1])) crosses_restricted_[index_of(s)] = true;
        }
        json data = {{"strategy", std::string(to_string(s))},
                     {"tasks", list},
                     {"eligible_cells", eligible_[index_of(s)].size()}};
        if (tasks.empty()) data["note"] = "no eligible cells; coverage counts as complete";
        emit("tasks_generated", std::move(data));
        for (auto& t : tasks) pool_.push_back(std::move(t));
    }

    active_ = belief_.dominant();
    last_dominant_ = active_;
    emit("strategy_active", {{"strategy", std::string(to_string(active_))}, {"previous", nullptr}, {"reason", "init"}});
}

// ---------------------------------------------------------------------------
// Event plumbing

const MissionEvent& MissionEngine::emit(const std::string& kind, json data) {
    MissionEvent e{events_.size(), tick_, kind, std::move(data)};
    projection_.apply(e);
    events_.push_back(std::move(e));
    if (listener_) listener_(events_.back());
    return events_.back();
}

json MissionEngine::belief_fields() const {
    return {{"belief", belief_to_json(belief_)},
            {"entropy", normalized_entropy(belief_)},
            {"dominant", std::string(to_string(belief_.dominant()))}};
}

double MissionEngine::coverage(Strategy s) const {
    const auto& cells = eligible_[index_of(s)];
    if (cells.empty()) return 1.0;
    return static_cast<double>(covered_count_[index_of(s)]) / static_cast<double>(cells.size());
}

void MissionEngine::rebuild_eligibility(Strategy s) {
    const std::uint8_t bit = static_cast<std::uint8_t>(1u << index_of(s));
    for (auto& m : eligible_mask_) m &= static_cast<std::uint8_t>(~bit);
    eligible_[index_of(s)] = eligible_cells(s, scenario_);
    std::size_t covered = 0;
    for (auto i : eligible_[index_of(s)]) {
        eligible_mask_[i] |= bit;
        covered += coverage_map_.covered(i) ? 1 : 0;
    }
    covered_count_[index_of(s)] = covered;
}

std::size_t MissionEngine::clue_index(const std::string& id) const {
    for (std::size_t i = 0; i < scenario_.clues.size(); ++i)
        if (scenario_.clues[i].id == id) return i;
    throw Error(ErrorCode::not_found, "unknown clue '" + id + "'");
}

AgentState* MissionEngine::agent_by_id(const std::string& id) {
    for (auto& a : agents_)
        if (a.id == id) return &a;
    return nullptr;
}

// ---------------------------------------------------------------------------
// Tick

void MissionEngine::step() {
    if (terminal()) return;
    ++tick_;
    drain_commands();
    if (terminal()) return;
    expire_approvals();
    assign_tasks();

    std::vector<std::pair<std::string, Task>> completed;
    move_agents(completed);

    sense();
    for (auto& [agent_id, task] : completed) {
        if (task.kind != TaskKind::circle_inspect || task.clue_id.empty()) continue;
        const std::size_t ci = clue_index(task.clue_id);
        if (clues_[ci].closed) continue;
        run_clue_pass(ci, *agent_by_id(agent_id), clues_[ci].passes + 1);
    }
    sight_person();
    negative_updates();
    dominance_check();
    enforce_envelope();

    json agents = json::array();
    for (const auto& a : agents_) agents.push_back(to_json(a));
    json cov = json::object();
    for (Strategy s : kAllStrategies) cov[std::string(to_string(s))] = coverage(s);
    emit("agents", {{"agents", agents}, {"coverage", cov}});

    check_terminal();
}

void MissionEngine::move_agents(std::vector<std::pair<std::string, Task>>& completed) {
    const double tick_s = scenario_.constants.tick_s;
    for (auto& a : agents_) {
        if (!airborne(a)) continue;
        double budget = scenario_.constants.cruise_speed_mps * tick_s;
        if (a.mode == AgentMode::returning) {
            const Vec2 home = scenario_.envelope.home;
            const double d = distance(a.position, home);
            if (d <= budget) {
                a.position = home;
                a.mode = AgentMode::landed;
                a.altitude_m = 0.0;
                emit("agent_landed", {{"agent", a.id}, {"battery", a.battery}});
            } else {
                a.position = a.position + (home - a.position) * (budget / d);
            }
        } else if (a.task) {
            const auto& path = a.task->path;
            while (budget > 0.0 && a.waypoint < path.size()) {
                const Vec2 target = path[a.waypoint];
                const double d = distance(a.position, target);
                if (d <= budget) {
                    a.position = target;
                    budget -= d;
                    ++a.waypoint;
                } else {
                    a.position = a.position + (target - a.position) * (budget / d);
                    budget = 0.0;
                }
            }
            if (a.waypoint >= path.size()) {
                Task done = std::move(*a.task);
                a.task.reset();
                a.waypoint = 0;
                a.mode = AgentMode::idle;
                emit("task_completed", {{"agent", a.id}, {"task_id", done.id}, {"strategy", std::string(to_string(done.strategy))}});
                completed.emplace_back(a.id, std::move(done));
            } else if (a.waypoint == 0) {
                a.mode = AgentMode::enroute;
            } else {
                a.mode = a.task->kind == TaskKind::circle_inspect ? AgentMode::inspecting : AgentMode::searching;
            }
        }
        if (a.mode != AgentMode::landed) {
            a.battery = std::max(0.0, a.battery - scenario_.constants.battery_drain_per_s * tick_s);
            observe_coverage(a);
        }
    }
}

void MissionEngine::observe_coverage(const AgentState& a) {
    for (auto i : coverage_map_.observe(a.position, scenario_.constants.footprint_radius_m)) {
        const std::uint8_t m = eligible_mask_[i];
        for (Strategy s : kAllStrategies)
            if (m & (1u << index_of(s))) ++covered_count_[index_of(s)];
    }
}

void MissionEngine::sense() {
    const double r = scenario_.constants.footprint_radius_m;
    const double miss = scenario_.constants.miss_probability;
    for (auto& a : agents_) {
        if (!airborne(a)) continue;
        for (std::size_t ci = 0; ci < scenario_.clues.size(); ++ci) {
            if (clues_[ci].detected) continue;
            const Clue& clue = scenario_.clues[ci];
            if (distance(a.position, clue.location) > r) continue;
            if (miss > 0.0 && static_cast<double>(rng_() >> 11) * 0x1.0p-53 < miss) continue;
            clues_[ci].detected = true;
            emit("clue_detected", {{"clue_id", clue.id},
                                   {"agent", a.id},
                                   {"location", point(clue.location)},
                                   {"description", clue.description},
                                   {"image_ref", clue.image_ref}});
            run_clue_pass(ci, a, 1);
        }
    }
}

void MissionEngine::sight_person() {
    if (person_found_ || person_rejected_ || person_pending_) return;
    for (const auto& a : agents_) {
        if (!airborne(a) || distance(a.position, scenario_.person.location) > scenario_.constants.footprint_radius_m)
            continue;
        person_pending_ = true;
        emit("person_sighted", {{"agent", a.id}, {"location", point(scenario_.person.location)}});
        request_approval("clue-relevance", "sighting", "", 0,
                         {{"person", true},
                          {"agent", a.id},
                          {"location", point(scenario_.person.location)},
                          {"description", scenario_.person.description},
                          {"rationale", "camera detection matching the subject's description; confirm before ending the search"}});
        return;
    }
}

void MissionEngine::negative_updates() {
    for (Strategy s : kAllStrategies) {
        tracker_.observe(s, coverage(s));
        auto nu = apply_negative_update(belief_, s, tracker_, settings_.hp);
        if (!nu.applied) continue;
        belief_ = nu.belief;
        json data = belief_fields();
        data.update({{"kind", "negative"},
                     {"source", "coverage"},
                     {"target", std::string(to_string(s))},
                     {"gamma", -nu.beta},
                     {"coverage", tracker_.fraction(s)},
                     {"threshold", settings_.hp.coverage_threshold}});
        emit("belief_update", std::move(data));
    }
}

void MissionEngine::dominance_check() {
    const Strategy dom = belief_.dominant();
    if (dom == last_dominant_) return;
    last_dominant_ = dom;
    if (dom == active_) return;
    // Moving onto the dominant strategy is autonomous in both entropy regimes.
    const auto verdict = entropy_verdict(belief_, active_, dom, settings_.entropy);
    if (verdict.decision == Decision::Autonomous || verdict.decision == Decision::AutonomousNotify) {
        switch_active(dom, "dominance", {{"verdict", to_json(verdict)}});
        if (verdict.decision == Decision::AutonomousNotify)
            emit("notify", {{"reason", "strategy-switch"},
                            {"strategy", std::string(to_string(dom))},
                            {"message", verdict.rationale}});
    } else {
        request_approval("strategy-switch", "dominance", "", 0,
                         {{"proposed_strategy", std::string(to_string(dom))}, {"verdict", to_json(verdict)},
                          {"rationale", verdict.rationale}});
    }
}

void MissionEngine::enforce_envelope() {
    const auto& env = scenario_.envelope;
    for (auto& a : agents_) {
        if (!airborne(a)) continue;
        bool clamped_position = false;
        for (int round = 0; round < 4; ++round) {
            EnvelopeAgentState st;
            st.position = a.position;
            st.altitude_m = a.altitude_m;
            st.battery = a.battery;
            st.returning = a.mode == AgentMode::returning;
            if (a.task && a.waypoint < a.task->path.size()) st.waypoint = a.task->path[a.waypoint];
            auto v = check_envelope(st, env);
            if (!v) break;
            json data = {{"agent", a.id},
                         {"constraint", std::string(to_string(v->constraint))},
                         {"action", std::string(to_string(v->action))},
                         {"detail", v->detail}};
            if (v->corrected_point) data["corrected_point"] = point(*v->corrected_point);
            emit("envelope_enforced", std::move(data));
            switch (v->action) {
            case EnforcedAction::return_home:
                if (a.task) preempt(a, "battery reserve");
                a.mode = AgentMode::returning;
                break;
            case EnforcedAction::clamp_altitude: a.altitude_m = v->corrected_altitude; break;
            case EnforcedAction::clamp_position:
                a.position = *v->corrected_point;
                clamped_position = true;
                break;
            case EnforcedAction::clamp_waypoint: a.task->path[a.waypoint] = *v->corrected_point; break;
            case EnforcedAction::reject_task: abandon(a, "waypoint beyond max range"); break;
            }
        }
        a.clamp_streak = clamped_position ? a.clamp_streak + 1 : 0;
        if (a.clamp_streak >= 5 && a.task) {
            abandon(a, "repeatedly pushed back into the envelope");
            a.clamp_streak = 0;
        }
    }
}

void MissionEngine::check_terminal() {
    if (terminal()) return;
    const bool all_landed = std::all_of(agents_.begin(), agents_.end(), [](const AgentState& a) { return a.mode == AgentMode::landed; });
    const bool working = std::any_of(agents_.begin(), agents_.end(), [](const AgentState& a) { return a.task.has_value(); });
    if (tick_ >= scenario_.constants.ticks_max) {
        finish("exhausted", {{"reason", "tick budget reached"}});
    } else if (all_landed) {
        finish("exhausted", {{"reason", "all agents landed"}});
    } else if (pool_.empty() && !working && pending_.empty() && commands_.empty()) {
        finish("exhausted", {{"reason", "no tasks left"}});
    }
}

void MissionEngine::finish(const std::string& outcome, json data) {
    std::vector<PendingApproval> open;
    for (const auto& [id, p] : pending_) open.push_back(p);
    for (auto& p : open) resolve(p, "expired", "mission-end", nullptr);
    data["belief"] = belief_to_json(belief_);
    data["dominant"] = std::string(to_string(belief_.dominant()));
    data["active_strategy"] = std::string(to_string(active_));
    outcome_ = outcome;
    emit(outcome, std::move(data));
}

void MissionEngine::abort(const std::string& reason) {
    if (terminal()) throw Error(ErrorCode::invalid_transition, "mission already ended (" + outcome_ + ")");
    commands_.clear();
    finish("aborted", {{"reason", reason}});
}

// ---------------------------------------------------------------------------
// Planning

void MissionEngine::assign_tasks() {
    // Directed tasks go to their agent; if it can no longer fly they become open.
    for (auto it = pool_.begin(); it != pool_.end();) {
        if (it->directed_agent.empty()) {
            ++it;
            continue;
        }
        AgentState* a = agent_by_id(it->directed_agent);
        if (a && available(*a)) {
            Task t = std::move(*it);
            it = pool_.erase(it);
            assign(*a, std::move(t), "directed");
        } else {
            if (!a || a->mode == AgentMode::returning || a->mode == AgentMode::landed) it->directed_agent.clear();
            ++it;
        }
    }

    std::array<int, kStrategyCount> rank{};
    {
        std::vector<Strategy> order(kAllStrategies.begin(), kAllStrategies.end());
        std::stable_sort(order.begin(), order.end(), [&](Strategy x, Strategy y) {
            if (belief_[x] != belief_[y]) return belief_[x] > belief_[y];
            return to_string(x) < to_string(y);
        });
        int r = 2;
        for (Strategy s : order) rank[index_of(s)] = s == active_ ? 1 : r++;
    }

    for (;;) {
        std::vector<AgentState*> idle;
        for (auto& a : agents_)
            if (available(a)) idle.push_back(&a);
        if (idle.empty()) return;

        std::size_t best = pool_.size();
        std::tuple<int, int, double, std::string> best_key;
        for (std::size_t i = 0; i < pool_.size(); ++i) {
            const Task& t = pool_[i];
            if (!t.directed_agent.empty() || t.path.empty()) continue;
            const int tier = t.priority < 0 ? 0 : rank[index_of(t.strategy)];
            double near = std::numeric_limits<double>::infinity();
            for (auto* a : idle) near = std::min(near, distance(a->position, t.path.front()));
            std::tuple<int, int, double, std::string> key{tier, t.priority, near, t.id};
            if (best == pool_.size() || key < best_key) {
                best = i;
                best_key = std::move(key);
            }
        }
        if (best == pool_.size()) return;

        Task t = std::move(pool_[best]);
        pool_.erase(pool_.begin() + static_cast<std::ptrdiff_t>(best));
        AgentState* pick = idle.front();
        for (auto* a : idle)
            if (distance(a->position, t.path.front()) < distance(pick->position, t.path.front())) pick = a;
        const std::string reason = t.priority < 0 ? "urgent" : t.strategy == active_ ? "active-strategy" : "fallback";
        assign(*pick, std::move(t), reason);
    }
}

void MissionEngine::assign(AgentState& agent, Task task, const std::string& reason) {
    emit("task_assigned", {{"agent", agent.id},
                           {"task_id", task.id},
                           {"strategy", std::string(to_string(task.strategy))},
                           {"kind", std::string(to_string(task.kind))},
                           {"reason", reason}});
    agent.task = std::move(task);
    agent.waypoint = 0;
    agent.mode = AgentMode::enroute;
}

void MissionEngine::preempt(AgentState& agent, const std::string& reason) {
    if (!agent.task) return;
    Task rest = std::move(*agent.task);
    agent.task.reset();
    const std::string id = rest.id;
    if (agent.waypoint > 0) rest.path.erase(rest.path.begin(), rest.path.begin() + static_cast<std::ptrdiff_t>(std::min(agent.waypoint, rest.path.size())));
    agent.waypoint = 0;
    if (agent.mode != AgentMode::returning && agent.mode != AgentMode::landed) agent.mode = AgentMode::idle;
    rest.directed_agent.clear();
    json remaining = nullptr;
    if (!rest.path.empty()) {
        remaining = to_json(rest);
        pool_.push_back(std::move(rest));
    }
    emit("task_preempted", {{"agent", agent.id}, {"task_id", id}, {"reason", reason}, {"remaining", remaining}});
}

void MissionEngine::abandon(AgentState& agent, const std::string& reason) {
    if (!agent.task) return;
    const std::string id = agent.task->id;
    const std::string clue = agent.task->clue_id;
    agent.task.reset();
    agent.waypoint = 0;
    if (agent.mode != AgentMode::returning) agent.mode = AgentMode::idle;
    emit("task_abandoned", {{"agent", agent.id}, {"task_id", id}, {"reason", reason}});
    if (!clue.empty()) {
        const std::size_t ci = clue_index(clue);
        if (!clues_[ci].closed && clues_[ci].last) {
            record_queued(ci, *clues_[ci].last);
            finalize(ci, clues_[ci].passes, "queued", "defer-to-human", {{"reason", "inspection could not be flown: " + reason}});
        }
    }
}

void MissionEngine::switch_active(Strategy s, const std::string& reason, json extra) {
    if (s == active_) return;
    const Strategy previous = active_;
    active_ = s;
    json data = {{"strategy", std::string(to_string(s))},
                 {"previous", std::string(to_string(previous))},
                 {"reason", reason},
                 {"dominant", std::string(to_string(belief_.dominant()))},
                 {"entropy", normalized_entropy(belief_)}};
    data.update(extra);
    emit("strategy_active", std::move(data));
    if (!scenario_.constants.preempt_on_switch) return;
    for (auto& a : agents_)
        if (a.task && a.task->priority >= 0 && a.task->directed_agent.empty() && a.task->strategy != s)
            preempt(a, "strategy switch");
}

void MissionEngine::request_swarm_help(Strategy s, Vec2 near, const std::string& clue_id) {
    std::vector<std::pair<double, std::size_t>> candidates;
    for (std::size_t i = 0; i < pool_.size(); ++i)
        if (pool_[i].strategy == s && pool_[i].priority >= 0) candidates.emplace_back(path_distance(pool_[i], near), i);
    std::sort(candidates.begin(), candidates.end(), [&](const auto& x, const auto& y) {
        if (x.first != y.first) return x.first < y.first;
        return pool_[x.second].id < pool_[y.second].id;
    });
    json ids = json::array();
    for (std::size_t k = 0; k < candidates.size() && k < 2; ++k) {
        pool_[candidates[k].second].priority = -1;
        ids.push_back(pool_[candidates[k].second].id);
    }
    if (!ids.empty()) emit("task_reprioritized", {{"task_ids", ids}, {"priority", -1}, {"clue_id", clue_id}});
}

// ---------------------------------------------------------------------------
// Pipeline

MissionView MissionEngine::mission_view(const AgentState& agent) const {
    MissionView v;
    v.scenario = &scenario_;
    v.belief = belief_;
    v.active = active_;
    v.agent_id = agent.id;
    v.agent_position = agent.position;
    v.crosses_restricted = crosses_restricted_;
    return v;
}

void MissionEngine::run_clue_pass(std::size_t ci, const AgentState& agent, int pass_no) {
    const Clue& clue = scenario_.clues[ci];
    const ClueView view = view_of(clue, scenario_, pass_no > 1);
    PassResult pass = run_pass(view, mission_view(agent), *res_, settings_, *backend_, pass_no);
    clues_[ci].passes = pass_no;
    clues_[ci].last = pass;

    json data = to_json(pass);
    data["clue_id"] = clue.id;
    data["agent"] = agent.id;
    data["image_ref"] = view.image_ref;
    data["description"] = view.description;
    emit("trace_pass", std::move(data));
    handle_pass(ci, agent, pass);
}

void MissionEngine::handle_pass(std::size_t ci, const AgentState& agent, const PassResult& pass) {
    const Clue& clue = scenario_.clues[ci];
    auto context = [&] {
        json plan_tasks = pass.plan.value("tasks", json::array());
        return json{{"clue_id", clue.id},
                    {"pass", pass.pass},
                    {"image_ref", pass.pass > 1 ? clue.image_ref + "#closeup" : clue.image_ref},
                    {"location", point(clue.location)},
                    {"description", clue.description},
                    {"relevance", pass.relevance},
                    {"gamma", pass.gamma},
                    {"proposed_strategy", std::string(to_string(pass.strategy))},
                    {"current_strategy", std::string(to_string(active_))},
                    {"plan", pass.plan},
                    {"rationale", pass.plan.value("rationale", pass.verdict.rationale)},
                    {"decision", std::string(to_string(pass.decision))},
                    {"verdict", to_json(pass.verdict)},
                    {"cost", to_json(pass.cost)},
                    {"concerns", to_json(pass.review)}};
    };

    switch (pass.outcome) {
    case PassOutcome::rejected: finalize(ci, pass.pass, "rejected", "do-nothing"); return;
    case PassOutcome::escalated: {
        json ctx = context();
        ctx["note"] = pass.note;
        request_approval("clue-relevance", "escalated", clue.id, pass.pass, std::move(ctx));
        finalize(ci, pass.pass, "escalated", "defer-to-human", {{"reason", pass.note}});
        return;
    }
    case PassOutcome::inspect: {
        if (pass.decision == Decision::Defer) {
            record_queued(ci, pass);
            request_approval("queued-task", "inspect", clue.id, pass.pass, context());
        } else if (pass.decision == Decision::RequiresApproval) {
            const bool advocates = pass.review.consensus == Consensus::Escalate;
            request_approval(advocates ? "advocate-escalation" : "clue-relevance", "inspect", clue.id, pass.pass, context());
        } else {
            if (pass.decision == Decision::AutonomousNotify)
                emit("notify", {{"reason", "inspection"}, {"clue_id", clue.id}, {"message", pass.verdict.rationale}});
            dispatch_inspection(ci, agent.id, Provenance::pipeline);
        }
        return;
    }
    case PassOutcome::decided: break;
    }

    if (pass.decision == Decision::RequiresApproval) {
        std::string kind = "clue-relevance";
        if (pass.review.consensus == Consensus::Escalate) kind = "advocate-escalation";
        else if (pass.strategy != active_) kind = "strategy-switch";
        request_approval(kind, "decided", clue.id, pass.pass, context());
    } else if (pass.decision == Decision::Defer) {
        record_queued(ci, pass);
        request_approval("queued-task", "decided", clue.id, pass.pass, context());
    } else {
        if (pass.strategy != active_) {
            switch_active(pass.strategy, "pipeline", {{"clue_id", clue.id}, {"verdict", to_json(pass.verdict)}});
            if (pass.decision == Decision::AutonomousNotify)
                emit("notify", {{"reason", "strategy-switch"},
                                {"strategy", std::string(to_string(pass.strategy))},
                                {"clue_id", clue.id},
                                {"message", pass.verdict.rationale}});
        }
        // The action is autonomous; accepting the clue into the belief still waits for the operator.
        request_approval("clue-relevance", "decided", clue.id, pass.pass, context());
    }
}

void MissionEngine::dispatch_inspection(std::size_t ci, const std::string& directed_agent, Provenance provenance) {
    const Clue& clue = scenario_.clues[ci];
    char id[32];
    std::snprintf(id, sizeof id, "inspect-%03d", ++task_counter_);
    Task t = make_inspection_task(id, clue.id, clue.location, settings_.cost.inspect_radius_m, active_, provenance,
                                  directed_agent);
    emit("task_created", {{"task", to_json(t)}, {"clue_id", clue.id}, {"reason", "close-up inspection"}});
    if (AgentState* a = directed_agent.empty() ? nullptr : agent_by_id(directed_agent); a && airborne(*a) && a->mode != AgentMode::returning) {
        preempt(*a, "inspection");
        assign(*a, std::move(t), "directed");
    } else {
        t.directed_agent.clear();
        pool_.push_back(std::move(t));
    }
}

std::string MissionEngine::request_approval(const std::string& kind, const std::string& purpose,
                                            const std::string& clue_id, int pass, json context) {
    char id[32];
    std::snprintf(id, sizeof id, "appr-%04d", ++approval_counter_);
    PendingApproval p;
    p.id = id;
    p.kind = kind;
    p.purpose = purpose;
    p.clue_id = clue_id;
    p.pass = pass;
    p.created_tick = tick_;
    p.timeout_tick = tick_ + scenario_.constants.approval_timeout_ticks;
    p.context = std::move(context);
    emit("approval_requested", {{"approval_id", p.id},
                                {"kind", p.kind},
                                {"purpose", p.purpose},
                                {"clue_id", p.clue_id},
                                {"pass", p.pass},
                                {"timeout_tick", p.timeout_tick},
                                {"context", p.context}});
    pending_.emplace(p.id, std::move(p));
    return id;
}

void MissionEngine::record_queued(std::size_t ci, const PassResult& pass) {
    if (clues_[ci].queued_record) return;
    clues_[ci].queued_record = true;
    const Clue& clue = scenario_.clues[ci];
    QueuedTask q = pass.cost.queued.value_or(QueuedTask{"queued-" + clue.id, clue.id, clue.image_ref, clue.location,
                                                        pass.cost.cost_min, pass.cost.benefit_min, "awaiting operator"});
    emit("queued_task", {{"task", to_json(q)}});
}

void MissionEngine::finalize(std::size_t ci, int pass, const std::string& disposition, const std::string& local_action,
                             json extra) {
    if (clues_[ci].closed) return;
    clues_[ci].closed = true;
    json data = {{"clue_id", scenario_.clues[ci].id}, {"pass", pass}, {"disposition", disposition}, {"local_action", local_action}};
    data.update(extra);
    emit("trace_disposition", std::move(data));
}

void MissionEngine::apply_pipeline_update(std::size_t ci, const PassResult& pass, Strategy target, bool modified,
                                          const std::string& approval_id) {
    const Clue& clue = scenario_.clues[ci];
    belief_ = apply_positive_update(belief_, {pass.gamma, target});
    json data = belief_fields();
    data.update({{"kind", "positive"},
                 {"source", "pipeline"},
                 {"target", std::string(to_string(target))},
                 {"gamma", pass.gamma},
                 {"clue_id", clue.id},
                 {"pass", pass.pass},
                 {"approval_id", approval_id},
                 {"modified", modified},
                 {"assessment", {{"relevance", std::string(to_string(pass.assessment.relevance))},
                                 {"cv_confidence", std::string(to_string(pass.assessment.cv_confidence))},
                                 {"interp_confidence", std::string(to_string(pass.assessment.interp_confidence))},
                                 {"strategy", std::string(to_string(pass.assessment.strategy))}}}});
    emit("belief_update", std::move(data));
    finalize(ci, pass.pass, "updated_belief", "request-swarm-help",
             {{"gamma", pass.gamma}, {"target", std::string(to_string(target))}, {"approval_id", approval_id}});
    if (target != active_) switch_active(target, "approval", {{"approval_id", approval_id}, {"clue_id", clue.id}});
    request_swarm_help(target, clue.location, clue.id);
}

// ---------------------------------------------------------------------------
// Operator

void MissionEngine::submit(OperatorCommand cmd) {
    if (terminal()) throw Error(ErrorCode::invalid_transition, "mission already ended (" + outcome_ + ")");
    switch (cmd.kind) {
    case CommandKind::approve:
    case CommandKind::reject:
    case CommandKind::modify: {
        if (resolved_.count(cmd.approval_id)) throw Error(ErrorCode::conflict, "approval '" + cmd.approval_id + "' is already resolved");
        auto it = pending_.find(cmd.approval_id);
        if (it == pending_.end()) throw Error(ErrorCode::not_found, "no pending approval '" + cmd.approval_id + "'");
        if (it->second.resolution_queued) throw Error(ErrorCode::conflict, "approval '" + cmd.approval_id + "' already has a decision");
        if (cmd.kind == CommandKind::modify && !cmd.strategy) throw Error(ErrorCode::validation, "modify needs a strategy");
        it->second.resolution_queued = true;
        break;
    }
    case CommandKind::boost:
    case CommandKind::reduce:
        if (!cmd.strategy) throw Error(ErrorCode::validation, "boost/reduce needs a strategy");
        if (!(cmd.gamma > 0.0)) throw Error(ErrorCode::validation, "boost/reduce needs a positive gamma magnitude");
        if (cmd.kind == CommandKind::reduce && !(cmd.gamma < 1.0)) throw Error(ErrorCode::validation, "reduce gamma must be below 1");
        break;
    case CommandKind::expand_region:
        if (cmd.radius_m && !(*cmd.radius_m > scenario_.constants.region_radius_m))
            throw Error(ErrorCode::validation, "expand-region radius must exceed the current radius");
        break;
    case CommandKind::reset: break;
    }
    commands_.push_back(std::move(cmd));
}

void MissionEngine::drain_commands() {
    while (!commands_.empty() && !terminal()) {
        OperatorCommand cmd = std::move(commands_.front());
        commands_.pop_front();
        emit("operator_command", to_json(cmd));
        apply_command(cmd);
    }
}

void MissionEngine::apply_command(const OperatorCommand& cmd) {
    switch (cmd.kind) {
    case CommandKind::approve:
    case CommandKind::reject:
    case CommandKind::modify: {
        auto it = pending_.find(cmd.approval_id);
        if (it == pending_.end()) return;  // expired while queued
        resolve(it->second, std::string(to_string(cmd.kind)), "operator", &cmd);
        return;
    }
    case CommandKind::boost:
    case CommandKind::reduce: {
        const double gamma = cmd.kind == CommandKind::boost ? cmd.gamma : -cmd.gamma;
        belief_ = apply_operator_adjustment(belief_, *cmd.strategy, gamma);
        json data = belief_fields();
        data.update({{"kind", "operator"},
                     {"source", "operator"},
                     {"target", std::string(to_string(*cmd.strategy))},
                     {"gamma", gamma},
                     {"operator", cmd.operator_id}});
        emit("belief_update", std::move(data));
        return;
    }
    case CommandKind::reset: {
        const auto evidence = derive_evidence(scenario_);
        belief_ = reset_beliefs(*net_, evidence, tracker_);
        json data = belief_fields();
        data.update({{"kind", "reset"}, {"source", "operator"}, {"evidence", evidence}, {"operator", cmd.operator_id}});
        emit("belief_update", std::move(data));
        return;
    }
    case CommandKind::expand_region:
        expand_region(cmd.radius_m.value_or(scenario_.constants.region_radius_m * 1.5));
        return;
    }
}

void MissionEngine::expand_region(double radius_m) {
    scenario_.constants.region_radius_m = radius_m;
    ++region_generation_;
    json withdrawn = json::array();
    for (auto it = pool_.begin(); it != pool_.end();) {
        if (it->strategy == Strategy::Region && it->provenance == Provenance::planner) {
            withdrawn.push_back(it->id);
            it = pool_.erase(it);
        } else {
            ++it;
        }
    }
    if (!withdrawn.empty()) emit("tasks_withdrawn", {{"task_ids", withdrawn}, {"reason", "search region expanded"}});

    rebuild_eligibility(Strategy::Region);
    tracker_.rebase(Strategy::Region, coverage(Strategy::Region));
    auto tasks = generate_tasks(Strategy::Region, scenario_);
    json list = json::array();
    for (auto& t : tasks) {
        t.id = "region-x" + std::to_string(region_generation_) + t.id.substr(t.id.find('-'));
        list.push_back(to_json(t));
    }
    emit("tasks_generated", {{"strategy", "region"},
                             {"tasks", list},
                             {"eligible_cells", eligible_[index_of(Strategy::Region)].size()},
                             {"radius_m", radius_m}});
    for (auto& t : tasks) pool_.push_back(std::move(t));

    const auto evidence = derive_evidence(scenario_, radius_m);
    belief_ = reset_beliefs(*net_, evidence, tracker_);
    json data = belief_fields();
    data.update({{"kind", "reset"}, {"source", "operator"}, {"evidence", evidence}, {"radius_m", radius_m}});
    emit("belief_update", std::move(data));
}

void MissionEngine::expire_approvals() {
    std::vector<PendingApproval> due;
    for (const auto& [id, p] : pending_)
        if (!p.resolution_queued && tick_ >= p.timeout_tick) due.push_back(p);
    for (auto& p : due) resolve(p, "expired", "timeout", nullptr);
}

std::optional<Strategy> MissionEngine::strategy_for_person() const {
    auto cell = scenario_.grid.cell_of(scenario_.person.location);
    if (!cell) return std::nullopt;
    const std::uint8_t m = eligible_mask_[scenario_.grid.index(*cell)];
    if (m & (1u << index_of(active_))) return active_;
    std::optional<Strategy> best;
    for (Strategy s : kAllStrategies)
        if ((m & (1u << index_of(s))) && (!best || belief_[s] > belief_[*best])) best = s;
    return best;
}

void MissionEngine::resolve(PendingApproval approval, const std::string& decision, const std::string& source,
                            const OperatorCommand* cmd) {
    pending_.erase(approval.id);
    resolved_.insert(approval.id);
    json data = {{"approval_id", approval.id}, {"kind", approval.kind}, {"decision", decision}, {"source", source}};
    if (cmd) data["operator"] = cmd->operator_id;
    if (cmd && cmd->strategy) data["strategy"] = std::string(to_string(*cmd->strategy));
    emit("approval_resolved", std::move(data));
    if (source == "mission-end") return;

    const bool approved = decision == "approve" || decision == "modify";
    const bool timed_out = source == "timeout";

    if (approval.purpose == "sighting") {
        person_pending_ = false;
        if (approved) {
            const ClueAssessment a{Level::High, Level::High, Level::High, active_};
            const auto target = strategy_for_person().value_or(active_);
            const double gamma = compute_alpha({a.relevance, a.cv_confidence, a.interp_confidence, target}, settings_.hp);
            belief_ = apply_positive_update(belief_, {gamma, target});
            json upd = belief_fields();
            upd.update({{"kind", "positive"},
                        {"source", "sighting"},
                        {"target", std::string(to_string(target))},
                        {"gamma", gamma},
                        {"approval_id", approval.id},
                        {"assessment", {{"relevance", "High"}, {"cv_confidence", "High"}, {"interp_confidence", "High"},
                                        {"strategy", std::string(to_string(target))}}}});
            emit("belief_update", std::move(upd));
            person_found_ = true;
            finish("found", {{"location", point(scenario_.person.location)},
                             {"agent", approval.context.value("agent", std::string())},
                             {"approval_id", approval.id}});
        } else if (!timed_out) {
            person_rejected_ = true;
        }
        return;
    }
    if (approval.purpose == "dominance") {
        if (approved) {
            const Strategy s = cmd && cmd->strategy ? *cmd->strategy : strategy_from_string(approval.context.at("proposed_strategy").get<std::string>());
            switch_active(s, "approval", {{"approval_id", approval.id}});
        }
        return;
    }
    if (approval.clue_id.empty()) return;
    const std::size_t ci = clue_index(approval.clue_id);
    if (approval.purpose == "escalated") return;  // disposition already final
    const auto& pass = clues_[ci].last;
    if (!pass) return;

    if (timed_out) {
        record_queued(ci, *pass);
        finalize(ci, approval.pass, "queued", "defer-to-human", {{"approval_id", approval.id}, {"reason", "approval timed out"}});
        return;
    }
    if (!approved) {
        finalize(ci, approval.pass, "rejected", "do-nothing", {{"approval_id", approval.id}});
        return;
    }
    if (approval.purpose == "inspect") {
        dispatch_inspection(ci, "", Provenance::operator_);
        return;
    }
    const bool modified = cmd && cmd->kind == CommandKind::modify;
    const Strategy target = modified ? *cmd->strategy : pass->strategy;
    apply_pipeline_update(ci, *pass, target, modified, approval.id);
}

} // namespace sar
