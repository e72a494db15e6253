#pragma once

#include "sarguard/backend.hpp"
#include "sarguard/bayes_net.hpp"
#include "sarguard/events.hpp"
#include "sarguard/pipeline.hpp"
#include "sarguard/scenario.hpp"
#include "sarguard/tasks.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace sar {

enum class CommandKind { approve, reject, modify, boost, reduce, reset, expand_region };

std::string_view to_string(CommandKind k) noexcept;

/// An operator decision. approve/reject/modify resolve a pending approval;
/// the rest act on the belief or the search area directly.
struct OperatorCommand {
    CommandKind kind = CommandKind::approve;
    std::string approval_id;
    std::optional<Strategy> strategy;  // modify, boost, reduce
    double gamma = 0.0;                // boost/reduce magnitude
    std::optional<double> radius_m;    // expand-region; default grows the radius by half
    std::string operator_id = "operator";
    std::string note;
};

/// {"decision": "approve", "approval_id": ..., "strategy": ..., "gamma": ..., "radius_m": ..., "operator": ...}
OperatorCommand command_from_json(const nlohmann::json& j);
nlohmann::json to_json(const OperatorCommand& c);

enum class AgentMode { idle, enroute, searching, inspecting, returning, landed };
std::string_view to_string(AgentMode m) noexcept;

struct AgentState {
    std::string id;
    Vec2 position;
    double altitude_m = 0.0;
    double battery = 1.0;
    AgentMode mode = AgentMode::idle;
    std::optional<Task> task;
    std::size_t waypoint = 0;  // next index into task->path
    int clamp_streak = 0;      // consecutive ticks with a position clamp
};

nlohmann::json to_json(const AgentState& a);

struct PendingApproval {
    std::string id;
    std::string kind;     // strategy-switch | clue-relevance | queued-task | advocate-escalation
    std::string purpose;  // what resolving it does: decided | inspect | escalated | sighting
    std::string clue_id;
    int pass = 0;
    int created_tick = 0;
    int timeout_tick = 0;
    bool resolution_queued = false;
    nlohmann::json context;
};

/// Deterministic single-mission simulation. Not thread-safe: callers that
/// share an engine (the service) serialize access themselves.
class MissionEngine {
public:
    using Listener = std::function<void(const MissionEvent&)>;

    MissionEngine(Scenario scenario, std::shared_ptr<const BayesNet> net, std::shared_ptr<const PipelineResources> res,
                  std::unique_ptr<Backend> backend, std::string mission_id, std::optional<std::uint64_t> seed = {});

    /// Advances one tick. No-op once terminal.
    void step();

    /// Queues an operator command for the next tick. Throws Error(not_found)
    /// for unknown approvals, Error(conflict) for already-resolved ones and
    /// Error(invalid_transition) once the mission is over.
    void submit(OperatorCommand cmd);

    /// Ends the mission immediately with an aborted event.
    void abort(const std::string& reason);

    bool terminal() const noexcept { return !outcome_.empty(); }
    const std::string& outcome() const noexcept { return outcome_; }
    int tick() const noexcept { return tick_; }
    const std::string& mission_id() const noexcept { return mission_id_; }
    std::uint64_t seed() const noexcept { return seed_; }
    const Scenario& scenario() const noexcept { return scenario_; }
    const BayesNet& network() const noexcept { return *net_; }
    const std::string& backend_name() const noexcept { return backend_name_; }

    const StrategyBelief& belief() const noexcept { return belief_; }
    Strategy active() const noexcept { return active_; }
    const std::vector<AgentState>& agents() const noexcept { return agents_; }
    const std::vector<Task>& pool() const noexcept { return pool_; }
    double coverage(Strategy s) const;
    const std::map<std::string, PendingApproval>& approvals() const noexcept { return pending_; }

    const std::vector<MissionEvent>& events() const noexcept { return events_; }
    nlohmann::json snapshot() const { return projection_.snapshot(); }

    /// Called synchronously for every emitted event.
    void set_listener(Listener l) { listener_ = std::move(l); }

private:
    struct ClueState {
        bool detected = false;
        int passes = 0;
        std::optional<PassResult> last;
        bool closed = false;  // final disposition recorded
        bool queued_record = false;
    };

    const MissionEvent& emit(const std::string& kind, nlohmann::json data);
    nlohmann::json belief_fields() const;

    // planning
    void assign_tasks();
    void assign(AgentState& agent, Task task, const std::string& reason);
    void preempt(AgentState& agent, const std::string& reason);
    void abandon(AgentState& agent, const std::string& reason);
    void switch_active(Strategy s, const std::string& reason, nlohmann::json extra = nlohmann::json::object());
    void request_swarm_help(Strategy s, Vec2 near, const std::string& clue_id);

    // world
    void move_agents(std::vector<std::pair<std::string, Task>>& completed);
    void observe_coverage(const AgentState& a);
    void sense();
    void sight_person();
    void negative_updates();
    void dominance_check();
    void enforce_envelope();
    void check_terminal();
    void finish(const std::string& outcome, nlohmann::json data);

    // pipeline
    MissionView mission_view(const AgentState& agent) const;
    void run_clue_pass(std::size_t clue_index, const AgentState& agent, int pass_no);
    void handle_pass(std::size_t clue_index, const AgentState& agent, const PassResult& pass);
    void dispatch_inspection(std::size_t clue_index, const std::string& directed_agent, Provenance provenance);
    std::string request_approval(const std::string& kind, const std::string& purpose, const std::string& clue_id,
                                 int pass, nlohmann::json context);
    void record_queued(std::size_t clue_index, const PassResult& pass);
    void finalize(std::size_t clue_index, int pass, const std::string& disposition, const std::string& local_action,
                  nlohmann::json extra = nlohmann::json::object());
    void apply_pipeline_update(std::size_t clue_index, const PassResult& pass, Strategy target, bool modified,
                               const std::string& approval_id);

    // operator
    void drain_commands();
    void expire_approvals();
    void resolve(PendingApproval approval, const std::string& decision, const std::string& source,
                 const OperatorCommand* cmd);
    void apply_command(const OperatorCommand& cmd);
    void expand_region(double radius_m);
    void rebuild_eligibility(Strategy s);

    std::size_t clue_index(const std::string& id) const;
    AgentState* agent_by_id(const std::string& id);
    std::optional<Strategy> strategy_for_person() const;

    Scenario scenario_;
    std::shared_ptr<const BayesNet> net_;
    std::shared_ptr<const PipelineResources> res_;
    std::unique_ptr<Backend> backend_;
    std::string backend_name_;
    std::string mission_id_;
    std::uint64_t seed_ = 0;
    std::mt19937_64 rng_;
    PipelineSettings settings_;

    int tick_ = 0;
    std::string outcome_;
    StrategyBelief belief_;
    Strategy active_ = Strategy::Region;
    Strategy last_dominant_ = Strategy::Region;
    CoverageTracker tracker_;
    CoverageMap coverage_map_;
    std::array<std::vector<std::size_t>, kStrategyCount> eligible_;
    std::vector<std::uint8_t> eligible_mask_;  // bit per strategy, per cell
    std::array<std::size_t, kStrategyCount> covered_count_{};
    std::array<bool, kStrategyCount> crosses_restricted_{};
    int region_generation_ = 0;

    std::vector<AgentState> agents_;
    std::vector<Task> pool_;
    std::vector<ClueState> clues_;
    std::map<std::string, PendingApproval> pending_;
    std::set<std::string> resolved_;
    int approval_counter_ = 0;
    int task_counter_ = 0;
    std::deque<OperatorCommand> commands_;

    bool person_found_ = false;
    bool person_rejected_ = false;
    bool person_pending_ = false;

    std::vector<MissionEvent> events_;
    Projection projection_;
    Listener listener_;
};

} // namespace sar
