#pragma once

#include "sarguard/strategy.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <deque>
#include <map>
#include <string>
#include <vector>

namespace sar {

inline constexpr int kReplaySchemaVersion = 1;

/// One entry of the append-only mission log.
struct MissionEvent {
    std::uint64_t seq = 0;
    int tick = 0;
    std::string kind;
    nlohmann::json data;
};

nlohmann::json to_json(const MissionEvent& e);
MissionEvent event_from_json(const nlohmann::json& j);

nlohmann::json belief_to_json(const StrategyBelief& b);
StrategyBelief belief_from_json(const nlohmann::json& j);

/// Folds events into the state view served to operators. The engine feeds
/// its own projection as it emits, so a replayed log yields identical snapshots.
class Projection {
public:
    static constexpr std::size_t kRecentEvents = 20;

    void apply(const MissionEvent& e);
    nlohmann::json snapshot() const;

    std::uint64_t next_seq() const noexcept { return next_seq_; }
    int tick() const noexcept { return tick_; }
    const std::string& status() const noexcept { return status_; }
    const StrategyBelief& belief() const noexcept { return belief_; }
    const nlohmann::json& pending_approvals() const noexcept { return pending_; }

private:
    std::string mission_id_;
    std::uint64_t next_seq_ = 0;
    int tick_ = 0;
    std::string status_ = "active";
    nlohmann::json outcome_;
    StrategyBelief belief_ = StrategyBelief::uniform();
    double entropy_ = 1.0;
    std::string dominant_;
    std::string active_;
    nlohmann::json agents_ = nlohmann::json::array();
    nlohmann::json coverage_ = nlohmann::json::object();
    std::map<std::string, nlohmann::json> pool_;      // task id -> task
    std::map<std::string, nlohmann::json> assigned_;  // agent id -> task
    nlohmann::json pending_ = nlohmann::json::array();
    int approvals_resolved_ = 0;
    std::map<std::string, nlohmann::json> clues_;
    nlohmann::json queued_ = nlohmann::json::array();
    nlohmann::json person_ = nlohmann::json::object();
    std::deque<nlohmann::json> recent_;
};

} // namespace sar
