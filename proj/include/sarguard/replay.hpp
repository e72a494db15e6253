#pragma once

#include "sarguard/engine.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace sar {

/// A parsed replay log: header line, events, trailer line.
struct Replay {
    nlohmann::json header;
    std::vector<MissionEvent> events;
    std::optional<nlohmann::json> trailer;  // absent when the log was cut short
};

/// Newline-delimited JSON. The header embeds the scenario document (with any
/// config applied), the network, seed, policy and backend so the log can be
/// audited without other files. Throws Error(invalid_transition) if the
/// mission has not ended.
std::string export_replay(const MissionEngine& engine, const std::string& policy);

/// Throws Error(parse) on malformed lines and Error(version) on an
/// unsupported schema version. A missing trailer is not an error here.
Replay parse_replay(const std::string& text);

struct VerifyFinding {
    std::string check;
    std::optional<std::uint64_t> seq;
    std::string message;
};

struct VerifyReport {
    std::vector<std::string> checks;  // names of the checks that ran
    std::vector<VerifyFinding> findings;
    bool ok() const noexcept { return findings.empty(); }
};

nlohmann::json to_json(const VerifyReport& r);

/// Log-level invariant checks: schema version, sequence continuity and
/// trailer, belief normalization, re-application of every update, gamma
/// re-derivation from the recorded traces, coverage gating of decay,
/// envelope compliance of every recorded agent state, rejected clues never
/// moving the belief, approval bookkeeping and strategy-switch authority.
VerifyReport verify_replay(const Replay& replay);

/// As above, but parse and version failures become findings.
VerifyReport verify_replay_text(const std::string& text);

/// Operator view after applying events [0, seq].
nlohmann::json snapshot_at(const Replay& replay, std::uint64_t seq);

/// One row for the initial belief and one per belief update.
std::string plot_csv(const Replay& replay);

} // namespace sar
