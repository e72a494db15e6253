#include "sarguard/replay.hpp"

#include "sarguard/error.hpp"

#include <cmath>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#ifndef SAR_VERSION
#define SAR_VERSION "0.0.0"
#endif

namespace sar {

using nlohmann::json;

std::string export_replay(const MissionEngine& engine, const std::string& policy) {
    if (!engine.terminal()) throw Error(ErrorCode::invalid_transition, "mission " + engine.mission_id() + " has not ended");
    std::string out;
    const json header = {{"type", "header"},
                         {"schema_version", kReplaySchemaVersion},
                         {"mission_id", engine.mission_id()},
                         {"scenario", engine.scenario().document},
                         {"network", to_json(engine.network().spec())},
                         {"seed", engine.seed()},
                         {"policy", policy},
                         {"backend", engine.backend_name()},
                         {"generator", std::string("sarguard ") + SAR_VERSION}};
    out += header.dump();
    out += '\n';
    for (const auto& e : engine.events()) {
        out += to_json(e).dump();
        out += '\n';
    }
    const auto& events = engine.events();
    const json trailer = {{"type", "trailer"},
                          {"event_count", events.size()},
                          {"final_seq", events.empty() ? json(nullptr) : json(events.back().seq)},
                          {"outcome", engine.outcome()},
                          {"final_belief", belief_to_json(engine.belief())}};
    out += trailer.dump();
    out += '\n';
    return out;
}

Replay parse_replay(const std::string& text) {
    Replay r;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw Error(ErrorCode::parse, "replay line " + std::to_string(lineno) + " is not valid JSON: " + e.what());
        }
        if (!j.is_object()) throw Error(ErrorCode::parse, "replay line " + std::to_string(lineno) + " is not an object");
        const std::string type = j.value("type", std::string("event"));
        if (r.header.is_null()) {
            if (type != "header") throw Error(ErrorCode::parse, "replay does not start with a header line");
            if (!j.contains("schema_version") || !j["schema_version"].is_number_integer())
                throw Error(ErrorCode::parse, "replay header has no schema_version");
            const int v = j["schema_version"].get<int>();
            if (v != kReplaySchemaVersion)
                throw Error(ErrorCode::version, "replay schema version " + std::to_string(v) + " is not supported (expected " +
                                                    std::to_string(kReplaySchemaVersion) + ")");
            r.header = std::move(j);
            continue;
        }
        if (r.trailer) throw Error(ErrorCode::parse, "replay has content after its trailer");
        if (type == "trailer") {
            r.trailer = std::move(j);
        } else {
            r.events.push_back(event_from_json(j));
        }
    }
    if (r.header.is_null()) throw Error(ErrorCode::parse, "replay is empty");
    return r;
}

json to_json(const VerifyReport& r) {
    json findings = json::array();
    for (const auto& f : r.findings)
        findings.push_back({{"check", f.check}, {"seq", f.seq ? json(*f.seq) : json(nullptr)}, {"message", f.message}});
    return {{"ok", r.ok()}, {"checks", r.checks}, {"findings", findings}};
}

namespace {

constexpr double kBeliefTol = 1e-9;
constexpr double kGammaTol = 1e-12;

std::string fmt(double v) {
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
}

double max_diff(const StrategyBelief& a, const StrategyBelief& b) {
    double d = 0.0;
    for (Strategy s : kAllStrategies) d = std::max(d, std::abs(a[s] - b[s]));
    return d;
}

ClueAssessment assessment_from_json(const json& j) {
    auto level = [&](const char* key) {
        auto l = parse_level(j.at(key).get<std::string>());
        if (!l) throw Error(ErrorCode::parse, std::string("bad level in ") + key);
        return *l;
    };
    return {level("relevance"), level("cv_confidence"), level("interp_confidence"),
            strategy_from_string(j.at("strategy").get<std::string>())};
}

class Verifier {
public:
    explicit Verifier(const Replay& r) : r_(r) {}

    VerifyReport run() {
        report_.checks = {"version", "sequence", "normalization", "reapplication", "gamma", "deferral",
                          "envelope", "rejection", "approvals", "switch-authority", "terminal"};
        load_header();
        check_sequence();
        walk();
        check_terminal();
        return std::move(report_);
    }

private:
    void fail(const std::string& check, std::optional<std::uint64_t> seq, std::string msg) {
        report_.findings.push_back({check, seq, std::move(msg)});
    }

    void load_header() {
        const json& h = r_.header;
        if (h.value("schema_version", -1) != kReplaySchemaVersion) fail("version", std::nullopt, "unsupported schema version");
        try {
            scenario_ = parse_scenario(h.at("scenario"));
        } catch (const std::exception& e) {
            fail("version", std::nullopt, std::string("embedded scenario is unusable: ") + e.what());
        }
        try {
            net_.emplace(parse_network_spec(h.at("network")));
        } catch (const std::exception& e) {
            fail("reapplication", std::nullopt, std::string("embedded network is unusable: ") + e.what());
        }
    }

    void check_sequence() {
        const auto& ev = r_.events;
        for (std::size_t i = 0; i < ev.size(); ++i) {
            if (ev[i].seq != i) {
                fail("sequence", ev[i].seq, "expected seq " + std::to_string(i) + ", found " + std::to_string(ev[i].seq));
                break;
            }
            if (i > 0 && ev[i].tick < ev[i - 1].tick) fail("sequence", ev[i].seq, "tick goes backwards");
        }
        if (!r_.trailer) {
            fail("sequence", std::nullopt, "log has no trailer; it was truncated");
            return;
        }
        const auto count = r_.trailer->value("event_count", std::uint64_t{0});
        if (count != ev.size())
            fail("sequence", std::nullopt,
                 "trailer records " + std::to_string(count) + " events but the log holds " + std::to_string(ev.size()));
    }

    void check_belief(const MissionEvent& e, const StrategyBelief& b) {
        for (Strategy s : kAllStrategies)
            if (!(b[s] >= 0.0) || !std::isfinite(b[s])) fail("normalization", e.seq, "negative or non-finite probability");
        if (std::abs(b.sum() - 1.0) > kBeliefTol) fail("normalization", e.seq, "belief sums to " + fmt(b.sum()));
    }

    void walk() {
        Projection projection;
        bool projection_ok = true;
        for (const auto& e : r_.events) {
            if (projection_ok) {
                try {
                    projection.apply(e);
                } catch (const std::exception& ex) {
                    fail("sequence", e.seq, std::string("event cannot be applied: ") + ex.what());
                    projection_ok = false;
                }
            }
            try {
                visit(e);
            } catch (const std::exception& ex) {
                fail("sequence", e.seq, std::string("malformed ") + e.kind + " event: " + ex.what());
            }
        }
    }

    void visit(const MissionEvent& e) {
        const json& d = e.data;
        if (e.kind == "belief_init") {
            auto b = belief_from_json(d.at("belief"));
            check_belief(e, b);
            if (net_) {
                auto expected = infer_strategies(*net_, d.at("evidence").get<EvidenceAssignment>());
                if (max_diff(expected, b) > kBeliefTol)
                    fail("reapplication", e.seq, "initial belief differs from inference on the recorded evidence");
            }
            recorded_ = chained_ = b;
            have_belief_ = true;
        } else if (e.kind == "belief_update") {
            on_update(e);
        } else if (e.kind == "trace_pass") {
            traces_[{d.at("clue_id").get<std::string>(), d.at("pass").get<int>()}] = d;
        } else if (e.kind == "trace_disposition") {
            const std::string clue = d.at("clue_id").get<std::string>();
            if (d.at("disposition") == "rejected") {
                rejected_.insert(clue);
                if (updated_.count(clue)) fail("rejection", e.seq, "clue " + clue + " rejected after it updated the belief");
            }
        } else if (e.kind == "approval_requested") {
            const std::string id = d.at("approval_id").get<std::string>();
            if (!requested_.insert(id).second) fail("approvals", e.seq, "approval " + id + " requested twice");
        } else if (e.kind == "approval_resolved") {
            const std::string id = d.at("approval_id").get<std::string>();
            if (!requested_.count(id)) fail("approvals", e.seq, "approval " + id + " resolved but never requested");
            if (!resolved_.insert(id).second) fail("approvals", e.seq, "approval " + id + " resolved twice");
            const std::string decision = d.at("decision").get<std::string>();
            if (decision == "approve" || decision == "modify") approved_.insert(id);
        } else if (e.kind == "strategy_active") {
            on_switch(e);
        } else if (e.kind == "notify") {
            notify_ticks_.insert(e.tick);
            for (auto it = pending_notify_.begin(); it != pending_notify_.end();)
                it = it->second == e.tick ? pending_notify_.erase(it) : std::next(it);
        } else if (e.kind == "agents") {
            on_agents(e);
        } else if (e.kind == "found" || e.kind == "exhausted" || e.kind == "aborted") {
            terminal_ = e.kind;
            terminal_seq_ = e.seq;
            flush_notify();
        }
        if (e.kind != "notify" && !pending_notify_.empty() && e.tick > pending_notify_.begin()->second) flush_notify();
    }

    void flush_notify() {
        for (const auto& [seq, tick] : pending_notify_)
            fail("switch-authority", seq, "notify-level strategy switch without a notify event in tick " + std::to_string(tick));
        pending_notify_.clear();
    }

    void on_update(const MissionEvent& e) {
        const json& d = e.data;
        auto b = belief_from_json(d.at("belief"));
        check_belief(e, b);
        if (!have_belief_) {
            fail("reapplication", e.seq, "belief update before the initial belief");
            recorded_ = chained_ = b;
            have_belief_ = true;
            return;
        }
        const std::string kind = d.at("kind").get<std::string>();
        const std::string source = d.value("source", "");
        if (kind == "reset") {
            if (net_) {
                auto expected = infer_strategies(*net_, d.at("evidence").get<EvidenceAssignment>());
                if (max_diff(expected, b) > kBeliefTol) fail("reapplication", e.seq, "reset belief differs from re-inference");
                chained_ = expected;
            } else {
                chained_ = b;
            }
            recorded_ = b;
            return;
        }
        const double gamma = d.at("gamma").get<double>();
        const Strategy target = strategy_from_string(d.at("target").get<std::string>());
        try {
            auto expected = apply_update(recorded_, {gamma, target});
            if (max_diff(expected, b) > kBeliefTol)
                fail("reapplication", e.seq, "recorded belief does not follow from the previous one with gamma " + fmt(gamma));
            chained_ = apply_update(chained_, {gamma, target});
        } catch (const Error& ex) {
            fail("reapplication", e.seq, ex.what());
        }
        recorded_ = b;

        if (kind == "negative") {
            const double cov = d.at("coverage").get<double>();
            const double threshold = scenario_ ? scenario_->hyperparams.coverage_threshold : d.value("threshold", 0.6);
            const double max_beta = scenario_ ? scenario_->hyperparams.max_beta : 0.95;
            if (cov < threshold) fail("deferral", e.seq, "decay applied at coverage " + fmt(cov) + " below the threshold");
            if (std::abs(gamma + std::min(cov, max_beta)) > kGammaTol)
                fail("deferral", e.seq, "decay gamma " + fmt(gamma) + " is not -min(coverage, max_beta)");
        } else if (kind == "positive") {
            if (gamma < 0.0) fail("gamma", e.seq, "positive update with negative gamma");
            if (!scenario_) return;
            const auto& hp = scenario_->hyperparams;
            if (source == "pipeline") {
                const std::string clue = d.at("clue_id").get<std::string>();
                updated_.insert(clue);
                if (rejected_.count(clue)) fail("rejection", e.seq, "clue " + clue + " was rejected but updated the belief");
                auto it = traces_.find({clue, d.at("pass").get<int>()});
                if (it == traces_.end()) {
                    fail("gamma", e.seq, "no trace recorded for clue " + clue);
                    return;
                }
                const json& trace = it->second;
                if (!trace.contains("assessment") || trace["assessment"] != d.at("assessment")) {
                    fail("gamma", e.seq, "update assessment differs from the trace of clue " + clue);
                    return;
                }
                const double alpha = compute_alpha(assessment_from_json(trace["assessment"]), hp);
                if (std::abs(alpha - gamma) > kGammaTol)
                    fail("gamma", e.seq, "gamma " + fmt(gamma) + " differs from alpha " + fmt(alpha) + " of the trace");
                if (std::abs(trace.value("gamma", alpha) - alpha) > kGammaTol)
                    fail("gamma", e.seq, "trace gamma differs from its own assessment");
            } else if (source == "sighting") {
                const double alpha = compute_alpha({Level::High, Level::High, Level::High, target}, hp);
                if (std::abs(alpha - gamma) > kGammaTol) fail("gamma", e.seq, "sighting gamma is not alpha(High, High, High)");
            } else {
                fail("gamma", e.seq, "positive update from unknown source '" + source + "'");
            }
        }
    }

    void on_switch(const MissionEvent& e) {
        const json& d = e.data;
        const std::string reason = d.value("reason", "");
        if (reason == "init") return;
        const Strategy to = strategy_from_string(d.at("strategy").get<std::string>());
        const Strategy from = strategy_from_string(d.at("previous").get<std::string>());
        if (reason == "approval" || reason == "operator") {
            const std::string id = d.value("approval_id", "");
            if (!approved_.count(id)) fail("switch-authority", e.seq, "switch cites approval '" + id + "' which was not granted");
            return;
        }
        if (!have_belief_ || !scenario_) return;
        const auto v = entropy_verdict(recorded_, from, to, scenario_->entropy);
        if (v.decision == Decision::RequiresApproval || v.decision == Decision::Defer)
            fail("switch-authority", e.seq, "autonomous switch to " + std::string(to_string(to)) + " needed operator approval");
        else if (v.decision == Decision::AutonomousNotify && !notify_ticks_.count(e.tick))
            pending_notify_.emplace(e.seq, e.tick);
    }

    void on_agents(const MissionEvent& e) {
        if (!scenario_) return;
        const auto& env = scenario_->envelope;
        for (const auto& a : e.data.at("agents")) {
            const std::string id = a.at("id").get<std::string>();
            const std::string mode = a.at("mode").get<std::string>();
            const Vec2 p{a.at("position").at(0).get<double>(), a.at("position").at(1).get<double>()};
            const double alt = a.at("altitude_m").get<double>();
            const double battery = a.at("battery").get<double>();
            if (!env.geofence_allows(p)) fail("envelope", e.seq, id + " outside the geofence");
            if (!env.range_allows(p)) fail("envelope", e.seq, id + " beyond max range");
            if (mode != "landed" && (alt < env.min_altitude_m - 1e-9 || alt > env.max_altitude_m + 1e-9))
                fail("envelope", e.seq, id + " altitude " + fmt(alt) + " outside the band");
            if (battery < env.battery_reserve_fraction && mode != "returning" && mode != "landed")
                fail("envelope", e.seq, id + " below battery reserve but still tasked");
        }
    }

    void check_terminal() {
        flush_notify();
        if (terminal_.empty()) {
            fail("terminal", std::nullopt, "log has no terminal event");
        } else if (terminal_seq_ + 1 != r_.events.size()) {
            fail("terminal", terminal_seq_, "events follow the terminal event");
        }
        for (const auto& id : requested_)
            if (!resolved_.count(id)) fail("approvals", std::nullopt, "approval " + id + " never resolved");
        if (r_.trailer) {
            if (r_.trailer->value("outcome", std::string()) != terminal_)
                fail("terminal", std::nullopt, "trailer outcome differs from the terminal event");
            if (have_belief_) {
                try {
                    auto final_belief = belief_from_json(r_.trailer->at("final_belief"));
                    if (max_diff(final_belief, recorded_) > kBeliefTol)
                        fail("reapplication", std::nullopt, "trailer belief differs from the last recorded belief");
                    if (max_diff(final_belief, chained_) > kBeliefTol)
                        fail("reapplication", std::nullopt, "re-applying every update does not reproduce the final belief");
                } catch (const std::exception& ex) {
                    fail("terminal", std::nullopt, std::string("malformed trailer: ") + ex.what());
                }
            }
        }
    }

    const Replay& r_;
    VerifyReport report_;
    std::optional<Scenario> scenario_;
    std::optional<BayesNet> net_;
    StrategyBelief recorded_;
    StrategyBelief chained_;
    bool have_belief_ = false;
    std::map<std::pair<std::string, int>, json> traces_;
    std::set<std::string> rejected_, updated_;
    std::set<std::string> requested_, resolved_, approved_;
    std::set<int> notify_ticks_;
    std::map<std::uint64_t, int> pending_notify_;  // switch seq -> tick
    std::string terminal_;
    std::uint64_t terminal_seq_ = 0;
};

} // namespace

VerifyReport verify_replay(const Replay& replay) { return Verifier(replay).run(); }

VerifyReport verify_replay_text(const std::string& text) {
    try {
        return verify_replay(parse_replay(text));
    } catch (const Error& e) {
        VerifyReport r;
        r.checks = {"version", "sequence"};
        r.findings.push_back({e.code() == ErrorCode::version ? "version" : "sequence", std::nullopt, e.what()});
        return r;
    }
}

json snapshot_at(const Replay& replay, std::uint64_t seq) {
    if (replay.events.empty() || seq >= replay.events.size())
        throw Error(ErrorCode::not_found, "replay has no event with seq " + std::to_string(seq));
    Projection p;
    for (std::uint64_t i = 0; i <= seq; ++i) p.apply(replay.events[i]);
    return p.snapshot();
}

std::string plot_csv(const Replay& replay) {
    std::ostringstream out;
    out << std::setprecision(17);
    out << "seq,tick,kind,source,target,gamma,clue_id";
    for (Strategy s : kAllStrategies) out << ',' << to_string(s);
    out << ",entropy,dominant\n";
    for (const auto& e : replay.events) {
        if (e.kind != "belief_init" && e.kind != "belief_update") continue;
        const json& d = e.data;
        const bool init = e.kind == "belief_init";
        out << e.seq << ',' << e.tick << ',' << (init ? "init" : d.value("kind", "")) << ','
            << (init ? "" : d.value("source", "")) << ',' << (init ? "" : d.value("target", "")) << ',';
        if (d.contains("gamma")) out << d["gamma"].get<double>();
        out << ',' << (d.contains("clue_id") ? d["clue_id"].get<std::string>() : "");
        auto b = belief_from_json(d.at("belief"));
        for (Strategy s : kAllStrategies) out << ',' << b[s];
        out << ',' << normalized_entropy(b) << ',' << to_string(b.dominant()) << '\n';
    }
    return out.str();
}

} // namespace sar
