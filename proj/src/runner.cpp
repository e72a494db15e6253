#include "sarguard/runner.hpp"

#include "sarguard/error.hpp"
#include "sarguard/text.hpp"

#include <algorithm>
#include <charconv>

namespace sar {

using nlohmann::json;

namespace {

class FixedPolicy : public OperatorPolicy {
public:
    FixedPolicy(std::string name, CommandKind decision, int delay)
        : name_(std::move(name)), decision_(decision), delay_(delay) {}

    std::string name() const override { return name_; }

    std::vector<OperatorCommand> decide(const MissionEngine& engine) override {
        std::vector<OperatorCommand> out;
        for (const auto& [id, p] : engine.approvals()) {
            if (p.resolution_queued || done_.count(id) || engine.tick() < p.created_tick + delay_) continue;
            done_.insert(id);
            OperatorCommand c;
            c.kind = decision_;
            c.approval_id = id;
            c.operator_id = name_;
            out.push_back(std::move(c));
        }
        return out;
    }

private:
    std::string name_;
    CommandKind decision_;
    int delay_;
    std::set<std::string> done_;
};

struct ScriptedAction {
    std::optional<int> tick;
    json match;  // object of approval fields, or null
    int delay = 0;
    OperatorCommand command;
    bool used = false;
};

class ScriptedPolicy : public OperatorPolicy {
public:
    ScriptedPolicy(const json& doc, std::string name) : name_(std::move(name)) {
        if (!doc.is_object()) throw Error(ErrorCode::validation, "policy script must be a JSON object");
        const std::string def = doc.value("default", std::string("none"));
        if (def == "approve") default_ = CommandKind::approve;
        else if (def == "reject") default_ = CommandKind::reject;
        else if (def != "none") throw Error(ErrorCode::validation, "policy default must be approve, reject or none");
        default_delay_ = doc.value("default_delay", 0);
        for (const auto& a : doc.value("actions", json::array())) {
            ScriptedAction act;
            if (a.contains("tick")) act.tick = a.at("tick").get<int>();
            act.match = a.value("match", json());
            act.delay = a.value("delay", 0);
            act.command = command_from_json(a);
            if (act.command.operator_id == "operator") act.command.operator_id = name_;
            const bool resolves = act.command.kind == CommandKind::approve || act.command.kind == CommandKind::reject ||
                                  act.command.kind == CommandKind::modify;
            if (resolves && act.command.approval_id.empty() && !act.match.is_object())
                throw Error(ErrorCode::validation, "scripted approval decisions need an approval_id or a match");
            if (!resolves && !act.tick) throw Error(ErrorCode::validation, "scripted operator commands need a tick");
            actions_.push_back(std::move(act));
        }
    }

    std::string name() const override { return name_; }

    std::vector<OperatorCommand> decide(const MissionEngine& engine) override {
        std::vector<OperatorCommand> out;
        const int now = engine.tick();
        for (auto& act : actions_) {
            if (act.used || (act.tick && now < *act.tick)) continue;
            if (act.match.is_object()) {
                const PendingApproval* hit = nullptr;
                for (const auto& [id, p] : engine.approvals())
                    if (!p.resolution_queued && !taken_.count(id) && matches(act.match, p)) {
                        hit = &p;
                        break;
                    }
                if (!hit || now < hit->created_tick + act.delay) continue;
                act.command.approval_id = hit->id;
            } else if (!act.command.approval_id.empty()) {
                auto it = engine.approvals().find(act.command.approval_id);
                if (it == engine.approvals().end() || it->second.resolution_queued) continue;
            }
            act.used = true;
            if (!act.command.approval_id.empty()) taken_.insert(act.command.approval_id);
            out.push_back(act.command);
        }
        if (default_)
            for (const auto& [id, p] : engine.approvals()) {
                if (p.resolution_queued || taken_.count(id) || now < p.created_tick + default_delay_) continue;
                // Leave room for a matching scripted action that is still waiting on its delay.
                const bool reserved = std::any_of(actions_.begin(), actions_.end(), [&](const ScriptedAction& a) {
                    return !a.used && a.match.is_object() && matches(a.match, p);
                });
                if (reserved) continue;
                taken_.insert(id);
                OperatorCommand c;
                c.kind = *default_;
                c.approval_id = id;
                c.operator_id = name_;
                out.push_back(std::move(c));
            }
        return out;
    }

private:
    static bool matches(const json& m, const PendingApproval& p) {
        for (const auto& [k, v] : m.items()) {
            if (k == "kind" && v != p.kind) return false;
            if (k == "purpose" && v != p.purpose) return false;
            if (k == "clue_id" && v != p.clue_id) return false;
            if (k == "pass" && v != p.pass) return false;
        }
        return true;
    }

    std::string name_;
    std::optional<CommandKind> default_;
    int default_delay_ = 0;
    std::vector<ScriptedAction> actions_;
    std::set<std::string> taken_;
};

} // namespace

std::unique_ptr<OperatorPolicy> make_scripted_policy(const json& doc, std::string name) {
    return std::make_unique<ScriptedPolicy>(doc, std::move(name));
}

std::unique_ptr<OperatorPolicy> make_policy(const std::string& spec) {
    if (spec == "always-approve") return std::make_unique<FixedPolicy>(spec, CommandKind::approve, 0);
    if (spec == "always-reject") return std::make_unique<FixedPolicy>(spec, CommandKind::reject, 0);
    if (spec.rfind("approve-after:", 0) == 0) {
        const std::string n = spec.substr(14);
        int delay = -1;
        auto [p, ec] = std::from_chars(n.data(), n.data() + n.size(), delay);
        if (ec != std::errc{} || p != n.data() + n.size() || delay < 0)
            throw Error(ErrorCode::validation, "approve-after needs a non-negative tick count, got '" + n + "'");
        return std::make_unique<FixedPolicy>(spec, CommandKind::approve, delay);
    }
    if (spec.rfind("scripted:", 0) == 0) {
        const std::string path = spec.substr(9);
        json doc;
        try {
            doc = json::parse(read_text_file(path));
        } catch (const json::parse_error& e) {
            throw Error(ErrorCode::parse, "policy script '" + path + "' is not valid JSON: " + e.what());
        }
        return make_scripted_policy(doc, spec);
    }
    throw Error(ErrorCode::validation,
                "unknown policy '" + spec + "' (expected always-approve, always-reject, approve-after:N or scripted:path)");
}

MissionSetup load_setup(const std::string& scenario_path, const std::string& config_path, std::optional<int> ticks_max,
                        const std::string& backend) {
    MissionSetup setup{load_scenario_file(scenario_path), nullptr, nullptr, backend};
    if (!config_path.empty()) {
        json cfg;
        try {
            cfg = json::parse(read_text_file(config_path));
        } catch (const json::parse_error& e) {
            throw Error(ErrorCode::parse, "config '" + config_path + "' is not valid JSON: " + e.what());
        }
        apply_config(setup.scenario, cfg);
    }
    if (ticks_max) {
        if (*ticks_max <= 0) throw Error(ErrorCode::validation, "ticks-max must be positive");
        apply_config(setup.scenario, {{"constants", {{"ticks_max", *ticks_max}}}});
    }
    setup.network = std::make_shared<const BayesNet>(load_network_file(data_path("network/default_network.json")));
    setup.resources = std::make_shared<const PipelineResources>(load_pipeline_resources());
    make_backend(backend);  // fail early on a bad spec
    return setup;
}

std::unique_ptr<MissionEngine> make_engine(const MissionSetup& setup, const std::string& mission_id,
                                           std::optional<std::uint64_t> seed) {
    return std::make_unique<MissionEngine>(setup.scenario, setup.network, setup.resources, make_backend(setup.backend),
                                           mission_id, seed);
}

json to_json(const RunSummary& s) {
    auto opt = [](const auto& v) { return v ? json(*v) : json(nullptr); };
    return {{"mission_id", s.mission_id},
            {"outcome", s.outcome},
            {"ticks", s.ticks},
            {"events", s.events},
            {"pipeline_updates", s.pipeline_updates},
            {"negative_updates", s.negative_updates},
            {"approvals", {{"requested", s.approvals_requested},
                           {"approved", s.approvals_approved},
                           {"rejected", s.approvals_rejected},
                           {"expired", s.approvals_expired}}},
            {"envelope_interventions", s.envelope_interventions},
            {"found_tick", opt(s.found_tick)},
            {"final_dominant", s.final_dominant},
            {"final_active", s.final_active},
            {"clues", {{"true_positive", s.clues.true_positive},
                       {"false_positive", s.clues.false_positive},
                       {"false_negative", s.clues.false_negative},
                       {"true_negative", s.clues.true_negative},
                       {"precision", opt(s.clues.precision)},
                       {"recall", opt(s.clues.recall)}}}};
}

ClueMetrics clue_metrics(const Scenario& scenario, const std::vector<MissionEvent>& events) {
    std::map<std::string, std::string> last;
    for (const auto& e : events)
        if (e.kind == "trace_pass") last[e.data.at("clue_id").get<std::string>()] = e.data.value("relevance", "None");
    ClueMetrics m;
    for (const auto& c : scenario.clues) {
        auto it = last.find(c.id);
        const bool flagged = it != last.end() && it->second != "None";
        if (flagged && c.ground_truth_relevant) ++m.true_positive;
        else if (flagged) ++m.false_positive;
        else if (c.ground_truth_relevant) ++m.false_negative;
        else ++m.true_negative;
    }
    if (m.true_positive + m.false_positive > 0)
        m.precision = static_cast<double>(m.true_positive) / (m.true_positive + m.false_positive);
    if (m.true_positive + m.false_negative > 0)
        m.recall = static_cast<double>(m.true_positive) / (m.true_positive + m.false_negative);
    return m;
}

RunSummary summarize(const MissionEngine& engine) {
    RunSummary s;
    s.mission_id = engine.mission_id();
    s.outcome = engine.outcome();
    s.ticks = engine.tick();
    s.events = engine.events().size();
    for (const auto& e : engine.events()) {
        if (e.kind == "belief_update") {
            const std::string kind = e.data.value("kind", "");
            if (kind == "positive" && e.data.value("source", "") == "pipeline") ++s.pipeline_updates;
            if (kind == "negative") ++s.negative_updates;
        } else if (e.kind == "approval_requested") {
            ++s.approvals_requested;
        } else if (e.kind == "approval_resolved") {
            const std::string d = e.data.value("decision", "");
            if (d == "approve" || d == "modify") ++s.approvals_approved;
            else if (d == "reject") ++s.approvals_rejected;
            else ++s.approvals_expired;
        } else if (e.kind == "envelope_enforced") {
            ++s.envelope_interventions;
        } else if (e.kind == "found") {
            s.found_tick = e.tick;
        }
    }
    s.final_dominant = std::string(to_string(engine.belief().dominant()));
    s.final_active = std::string(to_string(engine.active()));
    s.clues = clue_metrics(engine.scenario(), engine.events());
    return s;
}

RunSummary run_mission(MissionEngine& engine, OperatorPolicy& policy) {
    while (!engine.terminal()) {
        for (auto& cmd : policy.decide(engine)) {
            try {
                engine.submit(std::move(cmd));
            } catch (const Error& e) {
                // A script may name an approval that already timed out; the run goes on.
                if (e.code() != ErrorCode::not_found && e.code() != ErrorCode::conflict) throw;
            }
        }
        engine.step();
    }
    return summarize(engine);
}

} // namespace sar
