// sarguard: headless mission runner, replay verifier, plotter and service launcher.

#include "sarguard/error.hpp"
#include "sarguard/replay.hpp"
#include "sarguard/runner.hpp"
#include "sarguard/service.hpp"
#include "sarguard/text.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>

namespace {

enum Exit : int { ok = 0, failure = 1, invalid_input = 2, aborted = 3, verification_failed = 4 };

int exit_for(const sar::Error& e) {
    switch (e.code()) {
    case sar::ErrorCode::parse:
    case sar::ErrorCode::validation:
    case sar::ErrorCode::version:
    case sar::ErrorCode::not_found:
    case sar::ErrorCode::inference: return invalid_input;
    default: return failure;
    }
}

void write_file(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw sar::Error(sar::ErrorCode::io, "cannot write '" + path + "'");
    out << body;
    if (!out) throw sar::Error(sar::ErrorCode::io, "failed writing '" + path + "'");
}

std::string fmt_opt(const std::optional<double>& v) {
    if (!v) return "n/a";
    std::ostringstream s;
    s << std::fixed << std::setprecision(3) << *v;
    return s.str();
}

void print_summary(const sar::RunSummary& s, const sar::MissionEngine& engine) {
    std::cout << "mission   " << s.mission_id << "\n"
              << "outcome   " << s.outcome << " after " << s.ticks << " ticks";
    if (s.found_tick) std::cout << " (found at tick " << *s.found_tick << ")";
    std::cout << "\nbelief   ";
    for (sar::Strategy st : sar::kAllStrategies)
        std::cout << ' ' << sar::to_string(st) << '=' << std::fixed << std::setprecision(4) << engine.belief()[st];
    std::cout << "\ndominant  " << s.final_dominant << " (active " << s.final_active << ")\n"
              << "approvals " << s.approvals_requested << " requested, " << s.approvals_approved << " approved, "
              << s.approvals_rejected << " rejected, " << s.approvals_expired << " expired\n"
              << "updates   " << s.pipeline_updates << " from clues, " << s.negative_updates << " coverage decays\n"
              << "clues     precision " << fmt_opt(s.clues.precision) << ", recall " << fmt_opt(s.clues.recall) << " (tp "
              << s.clues.true_positive << ", fp " << s.clues.false_positive << ", fn " << s.clues.false_negative << ")\n"
              << "envelope  " << s.envelope_interventions << " interventions\n";
}

void print_report(const sar::VerifyReport& r) {
    std::cout << (r.ok() ? "PASS" : "FAIL") << " (" << r.checks.size() << " checks, " << r.findings.size() << " findings)\n";
    for (const auto& f : r.findings) {
        std::cout << "  [" << f.check << "]";
        if (f.seq) std::cout << " seq " << *f.seq;
        std::cout << ": " << f.message << "\n";
    }
}

std::atomic<bool> g_stop{false};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Search-and-rescue mission engine"};
    app.require_subcommand(1);

    std::string scenario, policy = "always-approve", out, config, backend = "stub", mission_id;
    std::optional<std::uint64_t> seed;
    std::optional<int> ticks_max;
    bool summary_json = false;
    auto* run = app.add_subcommand("run", "Run a mission headless and write its replay");
    run->add_option("--scenario", scenario, "Scenario file")->required();
    run->add_option("--policy", policy, "always-approve | always-reject | approve-after:N | scripted:PATH");
    run->add_option("--seed", seed, "Override the scenario seed");
    run->add_option("--out", out, "Replay output path (NDJSON)");
    run->add_option("--ticks-max", ticks_max, "Tick budget");
    run->add_option("--config", config, "JSON file overriding hyperparameters, thresholds and constants");
    run->add_option("--backend", backend, "stub | chat:HOST:PORT:MODEL");
    run->add_option("--mission-id", mission_id, "Mission id (default: scenario id)");
    run->add_flag("--json", summary_json, "Print the summary as JSON");

    std::string replay_path;
    bool report_json = false;
    auto* verify = app.add_subcommand("verify", "Check a replay log's invariants");
    verify->add_option("replay", replay_path, "Replay file")->required();
    verify->add_flag("--json", report_json, "Print the report as JSON");

    std::string csv_out;
    auto* plot = app.add_subcommand("plot", "Belief trajectory CSV from a replay");
    plot->add_option("replay", replay_path, "Replay file")->required();
    plot->add_option("--out", csv_out, "CSV output path (default: stdout)");

    std::uint64_t at_seq = 0;
    auto* snap = app.add_subcommand("snapshot", "Mission state after a given event");
    snap->add_option("replay", replay_path, "Replay file")->required();
    snap->add_option("--seq", at_seq, "Event sequence number")->required();

    sar::ServiceOptions sopts;
    auto* serve = app.add_subcommand("serve", "Run the mission service");
    serve->add_option("--host", sopts.host, "Bind address");
    serve->add_option("--port", sopts.port, "Port");
    serve->add_option("--token", sopts.token, "Static bearer token (empty disables auth)");
    serve->add_option("--replay-dir", sopts.replay_dir, "Directory for replays of finished missions");
    serve->add_option("--backend", sopts.backend, "stub | chat:HOST:PORT:MODEL");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            auto setup = sar::load_setup(scenario, config, ticks_max, backend);
            auto pol = sar::make_policy(policy);
            auto engine = sar::make_engine(setup, mission_id.empty() ? setup.scenario.id : mission_id, seed);
            const auto summary = sar::run_mission(*engine, *pol);
            const std::string replay = sar::export_replay(*engine, pol->name());
            if (!out.empty()) write_file(out, replay);
            const auto report = sar::verify_replay_text(replay);
            if (summary_json) {
                auto j = sar::to_json(summary);
                j["belief"] = sar::belief_to_json(engine->belief());
                j["verify"] = sar::to_json(report);
                std::cout << j.dump(2) << "\n";
            } else {
                print_summary(summary, *engine);
                std::cout << "verify    ";
                print_report(report);
            }
            if (!report.ok()) return verification_failed;
            if (summary.outcome == "aborted") return aborted;
            return ok;
        }
        if (*verify) {
            const auto report = sar::verify_replay_text(sar::read_text_file(replay_path));
            if (report_json) std::cout << sar::to_json(report).dump(2) << "\n";
            else print_report(report);
            return report.ok() ? ok : verification_failed;
        }
        if (*plot) {
            const auto csv = sar::plot_csv(sar::parse_replay(sar::read_text_file(replay_path)));
            if (csv_out.empty()) std::cout << csv;
            else write_file(csv_out, csv);
            return ok;
        }
        if (*snap) {
            std::cout << sar::snapshot_at(sar::parse_replay(sar::read_text_file(replay_path)), at_seq).dump(2) << "\n";
            return ok;
        }
        if (*serve) {
            sar::MissionService service(sopts);
            std::signal(SIGINT, [](int) { g_stop = true; });
            std::signal(SIGTERM, [](int) { g_stop = true; });
            const int port = service.start();
            std::cout << "listening on " << sopts.host << ":" << port << std::endl;
            while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
            service.stop();
            return ok;
        }
    } catch (const sar::Error& e) {
        std::cerr << "error (" << sar::to_string(e.code()) << "): " << e.what() << "\n";
        return exit_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return failure;
    }
    return failure;
}
