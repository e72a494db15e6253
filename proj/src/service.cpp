#include "sarguard/service.hpp"

#include "sarguard/error.hpp"
#include "sarguard/replay.hpp"
#include "sarguard/text.hpp"

#include <httplib.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace sar {

using nlohmann::json;

namespace {

int http_status(ErrorCode c) {
    switch (c) {
    case ErrorCode::parse: return 400;
    case ErrorCode::validation:
    case ErrorCode::inference: return 422;
    case ErrorCode::not_found: return 404;
    case ErrorCode::conflict:
    case ErrorCode::invalid_transition: return 409;
    case ErrorCode::version: return 415;
    default: return 500;
    }
}

json error_body(ErrorCode code, const std::string& message) {
    return {{"api_version", kApiVersion}, {"error", {{"code", to_string(code)}, {"message", message}}}};
}

void send_json(httplib::Response& res, int status, json body) {
    if (body.is_object() && !body.contains("api_version")) body["api_version"] = kApiVersion;
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    try {
        return json::parse(req.body);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::parse, std::string("request body is not valid JSON: ") + e.what());
    }
}

std::string sse_frame(const MissionEvent& e) {
    return "id: " + std::to_string(e.seq) + "\nevent: " + e.kind + "\ndata: " + to_json(e).dump() + "\n\n";
}

} // namespace

MissionService::MissionService(ServiceOptions opts) : opts_(std::move(opts)) {}

MissionService::~MissionService() { stop(); }

std::shared_ptr<MissionService::Mission> MissionService::find(const std::string& id) {
    std::lock_guard lk(missions_mutex_);
    auto it = missions_.find(id);
    if (it == missions_.end()) throw Error(ErrorCode::not_found, "no mission '" + id + "'");
    return it->second;
}

json MissionService::state_of(const Mission& m) const {
    return {{"mission_id", m.engine->mission_id()},
            {"run_state", m.run_state},
            {"speed", m.speed},
            {"tick", m.engine->tick()},
            {"seq", m.engine->events().size()},
            {"outcome", m.engine->terminal() ? json(m.engine->outcome()) : json(nullptr)},
            {"policy", m.policy ? json(m.policy_name) : json(nullptr)}};
}

json MissionService::create_mission(const json& body) {
    if (!body.is_object()) throw Error(ErrorCode::validation, "mission request must be a JSON object");
    Scenario scenario;
    if (auto s = body.find("scenario"); s != body.end()) scenario = parse_scenario(*s);
    else if (auto p = body.find("scenario_path"); p != body.end()) scenario = load_scenario_file(p->get<std::string>());
    else if (body.contains("grid")) scenario = parse_scenario(body);
    else throw Error(ErrorCode::validation, "request needs a scenario document or scenario_path");
    if (auto c = body.find("config"); c != body.end()) apply_config(scenario, *c);

    std::optional<std::uint64_t> seed;
    if (auto s = body.find("seed"); s != body.end() && !s->is_null()) seed = s->get<std::uint64_t>();
    std::string backend = body.value("backend", opts_.backend);

    auto m = std::make_shared<Mission>();
    if (auto p = body.find("policy"); p != body.end() && !p->is_null()) {
        m->policy = p->is_object() ? make_scripted_policy(*p) : make_policy(p->get<std::string>());
        m->policy_name = m->policy->name();
    }
    m->speed = body.value("speed", opts_.default_speed);
    if (!(m->speed >= 0.0)) throw Error(ErrorCode::validation, "speed must be non-negative");

    std::string id;
    {
        std::lock_guard lk(missions_mutex_);
        if (auto given = body.find("mission_id"); given != body.end()) {
            id = given->get<std::string>();
            if (id.empty()) throw Error(ErrorCode::validation, "mission_id must not be empty");
        } else {
            char buf[32];
            do std::snprintf(buf, sizeof buf, "m-%04d", ++mission_counter_);
            while (missions_.count(buf));
            id = buf;
        }
        if (missions_.count(id)) throw Error(ErrorCode::conflict, "mission '" + id + "' already exists");
        missions_.emplace(id, nullptr);  // reserve while the engine is built
    }
    try {
        auto net = std::make_shared<const BayesNet>(load_network_file(data_path("network/default_network.json")));
        auto res = std::make_shared<const PipelineResources>(load_pipeline_resources());
        m->engine = std::make_unique<MissionEngine>(std::move(scenario), net, res, make_backend(backend), id, seed);
    } catch (...) {
        std::lock_guard lk(missions_mutex_);
        missions_.erase(id);
        throw;
    }
    m->engine->set_listener([raw = m.get()](const MissionEvent&) { raw->cv.notify_all(); });
    m->runner = std::thread([this, m] { run_loop(m); });
    {
        std::lock_guard lk(missions_mutex_);
        missions_[id] = m;
    }
    std::lock_guard lk(m->m);
    json out = state_of(*m);
    out["snapshot"] = m->engine->snapshot();
    return out;
}

void MissionService::advance(Mission& m) {
    if (m.policy)
        for (auto& cmd : m.policy->decide(*m.engine)) {
            try {
                m.engine->submit(std::move(cmd));
            } catch (const Error&) {
                // an operator got there first
            }
        }
    m.engine->step();
    if (m.engine->terminal()) {
        m.run_state = "finished";
        persist(m);
    }
    m.cv.notify_all();
}

void MissionService::persist(Mission& m) {
    if (m.persisted || opts_.replay_dir.empty()) return;
    m.persisted = true;
    std::filesystem::create_directories(opts_.replay_dir);
    std::ofstream out(std::filesystem::path(opts_.replay_dir) / (m.engine->mission_id() + ".ndjson"), std::ios::binary);
    out << export_replay(*m.engine, m.policy_name);
}

void MissionService::run_loop(std::shared_ptr<Mission> m) {
    using clock = std::chrono::steady_clock;
    std::unique_lock lk(m->m);
    auto next = clock::now();
    while (!m->shutdown) {
        if (m->run_state != "running") {
            m->cv.wait(lk, [&] { return m->shutdown || m->run_state == "running"; });
            next = clock::now();
            continue;
        }
        if (m->speed > 0.0) {
            const auto period = std::chrono::duration<double>(m->engine->scenario().constants.tick_s / m->speed);
            next += std::chrono::duration_cast<clock::duration>(period);
            // Wakes early on pause, abort or shutdown.
            if (m->cv.wait_until(lk, next, [&] { return m->shutdown || m->run_state != "running"; })) continue;
        }
        advance(*m);
        if (m->speed <= 0.0) {
            // Let handlers in between unpaced ticks.
            lk.unlock();
            std::this_thread::yield();
            lk.lock();
        }
    }
}

json MissionService::control(const std::string& id, const json& body) {
    auto m = find(id);
    const std::string cmd = body.value("command", std::string());
    std::unique_lock lk(m->m);
    const bool ended = m->engine->terminal();
    if (cmd == "start") {
        if (ended) throw Error(ErrorCode::invalid_transition, "mission has ended (" + m->engine->outcome() + ")");
        if (m->run_state == "running") throw Error(ErrorCode::invalid_transition, "mission is already running");
        m->run_state = "running";
    } else if (cmd == "pause") {
        if (m->run_state != "running") throw Error(ErrorCode::invalid_transition, "mission is not running");
        m->run_state = "paused";
    } else if (cmd == "step") {
        if (ended) throw Error(ErrorCode::invalid_transition, "mission has ended (" + m->engine->outcome() + ")");
        if (m->run_state == "running") throw Error(ErrorCode::invalid_transition, "pause the mission before stepping");
        const int n = body.value("n", 1);
        if (n < 1) throw Error(ErrorCode::validation, "step needs n >= 1");
        for (int i = 0; i < n && !m->engine->terminal(); ++i) advance(*m);
        if (!m->engine->terminal()) m->run_state = "paused";
    } else if (cmd == "abort") {
        m->engine->abort(body.value("reason", std::string("operator abort")));
        m->run_state = "finished";
        persist(*m);
    } else if (cmd == "set_speed") {
        if (!body.contains("speed") || !body["speed"].is_number()) throw Error(ErrorCode::validation, "set_speed needs a numeric speed");
        const double s = body["speed"].get<double>();
        if (!(s >= 0.0)) throw Error(ErrorCode::validation, "speed must be non-negative");
        m->speed = s;
    } else {
        throw Error(ErrorCode::validation, "unknown command '" + cmd + "' (start, pause, step, abort, set_speed)");
    }
    m->cv.notify_all();
    return state_of(*m);
}

json MissionService::snapshot(const std::string& id) {
    auto m = find(id);
    std::lock_guard lk(m->m);
    json s = m->engine->snapshot();
    s["run_state"] = m->run_state;
    s["speed"] = m->speed;
    return s;
}

json MissionService::approvals(const std::string& id) {
    auto m = find(id);
    std::lock_guard lk(m->m);
    json list = json::array();
    for (const auto& [aid, p] : m->engine->approvals())
        list.push_back({{"approval_id", p.id},
                        {"kind", p.kind},
                        {"purpose", p.purpose},
                        {"clue_id", p.clue_id},
                        {"pass", p.pass},
                        {"created_tick", p.created_tick},
                        {"timeout_tick", p.timeout_tick},
                        {"decision_queued", p.resolution_queued},
                        {"context", p.context}});
    return {{"mission_id", id}, {"tick", m->engine->tick()}, {"approvals", list}};
}

json MissionService::submit(const std::string& id, const json& action) {
    auto m = find(id);
    OperatorCommand cmd = command_from_json(action);
    std::lock_guard lk(m->m);
    m->engine->submit(cmd);
    return {{"accepted", true}, {"mission_id", id}, {"applies_at_tick", m->engine->tick() + 1}, {"action", to_json(cmd)}};
}

std::string MissionService::replay(const std::string& id) {
    auto m = find(id);
    std::lock_guard lk(m->m);
    if (!m->engine->terminal()) throw Error(ErrorCode::conflict, "mission '" + id + "' is still in progress");
    return export_replay(*m->engine, m->policy_name);
}

json MissionService::list() {
    std::vector<std::shared_ptr<Mission>> all;
    {
        std::lock_guard lk(missions_mutex_);
        for (const auto& [id, m] : missions_)
            if (m) all.push_back(m);
    }
    json out = json::array();
    for (const auto& m : all) {
        std::lock_guard lk(m->m);
        out.push_back(state_of(*m));
    }
    return {{"missions", out}};
}

json MissionService::events_since(const std::string& id, std::uint64_t from, std::size_t limit) {
    auto m = find(id);
    std::lock_guard lk(m->m);
    const auto& ev = m->engine->events();
    json list = json::array();
    for (std::uint64_t i = from; i < ev.size() && list.size() < limit; ++i) list.push_back(to_json(ev[i]));
    return {{"events", list}, {"next", from + list.size()}, {"ended", m->engine->terminal()}};
}

int MissionService::start() {
    if (server_) return port_;
    server_ = std::make_unique<httplib::Server>();
    install_routes();
    if (opts_.port == 0) port_ = server_->bind_to_any_port(opts_.host);
    else port_ = server_->bind_to_port(opts_.host, opts_.port) ? opts_.port : -1;
    if (port_ <= 0) {
        server_.reset();
        throw Error(ErrorCode::io, "cannot bind " + opts_.host + ":" + std::to_string(opts_.port));
    }
    listener_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return port_;
}

void MissionService::stop() {
    if (stopping_.exchange(true)) return;
    std::vector<std::shared_ptr<Mission>> all;
    {
        std::lock_guard lk(missions_mutex_);
        for (const auto& [id, m] : missions_)
            if (m) all.push_back(m);
    }
    for (auto& m : all) {
        std::lock_guard lk(m->m);
        m->shutdown = true;
        m->cv.notify_all();
    }
    if (server_) server_->stop();
    if (listener_.joinable()) listener_.join();
    for (auto& m : all)
        if (m->runner.joinable()) m->runner.join();
}

void MissionService::install_routes() {
    auto& srv = *server_;

    auto guarded = [this](auto fn) {
        return [this, fn](const httplib::Request& req, httplib::Response& res) {
            if (!opts_.token.empty()) {
                const std::string expected = "Bearer " + opts_.token;
                const bool header_ok = req.get_header_value("Authorization") == expected;
                const bool query_ok = req.has_param("token") && req.get_param_value("token") == opts_.token;
                if (!header_ok && !query_ok) {
                    send_json(res, 401, error_body(ErrorCode::validation, "missing or wrong bearer token"));
                    return;
                }
            }
            try {
                fn(req, res);
            } catch (const Error& e) {
                send_json(res, http_status(e.code()), error_body(e.code(), e.what()));
            } catch (const json::exception& e) {
                send_json(res, 400, error_body(ErrorCode::parse, e.what()));
            } catch (const std::exception& e) {
                send_json(res, 500, error_body(ErrorCode::io, e.what()));
            }
        };
    };

    srv.Get("/health", [](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, {{"status", "ok"}});
    });

    srv.Get("/missions", guarded([this](const httplib::Request&, httplib::Response& res) { send_json(res, 200, list()); }));

    srv.Post("/missions", guarded([this](const httplib::Request& req, httplib::Response& res) {
        send_json(res, 201, create_mission(parse_body(req)));
    }));

    srv.Post(R"(/missions/([^/]+)/control)", guarded([this](const httplib::Request& req, httplib::Response& res) {
        send_json(res, 200, control(req.matches[1], parse_body(req)));
    }));

    srv.Get(R"(/missions/([^/]+)/snapshot)", guarded([this](const httplib::Request& req, httplib::Response& res) {
        send_json(res, 200, snapshot(req.matches[1]));
    }));

    srv.Get(R"(/missions/([^/]+)/approvals)", guarded([this](const httplib::Request& req, httplib::Response& res) {
        send_json(res, 200, approvals(req.matches[1]));
    }));

    srv.Post(R"(/missions/([^/]+)/approvals)", guarded([this](const httplib::Request& req, httplib::Response& res) {
        send_json(res, 202, submit(req.matches[1], parse_body(req)));
    }));

    srv.Get(R"(/missions/([^/]+)/replay)", guarded([this](const httplib::Request& req, httplib::Response& res) {
        res.set_content(replay(req.matches[1]), "application/x-ndjson");
    }));

    srv.Post("/replays/verify", guarded([](const httplib::Request& req, httplib::Response& res) {
        const auto report = verify_replay_text(req.body);
        send_json(res, 200, to_json(report));
    }));

    srv.Post("/replays/snapshot", guarded([](const httplib::Request& req, httplib::Response& res) {
        if (!req.has_param("seq")) throw Error(ErrorCode::validation, "seq query parameter required");
        const auto seq = std::stoull(req.get_param_value("seq"));
        send_json(res, 200, snapshot_at(parse_replay(req.body), seq));
    }));

    // Server-sent events from ?from=N (or Last-Event-ID + 1). The stream ends
    // after the terminal event has been delivered.
    srv.Get(R"(/missions/([^/]+)/events)", guarded([this](const httplib::Request& req, httplib::Response& res) {
        auto m = find(req.matches[1]);
        std::uint64_t cursor = 0;
        if (req.has_param("from")) cursor = std::stoull(req.get_param_value("from"));
        else if (req.has_header("Last-Event-ID")) cursor = std::stoull(req.get_header_value("Last-Event-ID")) + 1;
        res.set_header("Cache-Control", "no-cache");
        res.set_chunked_content_provider("text/event-stream", [this, m, cursor](std::size_t, httplib::DataSink& sink) mutable {
            std::string chunk;
            bool done = false;
            {
                std::unique_lock lk(m->m);
                m->cv.wait_for(lk, std::chrono::milliseconds(500), [&] {
                    return m->shutdown || m->engine->events().size() > cursor || m->engine->terminal();
                });
                const auto& ev = m->engine->events();
                for (; cursor < ev.size() && chunk.size() < (1u << 20); ++cursor) chunk += sse_frame(ev[cursor]);
                done = m->shutdown || (m->engine->terminal() && cursor >= ev.size());
            }
            if (chunk.empty() && !done) chunk = ": keep-alive\n\n";
            if (!chunk.empty() && !sink.write(chunk.data(), chunk.size())) return false;
            if (done || stopping_) sink.done();
            return true;
        });
    }));
}

} // namespace sar
