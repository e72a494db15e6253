#pragma once

#include "sarguard/engine.hpp"
#include "sarguard/runner.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace sar {

inline constexpr int kApiVersion = 1;

struct ServiceOptions {
    std::string host = "127.0.0.1";
    int port = 0;               // 0 picks a free port
    std::string token;          // static bearer token; empty disables auth
    std::string replay_dir;     // finished missions are written here when set
    std::string backend = "stub";
    double default_speed = 10.0;  // simulated seconds per wall-clock second; 0 runs unpaced
};

/// One engine per mission, each driven by its own runner thread. HTTP
/// handlers and the runner share the engine under the mission's mutex;
/// event streams wait on its condition variable.
class MissionService {
public:
    explicit MissionService(ServiceOptions opts = {});
    ~MissionService();
    MissionService(const MissionService&) = delete;
    MissionService& operator=(const MissionService&) = delete;

    /// Binds and serves in a background thread; returns the bound port.
    int start();
    void stop();
    int port() const noexcept { return port_; }

    // The operations behind the routes, usable without HTTP. All throw sar::Error.

    /// body: {"scenario": {...} | "scenario_path": "...", "mission_id"?, "seed"?, "config"?, "policy"?}
    nlohmann::json create_mission(const nlohmann::json& body);
    /// body: {"command": "start"|"pause"|"step"|"abort"|"set_speed", "n"?, "speed"?, "reason"?}
    nlohmann::json control(const std::string& id, const nlohmann::json& body);
    nlohmann::json snapshot(const std::string& id);
    nlohmann::json approvals(const std::string& id);
    nlohmann::json submit(const std::string& id, const nlohmann::json& action);
    std::string replay(const std::string& id);
    nlohmann::json list();
    /// Events with seq >= from (at most `limit`), plus whether the mission has ended.
    nlohmann::json events_since(const std::string& id, std::uint64_t from, std::size_t limit = 1000);

private:
    struct Mission {
        std::mutex m;
        std::condition_variable cv;
        std::unique_ptr<MissionEngine> engine;
        std::unique_ptr<OperatorPolicy> policy;
        std::string policy_name = "operator";
        std::string run_state = "ready";  // ready | running | paused | finished
        double speed = 10.0;
        bool shutdown = false;
        bool persisted = false;
        std::thread runner;
    };

    std::shared_ptr<Mission> find(const std::string& id);
    void run_loop(std::shared_ptr<Mission> m);
    void advance(Mission& m);  // one tick; caller holds the lock
    void persist(Mission& m);
    nlohmann::json state_of(const Mission& m) const;
    void install_routes();

    ServiceOptions opts_;
    std::unique_ptr<httplib::Server> server_;
    std::thread listener_;
    int port_ = 0;
    std::atomic<bool> stopping_{false};

    std::mutex missions_mutex_;
    std::map<std::string, std::shared_ptr<Mission>> missions_;
    int mission_counter_ = 0;
};

} // namespace sar
