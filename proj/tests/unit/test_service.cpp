#include "sarguard/replay.hpp"
#include "sarguard/service.hpp"

#include "../support/missions.hpp"
#include "../support/testing.hpp"

#include <httplib.h>

#include <chrono>
#include <thread>

using namespace sar;
using namespace sar::testing;
using nlohmann::json;

namespace {

const std::string kToken = "test-token";

struct Fixture {
    MissionService service{ServiceOptions{.token = kToken, .default_speed = 0.0}};
    std::unique_ptr<httplib::Client> client;

    Fixture() {
        const int port = service.start();
        client = std::make_unique<httplib::Client>("127.0.0.1", port);
        client->set_bearer_token_auth(kToken);
        client->set_read_timeout(30, 0);
    }

    json post(const std::string& path, const json& body, int expect) {
        auto res = client->Post(path, body.dump(), "application/json");
        REQUIRE(res);
        CAPTURE(res->body);
        CHECK(res->status == expect);
        return json::parse(res->body);
    }
    json get(const std::string& path, int expect = 200) {
        auto res = client->Get(path);
        REQUIRE(res);
        CAPTURE(res->body);
        CHECK(res->status == expect);
        return json::parse(res->body);
    }
    json create(const std::string& id, const std::string& scenario = "rockies") {
        return post("/missions", {{"scenario_path", scenario_path(scenario)}, {"mission_id", id}, {"seed", 7}}, 201);
    }
    json step(const std::string& id, int n) { return post("/missions/" + id + "/control", {{"command", "step"}, {"n", n}}, 200); }
    void wait_finished(const std::string& id) {
        for (int i = 0; i < 2000; ++i) {
            if (get("/missions/" + id + "/snapshot")["run_state"] == "finished") return;
            std::this_thread::sleep_for(std::chrono::milliseconds(10));
        }
        FAIL("mission did not finish");
    }
    // Reads the whole event stream and returns the ids of its frames.
    std::vector<std::uint64_t> stream(const std::string& path, std::string* raw = nullptr) {
        std::string body;
        auto res = client->Get(path, [&](const char* data, std::size_t n) {
            body.append(data, n);
            return true;
        });
        REQUIRE(res);
        CHECK(res->status == 200);
        std::vector<std::uint64_t> ids;
        std::size_t pos = 0;
        while ((pos = body.find("id: ", pos)) != std::string::npos) {
            if (pos == 0 || body[pos - 1] == '\n') ids.push_back(std::stoull(body.substr(pos + 4)));
            pos += 4;
        }
        if (raw) *raw = body;
        return ids;
    }
};

bool contiguous(const std::vector<std::uint64_t>& ids, std::uint64_t from) {
    for (std::size_t i = 0; i < ids.size(); ++i)
        if (ids[i] != from + i) return false;
    return true;
}

} // namespace

TEST_CASE("creating missions") {
    Fixture f;
    const auto created = f.create("r1");
    CHECK(created["mission_id"] == "r1");
    CHECK(created["run_state"] == "ready");
    CHECK(created["api_version"] == kApiVersion);
    CHECK(created["snapshot"]["dominant"] == "region");
    CHECK(created["snapshot"]["tick"] == 0);

    f.post("/missions", {{"scenario_path", scenario_path("rockies")}, {"mission_id", "r1"}}, 409);
    CHECK(f.post("/missions", json::array({1, 2}), 422)["error"]["code"] == "validation");
    f.post("/missions", {{"mission_id", "x"}}, 422);
    auto res = f.client->Post("/missions", "{not json", "application/json");
    REQUIRE(res);
    CHECK(res->status == 400);
    auto bad = json::parse(std::ifstream(scenario_path("rockies")));
    bad["schema_version"] = 2;
    f.post("/missions", {{"scenario", bad}}, 415);

    CHECK(f.get("/missions")["missions"].size() == 1);
    f.get("/missions/nope/snapshot", 404);
}

TEST_CASE("the token is required") {
    Fixture f;
    httplib::Client anon("127.0.0.1", f.service.port());
    auto res = anon.Get("/missions");
    REQUIRE(res);
    CHECK(res->status == 401);
    res = anon.Get("/missions?token=" + kToken);
    REQUIRE(res);
    CHECK(res->status == 200);
    res = anon.Get("/health");
    REQUIRE(res);
    CHECK(res->status == 200);
}

TEST_CASE("run control") {
    Fixture f;
    f.create("r1");
    CHECK(f.step("r1", 100)["tick"] == 100);
    CHECK(f.get("/missions/r1/snapshot")["tick"] == 100);
    CHECK(f.step("r1", 1)["tick"] == 101);
    f.post("/missions/r1/control", {{"command", "step"}, {"n", 0}}, 422);
    f.post("/missions/r1/control", {{"command", "dance"}}, 422);
    f.post("/missions/r1/control", {{"command", "pause"}}, 409);
    f.post("/missions/r1/control", {{"command", "set_speed"}, {"speed", -1}}, 422);
    CHECK(f.post("/missions/r1/control", {{"command", "set_speed"}, {"speed", 2.5}}, 200)["speed"] == 2.5);

    f.get("/missions/r1/replay", 409);
    const auto aborted = f.post("/missions/r1/control", {{"command", "abort"}, {"reason", "weather"}}, 200);
    CHECK(aborted["outcome"] == "aborted");
    CHECK(aborted["run_state"] == "finished");
    f.post("/missions/r1/control", {{"command", "start"}}, 409);
    f.post("/missions/r1/control", {{"command", "step"}}, 409);
    f.post("/missions/r1/approvals", {{"decision", "reset"}}, 409);
}

TEST_CASE("pacing does not change what happens") {
    Fixture f;
    f.create("fast");
    f.create("slow");
    f.post("/missions/slow/control", {{"command", "set_speed"}, {"speed", 500}}, 200);
    f.post("/missions/fast/control", {{"command", "start"}}, 200);
    f.post("/missions/slow/control", {{"command", "start"}}, 200);
    f.post("/missions/slow/control", {{"command", "pause"}}, 200);
    f.post("/missions/slow/control", {{"command", "set_speed"}, {"speed", 0}}, 200);
    f.post("/missions/slow/control", {{"command", "start"}}, 200);
    f.wait_finished("fast");
    f.wait_finished("slow");
    // Operator-less missions: the same seed gives the same log whatever the wall clock did.
    auto a = f.client->Get("/missions/fast/replay");
    auto b = f.client->Get("/missions/slow/replay");
    REQUIRE(a);
    REQUIRE(b);
    auto ra = parse_replay(a->body);
    auto rb = parse_replay(b->body);
    REQUIRE(ra.events.size() == rb.events.size());
    for (std::size_t i = 0; i < ra.events.size(); ++i) {
        auto ja = to_json(ra.events[i]);
        auto jb = to_json(rb.events[i]);
        ja["data"].erase("mission_id");
        jb["data"].erase("mission_id");
        REQUIRE(ja == jb);
    }
}

TEST_CASE("approvals over HTTP") {
    Fixture f;
    f.create("r1");
    auto list = f.get("/missions/r1/approvals");
    CHECK(list["approvals"].empty());
    f.post("/missions/r1/approvals", {{"decision", "approve"}, {"approval_id", "appr-0042"}}, 404);
    f.post("/missions/r1/approvals", {{"decision", "shrug"}}, 422);

    // Approve everything as it comes, until the switch to the water search is asked for.
    std::string switch_id;
    for (int i = 0; i < 3000 && switch_id.empty(); ++i) {
        f.step("r1", 1);
        const auto pending = f.get("/missions/r1/approvals");
        for (const auto& a : pending["approvals"]) {
            if (a["decision_queued"] == true) continue;
            if (a["kind"] == "strategy-switch" && a["context"].value("proposed_strategy", "") == "waterways") {
                switch_id = a["approval_id"];
                break;
            }
            f.post("/missions/r1/approvals", {{"decision", "approve"}, {"approval_id", a["approval_id"]}}, 202);
        }
    }
    REQUIRE_FALSE(switch_id.empty());
    const int tick = f.get("/missions/r1/snapshot")["tick"];
    const auto accepted = f.post("/missions/r1/approvals", {{"decision", "approve"}, {"approval_id", switch_id}, {"operator", "ic"}}, 202);
    CHECK(accepted["applies_at_tick"] == tick + 1);
    f.post("/missions/r1/approvals", {{"decision", "reject"}, {"approval_id", switch_id}}, 409);
    f.step("r1", 1);

    const auto snap = f.get("/missions/r1/snapshot");
    CHECK(snap["active_strategy"] == "waterways");
    bool water_assigned = false;
    for (const auto& t : snap["tasks"]["assigned"]) water_assigned |= t["strategy"] == "waterways";
    CHECK(water_assigned);
    f.post("/missions/r1/approvals", {{"decision", "approve"}, {"approval_id", switch_id}}, 409);

    // Let the mission run on its own to the end; the log verifies.
    f.post("/missions/r1/control", {{"command", "start"}}, 200);
    f.wait_finished("r1");
    auto log = f.client->Get("/missions/r1/replay");
    REQUIRE(log);
    CHECK(log->status == 200);
    const auto report = f.post("/replays/verify", json(), 200);  // empty body
    CHECK(report["ok"] == false);
    auto res = f.client->Post("/replays/verify", log->body, "application/x-ndjson");
    REQUIRE(res);
    CHECK(json::parse(res->body)["ok"] == true);
    res = f.client->Post("/replays/snapshot?seq=0", log->body, "application/x-ndjson");
    REQUIRE(res);
    CHECK(json::parse(res->body)["seq"] == 0);
}

TEST_CASE("event streams") {
    Fixture f;
    f.create("r1");

    SUBCASE("a live subscriber sees every event once") {
        std::vector<std::uint64_t> ids;
        std::thread reader([&] {
            Fixture* fp = &f;
            httplib::Client c("127.0.0.1", fp->service.port());
            c.set_bearer_token_auth(kToken);
            c.set_read_timeout(30, 0);
            std::string body;
            c.Get("/missions/r1/events?from=0", [&](const char* d, std::size_t n) {
                body.append(d, n);
                return true;
            });
            std::size_t pos = 0;
            while ((pos = body.find("\nid: ", pos)) != std::string::npos || (ids.empty() && body.rfind("id: ", 0) == 0)) {
                if (ids.empty() && body.rfind("id: ", 0) == 0 && pos != 0) ids.push_back(std::stoull(body.substr(4)));
                if (pos == std::string::npos) break;
                ids.push_back(std::stoull(body.substr(pos + 5)));
                pos += 5;
            }
        });
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
        f.post("/missions/r1/control", {{"command", "start"}}, 200);
        reader.join();
        const auto total = f.get("/missions/r1/snapshot")["seq"].get<std::uint64_t>() + 1;
        CHECK(ids.size() == total);
        CHECK(contiguous(ids, 0));
    }
    SUBCASE("resuming and parallel subscribers") {
        f.post("/missions/r1/control", {{"command", "start"}}, 200);
        f.wait_finished("r1");
        const auto total = f.get("/missions/r1/snapshot")["seq"].get<std::uint64_t>() + 1;
        std::string raw_a, raw_b;
        const auto all = f.stream("/missions/r1/events?from=0", &raw_a);
        CHECK(all.size() == total);
        CHECK(contiguous(all, 0));
        f.stream("/missions/r1/events?from=0", &raw_b);
        CHECK(raw_a == raw_b);

        const std::uint64_t k = total / 2;
        const auto tail = f.stream("/missions/r1/events?from=" + std::to_string(k));
        CHECK(tail.size() == total - k);
        CHECK(contiguous(tail, k));

        httplib::Headers h{{"Last-Event-ID", std::to_string(k)}};
        std::string body;
        auto res = f.client->Get("/missions/r1/events", h, [&](const char* d, std::size_t n) {
            body.append(d, n);
            return true;
        });
        REQUIRE(res);
        CHECK(body.rfind("id: " + std::to_string(k + 1) + "\n", 0) == 0);

        const auto page = f.service.events_since("r1", k, 5);
        CHECK(page["events"].size() == 5);
        CHECK(page["next"] == k + 5);
        CHECK(page["ended"] == true);
    }
}
