#include "sarguard/repair.hpp"
#include "sarguard/text.hpp"

#include "../support/testing.hpp"

#include <nlohmann/json.hpp>

#include <random>

using namespace sar;
using namespace sar::testing;
using nlohmann::json;

namespace {

const StageSchema& schema(int stage) {
    static const std::map<int, StageSchema> schemas = {
        {3, load_stage_schema_file(data_path("schemas/stage3.json"))},
        {4, load_stage_schema_file(data_path("schemas/stage4.json"))},
        {5, load_stage_schema_file(data_path("schemas/stage5.json"))},
    };
    return schemas.at(stage);
}

json manifest() { return json::parse(read_text_file(fixture_path("repair/manifest.json"))); }

Regenerate always(std::optional<std::string> text, int* calls = nullptr) {
    return [text, calls](int, const std::string&) {
        if (calls) ++*calls;
        return text;
    };
}

} // namespace

TEST_CASE("repair corpus") {
    const json m = manifest();
    REQUIRE(m["cases"].size() >= 20);
    int repairable = 0, parsed = 0;
    for (const auto& c : m["cases"]) {
        CAPTURE(c["file"].get<std::string>());
        const std::string raw = read_text_file(fixture_path("repair/" + c["file"].get<std::string>()));
        const auto& sch = schema(c["stage"].get<int>());
        int calls = 0;
        const auto out = validate_and_repair(raw, sch, 2, always("still not json", &calls));
        if (out.ok) CHECK(sch.accepts(out.payload));
        if (c["repairable"].get<bool>()) {
            ++repairable;
            CHECK(out.ok);
            CHECK(out.payload == c["expected"]);
            CHECK(calls == 0);
            if (out.ok) ++parsed;
        } else {
            CHECK_FALSE(out.ok);
            CHECK(calls == 2);
            CHECK_FALSE(out.error.empty());
        }
    }
    CHECK(parsed == repairable);
}

TEST_CASE("well-formed output is not marked repaired") {
    const auto out = validate_and_repair(R"({"relevance": "High", "justification": "ok"})", schema(3), 2, always({}));
    CHECK(out.ok);
    CHECK_FALSE(out.repaired);
    CHECK(out.regenerations == 0);
}

TEST_CASE("prose around a valid block is repaired") {
    const auto out =
        validate_and_repair("Here you go:\n{\"relevance\": \"Low\", \"justification\": \"\"}\nThanks", schema(3), 2, always({}));
    CHECK(out.ok);
    CHECK(out.repaired);
    CHECK(out.payload["relevance"] == "Low");
}

TEST_CASE("a missing mandatory field fails after the budget") {
    int calls = 0;
    const auto out = validate_and_repair(R"({"justification": "?"})", schema(3), 2,
                                         always(R"({"justification": "still no relevance"})", &calls));
    CHECK_FALSE(out.ok);
    CHECK(calls == 2);
    CHECK(out.regenerations == 2);
}

TEST_CASE("regeneration can rescue an attempt") {
    int calls = 0;
    Regenerate regen = [&](int attempt, const std::string& problem) -> std::optional<std::string> {
        ++calls;
        CHECK_FALSE(problem.empty());
        if (attempt < 2) return std::string("nope");
        return std::string(R"({"relevance": "Medium"})");
    };
    const auto out = validate_and_repair("garbage", schema(3), 2, regen);
    CHECK(out.ok);
    CHECK(out.repaired);
    CHECK(out.regenerations == 2);
    CHECK(out.payload["relevance"] == "Medium");
}

TEST_CASE("an unreachable backend during regeneration fails cleanly") {
    const auto out = validate_and_repair("{", schema(4), 3, always(std::nullopt));
    CHECK_FALSE(out.ok);
    CHECK_FALSE(out.error.empty());
}

TEST_CASE("zero budget means no regeneration") {
    int calls = 0;
    const auto out = validate_and_repair("{", schema(4), 0, always(R"({"interp_confidence": "High"})", &calls));
    CHECK_FALSE(out.ok);
    CHECK(calls == 0);
}

TEST_CASE("schema validation reports paths") {
    const auto errs = schema(5).validate(json{{"strategy", "Region Search"}, {"tasks", json::array({{{"kind", "x"}}})}});
    REQUIRE_FALSE(errs.empty());
    CHECK(errs[0].find("tasks") != std::string::npos);
    CHECK(schema(3).accepts(json{{"relevance", "None"}}));
    CHECK_FALSE(schema(3).accepts(json{{"relevance", "None"}, {"extra", 1}}));
}

TEST_CASE("extract_json_object respects strings") {
    CHECK(extract_json_object(R"(a {"x": "}"} b)") == std::optional<std::string>(R"({"x": "}"})"));
    CHECK_FALSE(extract_json_object("no braces").has_value());
    CHECK_FALSE(extract_json_object("{ unbalanced").has_value());
}

TEST_CASE("randomly mangled outputs never yield a schema-violating payload") {
    const std::vector<std::pair<int, std::string>> seeds = {
        {3, R"({"relevance": "High", "justification": "red hat"})"},
        {4, R"({"interp_confidence": "Medium", "implication": "shore", "knowledge_ids": ["kb-1"]})"},
        {5, R"({"strategy": "Waterways Search", "inspect": true, "tasks": [{"kind": "water-sweep", "note": ""}]})"},
    };
    const std::string junk = "{}[],:\"' \n`abcXYZ019-";
    std::mt19937_64 rng(99);
    int ok = 0;
    for (int i = 0; i < 3000; ++i) {
        const auto& [stage, text] = seeds[rng() % seeds.size()];
        std::string s = text;
        for (int k = 0, n = 1 + static_cast<int>(rng() % 4); k < n; ++k) {
            const std::size_t pos = rng() % (s.size() + 1);
            switch (rng() % 3) {
            case 0: s.insert(pos, 1, junk[rng() % junk.size()]); break;
            case 1:
                if (pos < s.size()) s.erase(pos, 1);
                break;
            default:
                if (pos < s.size()) s[pos] = junk[rng() % junk.size()];
            }
        }
        const auto out = validate_and_repair(s, schema(stage), 1, always(std::nullopt));
        if (out.ok) {
            ++ok;
            REQUIRE(schema(stage).accepts(out.payload));
        }
    }
    CHECK(ok > 0);
}
