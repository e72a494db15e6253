#include "sarguard/backend.hpp"

#include "sarguard/error.hpp"
#include "sarguard/text.hpp"

#include <httplib.h>

#include <algorithm>
#include <set>
#include <sstream>

namespace sar {

using nlohmann::json;

json prompt_context(const std::string& prompt) {
    const std::string marker = kContextMarker;
    auto pos = prompt.rfind(marker);
    if (pos == std::string::npos) return nullptr;
    auto end = prompt.find('\n', pos);
    const std::string body = prompt.substr(pos + marker.size(), end == std::string::npos ? std::string::npos : end - pos - marker.size());
    try {
        return json::parse(body);
    } catch (const json::parse_error&) {
        return nullptr;
    }
}

namespace {

const std::set<std::string> kColours = {"red", "blue", "yellow", "green", "purple", "brown", "gray", "grey",
                                        "black", "white", "orange", "pink", "tan", "navy"};
const std::set<std::string> kAdultWords = {"adult", "adults", "men's", "mens", "man's", "women's", "old"};
const std::set<std::string> kChildWords = {"child's", "childs", "kid's", "toddler", "toy", "baby"};

std::set<std::string> words_of(const json& clue) {
    std::set<std::string> w;
    for (auto& t : tokenize(clue.value("description", std::string()))) w.insert(t);
    for (auto& t : tokenize(clue.value("label", std::string()))) w.insert(t);
    return w;
}

bool mentions(const std::set<std::string>& words, const std::string& noun) {
    for (const auto& part : tokenize(noun))
        if (!(words.count(part) || words.count(part + "s") || words.count(part + "es"))) return false;
    return !noun.empty();
}

std::string location_rule(const json& tags) {
    auto has = [&](const char* leaf) {
        for (const auto& t : tags)
            if (t.get<std::string>() == std::string("clue-location/") + leaf) return true;
        return false;
    };
    if (has("water") || has("shoreline")) return "Waterways Search";
    if (has("trail")) return "Trail Search";
    if (has("building")) return "Shelter Search";
    if (has("steep")) return "Contour Search";
    return "Region Search";
}

json tasks_for(const std::string& strategy) {
    if (strategy == "Waterways Search")
        return json::array({{{"kind", "shoreline-follow"}, {"note", "follow the shoreline loop"}},
                            {{"kind", "water-sweep"}, {"note", "sweep the open water in lanes"}}});
    if (strategy == "Trail Search") return json::array({{{"kind", "trail-follow"}, {"note", "follow trails, downhill first"}}});
    if (strategy == "Shelter Search") return json::array({{{"kind", "shelter-visit"}, {"note", "orbit nearby structures"}}});
    if (strategy == "Contour Search") return json::array({{{"kind", "contour-follow"}, {"note", "fly elevation bands"}}});
    return json::array({{{"kind", "waypoint-sweep"}, {"note", "expanding sweep around the last known point"}}});
}

} // namespace

json StubBackend::relevance(const json& ctx) {
    const json& clue = ctx.at("clue");
    const json& profile = ctx.at("profile");
    const auto words = words_of(clue);
    const std::string age = profile.value("age_group", std::string());
    const std::string cv = clue.value("cv_confidence", std::string("Low"));

    std::set<std::string> clue_colours;
    for (const auto& w : words)
        if (kColours.count(w)) clue_colours.insert(w == "grey" ? "gray" : w);

    auto verdict = [](const char* level, std::string why) { return json{{"relevance", level}, {"justification", std::move(why)}}; };

    if (age == "child")
        for (const auto& w : words)
            if (kAdultWords.count(w)) return verdict("None", "described as '" + w + "', inconsistent with a child");
    if (age == "adult")
        for (const auto& w : words)
            if (kChildWords.count(w)) return verdict("None", "described as '" + w + "', inconsistent with an adult");

    std::set<std::string> profile_colours;
    for (const auto& item : profile.value("items", json::array())) {
        const std::string noun = item.value("item", std::string());
        std::string colour = to_lower(item.value("color", std::string()));
        if (colour == "grey") colour = "gray";
        if (!colour.empty()) profile_colours.insert(colour);
        bool match = mentions(words, noun);
        for (const auto& alias : item.value("aliases", json::array())) match = match || mentions(words, alias.get<std::string>());
        if (!match) continue;
        if (colour.empty() || clue_colours.empty() || clue_colours.count(colour))
            return verdict("High", "matches the subject's " + (colour.empty() ? noun : colour + " " + noun));
        return verdict("None", "a " + noun + " but not the subject's colour (" + colour + ")");
    }
    for (const auto& c : clue_colours)
        if (profile_colours.count(c)) {
            if (cv != "High") return verdict("Medium", "colour " + c + " matches the subject's clothing; object unclear");
            return verdict("None", "confidently identified object that the subject is not carrying");
        }
    return verdict("None", "no link to the subject's description");
}

json StubBackend::tactics(const json& ctx) {
    const json& clue = ctx.at("clue");
    const json& kb = ctx.value("knowledge", json::array());
    const std::string tag = clue.value("location_tag", std::string());
    if (kb.empty())
        return {{"implication", "no guidance retrieved for this location"}, {"interp_confidence", "Low"}, {"knowledge_ids", json::array()}};
    json ids = json::array();
    for (const auto& e : kb) ids.push_back(e.at("id"));
    const json& top = kb.front();
    bool exact = false;
    for (const auto& t : top.value("tags", json::array())) exact = exact || t.get<std::string>() == tag;
    return {{"implication", top.value("text", std::string())},
            {"interp_confidence", exact ? "High" : "Medium"},
            {"knowledge_ids", ids}};
}

json StubBackend::plan(const json& ctx) {
    const json& clue = ctx.at("clue");
    const std::string relevance = ctx.value("relevance", std::string("None"));
    const std::string cv = ctx.value("cv_confidence", std::string("Low"));
    std::string strategy;
    std::string why;
    for (const auto& e : ctx.value("knowledge", json::array()))
        if (e.contains("suggests_strategy") && !e["suggests_strategy"].is_null()) {
            strategy = e["suggests_strategy"].get<std::string>();
            why = "knowledge entry " + e.value("id", std::string()) + " recommends it";
            break;
        }
    if (strategy.empty()) {
        strategy = location_rule(clue.value("location_tags", json::array()));
        why = "clue location suggests it";
    }
    const bool inspect = cv != "High" && (relevance == "High" || relevance == "Medium") &&
                         clue.value("has_closeup", false) && !clue.value("inspected", false);
    if (inspect)
        return {{"strategy", strategy},
                {"inspect", true},
                {"tasks", json::array({{{"kind", "circle-inspect"}, {"note", "close-up orbit before committing"}}})},
                {"rationale", "classification is uncertain; inspect the object first"}};
    return {{"strategy", strategy}, {"inspect", false}, {"tasks", tasks_for(strategy)}, {"rationale", why}};
}

std::string StubBackend::complete(const std::string& prompt) {
    json ctx = prompt_context(prompt);
    if (!ctx.is_object()) return "I could not find the mission context in the prompt.";
    switch (ctx.value("stage", 0)) {
    case 3: return relevance(ctx).dump();
    case 4: return tactics(ctx).dump();
    case 5: return plan(ctx).dump();
    default: return "{}";
    }
}

ScriptedBackend::ScriptedBackend(std::deque<std::string> responses, std::shared_ptr<Backend> fallback)
    : responses_(std::move(responses)), fallback_(std::move(fallback)) {}

std::string ScriptedBackend::complete(const std::string& prompt) {
    ++calls_;
    prompts_.push_back(prompt);
    if (!responses_.empty()) {
        std::string r = std::move(responses_.front());
        responses_.pop_front();
        return r;
    }
    if (fallback_) return fallback_->complete(prompt);
    throw BackendUnavailable("scripted backend has no responses left");
}

std::string ChatClient::complete(const std::string& prompt) {
    httplib::Client cli(opts_.host, opts_.port);
    cli.set_connection_timeout(opts_.timeout_s, 0);
    cli.set_read_timeout(opts_.timeout_s, 0);
    httplib::Headers headers;
    if (!opts_.api_key.empty()) headers.emplace("Authorization", "Bearer " + opts_.api_key);
    const json body = {{"model", opts_.model},
                       {"temperature", 0},
                       {"messages", json::array({{{"role", "user"}, {"content", prompt}}})}};
    auto res = cli.Post(opts_.path, headers, body.dump(), "application/json");
    if (!res) throw BackendUnavailable("chat backend unreachable: " + httplib::to_string(res.error()));
    if (res->status != 200) throw BackendUnavailable("chat backend returned HTTP " + std::to_string(res->status));
    try {
        return json::parse(res->body).at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
        // Hand the raw body to the repair loop rather than failing outright.
        return res->body;
    }
}

std::unique_ptr<Backend> make_backend(const std::string& spec) {
    if (spec.empty() || spec == "stub") return std::make_unique<StubBackend>();
    if (spec.rfind("chat:", 0) == 0) {
        ChatClient::Options o;
        std::vector<std::string> parts;
        std::stringstream ss(spec.substr(5));
        for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
        if (parts.size() >= 1 && !parts[0].empty()) o.host = parts[0];
        if (parts.size() >= 2) o.port = std::stoi(parts[1]);
        if (parts.size() >= 3) o.model = parts[2];
        return std::make_unique<ChatClient>(o);
    }
    throw Error(ErrorCode::validation, "unknown backend '" + spec + "' (expected stub or chat:host:port:model)");
}

} // namespace sar
