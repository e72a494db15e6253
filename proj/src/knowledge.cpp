#include "sarguard/knowledge.hpp"

#include "sarguard/error.hpp"
#include "sarguard/text.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace sar {

namespace {

std::vector<std::string> split_path(const std::string& tag) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : tag) {
        if (c == '/') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    parts.push_back(cur);
    return parts;
}

} // namespace

int tag_overlap(const std::string& a, const std::string& b) {
    auto pa = split_path(a);
    auto pb = split_path(b);
    const std::size_t n = std::min(pa.size(), pb.size());
    for (std::size_t i = 0; i < n; ++i)
        if (pa[i] != pb[i]) return 0;
    return static_cast<int>(n);
}

nlohmann::json to_json(const KnowledgeEntry& e) {
    nlohmann::json j = {{"id", e.id},
                        {"text", e.text},
                        {"tags", e.tags},
                        {"applicable_stages", e.applicable_stages},
                        {"keywords", e.keywords},
                        {"provenance", e.provenance}};
    if (e.suggests_strategy) j["suggests_strategy"] = std::string(to_string(*e.suggests_strategy));
    return j;
}

KnowledgeBase::KnowledgeBase(std::vector<KnowledgeEntry> entries) : entries_(std::move(entries)) {
    std::set<std::string> ids;
    for (const auto& e : entries_) {
        if (e.id.empty()) throw Error(ErrorCode::validation, "knowledge entry with empty id");
        if (!ids.insert(e.id).second) throw Error(ErrorCode::validation, "duplicate knowledge entry '" + e.id + "'");
        if (e.tags.empty()) throw Error(ErrorCode::validation, "knowledge entry '" + e.id + "' has no tags");
        for (int st : e.applicable_stages)
            if (st < 3 || st > 5)
                throw Error(ErrorCode::validation, "knowledge entry '" + e.id + "' lists stage outside 3-5");
    }
}

const KnowledgeEntry* KnowledgeBase::find(const std::string& id) const {
    for (const auto& e : entries_)
        if (e.id == id) return &e;
    return nullptr;
}

std::vector<KnowledgeHit> KnowledgeBase::retrieve(const std::vector<std::string>& query_tags, const std::string& text,
                                                  std::size_t k, int stage) const {
    const auto words = tokenize(text);
    const std::set<std::string> word_set(words.begin(), words.end());
    std::vector<KnowledgeHit> hits;
    for (const auto& e : entries_) {
        if (stage != 0 && !e.applicable_stages.empty() &&
            std::find(e.applicable_stages.begin(), e.applicable_stages.end(), stage) == e.applicable_stages.end())
            continue;
        int tag_score = 0;
        for (const auto& q : query_tags) {
            int best = 0;
            for (const auto& t : e.tags) best = std::max(best, tag_overlap(q, t));
            tag_score += best;
        }
        if (tag_score == 0) continue;
        int unmatched = 0;
        for (const auto& t : e.tags)
            if (std::none_of(query_tags.begin(), query_tags.end(), [&](const std::string& q) { return tag_overlap(q, t) > 0; }))
                ++unmatched;
        int kw = 0;
        for (const auto& w : e.keywords)
            if (word_set.count(to_lower(w))) ++kw;
        hits.push_back({&e, tag_score, kw, unmatched});
    }
    std::sort(hits.begin(), hits.end(), [](const KnowledgeHit& a, const KnowledgeHit& b) {
        if (a.tag_score != b.tag_score) return a.tag_score > b.tag_score;
        if (a.unmatched_tags != b.unmatched_tags) return a.unmatched_tags < b.unmatched_tags;
        if (a.keyword_score != b.keyword_score) return a.keyword_score > b.keyword_score;
        return a.entry->id < b.entry->id;
    });
    if (hits.size() > k) hits.resize(k);
    return hits;
}

KnowledgeBase parse_knowledge_base(const nlohmann::json& doc) {
    try {
        const auto& list = doc.is_object() ? doc.at("entries") : doc;
        std::vector<KnowledgeEntry> entries;
        for (const auto& j : list) {
            KnowledgeEntry e;
            e.id = j.at("id").get<std::string>();
            e.text = j.at("text").get<std::string>();
            e.tags = j.at("tags").get<std::vector<std::string>>();
            e.applicable_stages = j.value("applicable_stages", std::vector<int>{});
            e.keywords = j.value("keywords", std::vector<std::string>{});
            if (auto s = j.find("suggests_strategy"); s != j.end() && !s->is_null())
                e.suggests_strategy = strategy_from_string(s->get<std::string>());
            e.provenance = j.value("provenance", std::string("authored"));
            entries.push_back(std::move(e));
        }
        return KnowledgeBase(std::move(entries));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::parse, std::string("malformed knowledge base: ") + e.what());
    }
}

KnowledgeBase load_knowledge_base_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io, "cannot open knowledge base '" + path + "'");
    try {
        return parse_knowledge_base(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::parse, std::string("knowledge base is not valid JSON: ") + e.what());
    }
}

} // namespace sar
