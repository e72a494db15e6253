#pragma once

#include "sarguard/strategy.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace sar {

struct KnowledgeEntry {
    std::string id;
    std::string text;
    std::vector<std::string> tags;  // hierarchical paths, "clue-location/water"
    std::vector<int> applicable_stages;
    std::vector<std::string> keywords;
    std::optional<Strategy> suggests_strategy;
    std::string provenance;
};

nlohmann::json to_json(const KnowledgeEntry& e);

struct KnowledgeHit {
    const KnowledgeEntry* entry = nullptr;
    int tag_score = 0;
    int keyword_score = 0;
    int unmatched_tags = 0;  // entry tags the query does not touch
};

class KnowledgeBase {
public:
    KnowledgeBase() = default;
    explicit KnowledgeBase(std::vector<KnowledgeEntry> entries);

    const std::vector<KnowledgeEntry>& entries() const noexcept { return entries_; }
    const KnowledgeEntry* find(const std::string& id) const;

    /// Scores entries by tag-path overlap; ties go to entries whose own tags are
    /// all matched, then to keyword hits in `text`, then to the lower id. Entries with no tag overlap are never returned.
    /// `stage` of 0 disables the applicable-stage filter.
    std::vector<KnowledgeHit> retrieve(const std::vector<std::string>& query_tags, const std::string& text,
                                       std::size_t k, int stage = 0) const;

private:
    std::vector<KnowledgeEntry> entries_;
};

/// Number of leading path components two tags share when one is an ancestor
/// of (or equal to) the other; 0 otherwise.
int tag_overlap(const std::string& a, const std::string& b);

KnowledgeBase parse_knowledge_base(const nlohmann::json& doc);
KnowledgeBase load_knowledge_base_file(const std::string& path);

} // namespace sar
