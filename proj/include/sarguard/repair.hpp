#pragma once

#include <nlohmann/json.hpp>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace sar {

/// A small JSON-schema subset: type, properties, required, enum, default,
/// items, minimum/maximum, additionalProperties=false.
class StageSchema {
public:
    StageSchema() = default;
    explicit StageSchema(nlohmann::json doc);

    int stage() const noexcept { return stage_; }
    const nlohmann::json& document() const noexcept { return doc_; }

    /// Every violation as "path: message"; empty when `value` conforms.
    std::vector<std::string> validate(const nlohmann::json& value) const;
    bool accepts(const nlohmann::json& value) const { return validate(value).empty(); }

private:
    nlohmann::json doc_;
    int stage_ = 0;
};

StageSchema load_stage_schema_file(const std::string& path);

struct RepairOutcome {
    bool ok = false;
    nlohmann::json payload;
    bool repaired = false;     // mechanical fixes or regeneration were needed
    int regenerations = 0;
    std::string raw;           // text that produced the payload (or the last attempt)
    std::vector<std::string> notes;
    std::string error;
};

/// Mechanical repair only: strip fences and prose, fix quotes and trailing
/// commas, match keys and enum values case-insensitively, coerce scalars and
/// fill defaults. Returns a conforming payload or nullopt.
std::optional<nlohmann::json> mechanical_repair(const std::string& raw, const StageSchema& schema,
                                                std::vector<std::string>& notes);

/// Asked for a fresh completion after a failed attempt; nullopt means the
/// backend could not answer.
using Regenerate = std::function<std::optional<std::string>(int attempt, const std::string& problem)>;

/// Parse, then repair, then regenerate up to `budget` times. A returned
/// payload always conforms to `schema`.
RepairOutcome validate_and_repair(const std::string& raw, const StageSchema& schema, int budget,
                                  const Regenerate& regenerate);

/// First balanced {...} block in `text`, respecting string literals.
std::optional<std::string> extract_json_object(const std::string& text);

} // namespace sar
