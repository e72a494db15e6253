#pragma once

#include "sarguard/scenario.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <string_view>
#include <vector>

namespace sar {

enum class TaskKind { waypoint_sweep, trail_follow, shoreline_follow, water_sweep, circle_inspect, contour_follow, shelter_visit };
enum class Provenance { planner, pipeline, operator_ };

std::string_view to_string(TaskKind k) noexcept;
std::string_view to_string(Provenance p) noexcept;
TaskKind task_kind_from_string(std::string_view s);
Provenance provenance_from_string(std::string_view s);

struct Task {
    std::string id;
    TaskKind kind = TaskKind::waypoint_sweep;
    std::vector<Vec2> path;  // flown in order once the first point is reached
    Strategy strategy = Strategy::Region;
    int priority = 0;        // lower runs first
    Provenance provenance = Provenance::planner;
    std::string clue_id;     // set for inspection tasks
    std::string directed_agent;  // pipeline tasks may target the detecting agent
};

nlohmann::json to_json(const Task& t);
Task task_from_json(const nlohmann::json& j);

/// Cells a strategy is responsible for, as grid indices in ascending order.
/// Cells whose centre the envelope forbids are excluded.
std::vector<std::size_t> eligible_cells(Strategy s, const Scenario& scenario);

/// Planner tasks for a strategy. Empty when the strategy has no eligible cells.
std::vector<Task> generate_tasks(Strategy s, const Scenario& scenario);

/// Octagonal orbit around `center` used for close-up inspections.
Task make_inspection_task(const std::string& id, const std::string& clue_id, Vec2 center, double radius_m,
                          Strategy strategy, Provenance provenance, const std::string& directed_agent);

/// Cells touched by any camera footprint so far. Never shrinks.
class CoverageMap {
public:
    explicit CoverageMap(const TerrainGrid& grid);

    /// Marks every cell whose centre lies within `radius` of `p`; returns the newly covered ones.
    std::vector<std::size_t> observe(Vec2 p, double radius);
    bool covered(std::size_t index) const { return covered_.at(index) != 0; }
    std::size_t covered_count() const noexcept { return count_; }

    /// Fraction of `cells` covered; 1.0 for an empty set.
    double fraction(const std::vector<std::size_t>& cells) const;

private:
    const TerrainGrid* grid_;
    std::vector<unsigned char> covered_;
    std::size_t count_ = 0;
};

} // namespace sar
