#include "sarguard/tasks.hpp"

#include "sarguard/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

namespace sar {

std::string_view to_string(TaskKind k) noexcept {
    switch (k) {
    case TaskKind::waypoint_sweep: return "waypoint-sweep";
    case TaskKind::trail_follow: return "trail-follow";
    case TaskKind::shoreline_follow: return "shoreline-follow";
    case TaskKind::water_sweep: return "water-sweep";
    case TaskKind::circle_inspect: return "circle-inspect";
    case TaskKind::contour_follow: return "contour-follow";
    case TaskKind::shelter_visit: return "shelter-visit";
    }
    return "waypoint-sweep";
}

std::string_view to_string(Provenance p) noexcept {
    switch (p) {
    case Provenance::planner: return "planner";
    case Provenance::pipeline: return "pipeline";
    case Provenance::operator_: return "operator";
    }
    return "planner";
}

TaskKind task_kind_from_string(std::string_view s) {
    for (TaskKind k : {TaskKind::waypoint_sweep, TaskKind::trail_follow, TaskKind::shoreline_follow, TaskKind::water_sweep,
                       TaskKind::circle_inspect, TaskKind::contour_follow, TaskKind::shelter_visit})
        if (to_string(k) == s) return k;
    throw Error(ErrorCode::parse, "unknown task kind '" + std::string(s) + "'");
}

Provenance provenance_from_string(std::string_view s) {
    for (Provenance p : {Provenance::planner, Provenance::pipeline, Provenance::operator_})
        if (to_string(p) == s) return p;
    throw Error(ErrorCode::parse, "unknown task provenance '" + std::string(s) + "'");
}

nlohmann::json to_json(const Task& t) {
    nlohmann::json path = nlohmann::json::array();
    for (Vec2 p : t.path) path.push_back({p.x, p.y});
    nlohmann::json j = {{"id", t.id},
                        {"kind", std::string(to_string(t.kind))},
                        {"strategy", std::string(to_string(t.strategy))},
                        {"priority", t.priority},
                        {"provenance", std::string(to_string(t.provenance))},
                        {"path", path}};
    if (!t.clue_id.empty()) j["clue_id"] = t.clue_id;
    if (!t.directed_agent.empty()) j["directed_agent"] = t.directed_agent;
    return j;
}

Task task_from_json(const nlohmann::json& j) {
    Task t;
    t.id = j.at("id").get<std::string>();
    t.kind = task_kind_from_string(j.at("kind").get<std::string>());
    t.strategy = strategy_from_string(j.at("strategy").get<std::string>());
    t.priority = j.at("priority").get<int>();
    t.provenance = provenance_from_string(j.at("provenance").get<std::string>());
    for (const auto& p : j.at("path")) t.path.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    t.clue_id = j.value("clue_id", std::string());
    t.directed_agent = j.value("directed_agent", std::string());
    return t;
}

namespace {

bool allowed(const Scenario& s, Vec2 p) { return s.envelope.geofence_allows(p) && s.envelope.range_allows(p); }

bool region_cell(const Scenario& s, Cell c) {
    return s.grid.feature(c) != Feature::water && distance(s.grid.center(c), s.profile.lkp) <= s.constants.region_radius_m;
}

double lkp_elevation(const Scenario& s) {
    auto c = s.grid.cell_of(s.profile.lkp);
    return c ? s.grid.elevation(*c) : 0.0;
}

bool eligible(Strategy st, const Scenario& s, Cell c) {
    const auto& g = s.grid;
    switch (st) {
    case Strategy::Region: return region_cell(s, c);
    case Strategy::Trail: return g.feature(c) == Feature::trail;
    case Strategy::Waterways: return g.feature(c) == Feature::water || g.feature(c) == Feature::shoreline;
    case Strategy::Shelter: return g.feature(c) == Feature::building;
    case Strategy::Contour:
        return g.feature(c) != Feature::water && distance(g.center(c), s.profile.lkp) <= s.constants.contour_radius_m &&
               g.slope(c) >= 0.5 * s.constants.steep_slope;
    }
    return false;
}

std::string task_id(Strategy s, std::size_t n) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%s-%02zu", std::string(to_string(s)).c_str(), n);
    return buf;
}

int lane_rows(const Scenario& s) {
    return std::max(1, static_cast<int>(std::floor(1.5 * s.constants.footprint_radius_m / s.grid.cell_size())));
}

// One boustrophedon lane per group of `step` rows. Each lane is a list of
// segments (column runs) flown west-to-east, reversed on odd lanes.
using Segment = std::pair<Vec2, Vec2>;
using Lane = std::vector<Segment>;

std::vector<Lane> sweep_lanes(const Scenario& s, const std::vector<unsigned char>& mask) {
    const auto& g = s.grid;
    const int step = lane_rows(s);
    std::vector<Lane> lanes;
    for (int r0 = 0; r0 < g.height(); r0 += step) {
        const int r1 = std::min(g.height(), r0 + step);
        const double y = 0.5 * (r0 + r1) * g.cell_size();
        Lane lane;
        int run_start = -1;
        for (int c = 0; c <= g.width(); ++c) {
            bool on = false;
            if (c < g.width())
                for (int r = r0; r < r1 && !on; ++r) on = mask[g.index({c, r})] != 0;
            if (on && run_start < 0) run_start = c;
            if (!on && run_start >= 0) {
                lane.push_back({{(run_start + 0.5) * g.cell_size(), y}, {(c - 0.5) * g.cell_size(), y}});
                run_start = -1;
            }
        }
        if (!lane.empty()) lanes.push_back(std::move(lane));
    }
    for (std::size_t i = 1; i < lanes.size(); i += 2) {
        std::reverse(lanes[i].begin(), lanes[i].end());
        for (auto& seg : lanes[i]) std::swap(seg.first, seg.second);
    }
    return lanes;
}

std::vector<Vec2> flatten(const std::vector<Lane>& lanes, std::size_t begin, std::size_t end) {
    std::vector<Vec2> path;
    for (std::size_t i = begin; i < end; ++i)
        for (const auto& [a, b] : lanes[i]) {
            path.push_back(a);
            if (!(b == a)) path.push_back(b);
        }
    return path;
}

// Splits lanes into `parts` contiguous chunks of near-equal lane count.
std::vector<std::pair<std::size_t, std::size_t>> chunk(std::size_t n, std::size_t parts) {
    parts = std::max<std::size_t>(1, std::min(parts, n));
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t p = 0; p < parts; ++p) out.push_back({n * p / parts, n * (p + 1) / parts});
    return out;
}

std::vector<unsigned char> mask_of(const Scenario& s, const std::vector<std::size_t>& cells) {
    std::vector<unsigned char> m(s.grid.cell_count(), 0);
    for (auto i : cells) m[i] = 1;
    return m;
}

// 8-connected components of the given cells, each sorted ascending; components
// ordered by their smallest index.
std::vector<std::vector<std::size_t>> components(const Scenario& s, const std::vector<std::size_t>& cells) {
    const auto& g = s.grid;
    auto mask = mask_of(s, cells);
    std::vector<std::vector<std::size_t>> out;
    for (auto start : cells) {
        if (mask[start] != 1) continue;
        std::vector<std::size_t> comp, stack{start};
        mask[start] = 2;
        while (!stack.empty()) {
            auto i = stack.back();
            stack.pop_back();
            comp.push_back(i);
            for (Cell n : g.neighbours(g.cell_at(i)))
                if (mask[g.index(n)] == 1) {
                    mask[g.index(n)] = 2;
                    stack.push_back(g.index(n));
                }
        }
        std::sort(comp.begin(), comp.end());
        out.push_back(std::move(comp));
    }
    return out;
}

Vec2 centroid(const Scenario& s, const std::vector<std::size_t>& cells) {
    Vec2 sum;
    for (auto i : cells) sum = sum + s.grid.center(s.grid.cell_at(i));
    return sum * (1.0 / static_cast<double>(cells.size()));
}

// Cells ordered by angle around `pivot` (distance breaks ties).
std::vector<Vec2> angular_path(const Scenario& s, std::vector<std::size_t> cells, Vec2 pivot) {
    const auto& g = s.grid;
    std::vector<std::pair<std::pair<double, double>, std::size_t>> keyed;
    for (auto i : cells) {
        Vec2 d = g.center(g.cell_at(i)) - pivot;
        keyed.push_back({{pseudo_angle(d), dot(d, d)}, i});
    }
    std::sort(keyed.begin(), keyed.end());
    std::vector<Vec2> path;
    for (const auto& k : keyed) path.push_back(g.center(g.cell_at(k.second)));
    return path;
}

std::vector<Task> region_tasks(const Scenario& s, const std::vector<std::size_t>& cells) {
    const auto& g = s.grid;
    const double step = 4.0 * s.constants.footprint_radius_m;
    const int rings = std::max(1, static_cast<int>(std::ceil(s.constants.region_radius_m / step)));
    std::vector<std::vector<std::size_t>> by_ring(rings);
    for (auto i : cells) {
        Vec2 d = g.center(g.cell_at(i)) - s.profile.lkp;
        const double cheb = std::max(std::abs(d.x), std::abs(d.y));
        int k = std::max(0, static_cast<int>(std::ceil(cheb / step)) - 1);
        by_ring[std::min(k, rings - 1)].push_back(i);
    }
    std::vector<Task> tasks;
    for (int k = 0; k < rings; ++k) {
        if (by_ring[k].empty()) continue;
        auto lanes = sweep_lanes(s, mask_of(s, by_ring[k]));
        for (auto [b, e] : chunk(lanes.size(), static_cast<std::size_t>(k + 1))) {
            Task t;
            t.id = task_id(Strategy::Region, tasks.size() + 1);
            t.kind = TaskKind::waypoint_sweep;
            t.path = flatten(lanes, b, e);
            t.strategy = Strategy::Region;
            t.priority = k;
            tasks.push_back(std::move(t));
        }
    }
    return tasks;
}

std::vector<Task> trail_tasks(const Scenario& s, const std::vector<std::size_t>& cells) {
    const auto& g = s.grid;
    std::vector<unsigned char> open = mask_of(s, cells);
    std::vector<unsigned char> seen(g.cell_count(), 0);
    std::vector<Task> tasks;
    auto lkp_dist = [&](std::size_t i) { return distance(g.center(g.cell_at(i)), s.profile.lkp); };

    for (;;) {
        // Prefer continuing from the explored network, otherwise start nearest the LKP.
        std::optional<std::size_t> start;
        std::optional<std::size_t> via;
        double best = 0.0;
        for (auto i : cells) {
            if (seen[i]) continue;
            std::optional<std::size_t> link;
            for (Cell n : g.trail_neighbours(g.cell_at(i)))
                if (seen[g.index(n)] && open[g.index(n)]) {
                    link = g.index(n);
                    break;
                }
            const bool better_class = link && !via;
            const bool same_class = static_cast<bool>(link) == static_cast<bool>(via);
            if (!start || better_class || (same_class && lkp_dist(i) < best)) {
                start = i;
                via = link;
                best = lkp_dist(i);
            }
        }
        if (!start) break;

        std::vector<Vec2> path;
        if (via) path.push_back(g.center(g.cell_at(*via)));
        std::size_t cur = *start;
        seen[cur] = 1;
        path.push_back(g.center(g.cell_at(cur)));
        for (;;) {
            std::optional<std::size_t> next;
            for (Cell n : g.trail_neighbours(g.cell_at(cur))) {
                auto ni = g.index(n);
                if (seen[ni] || !open[ni]) continue;
                if (!next || g.elevation(n) < g.elevation(g.cell_at(*next)) ||
                    (g.elevation(n) == g.elevation(g.cell_at(*next)) && ni < *next))
                    next = ni;
            }
            if (!next) break;
            cur = *next;
            seen[cur] = 1;
            path.push_back(g.center(g.cell_at(cur)));
        }
        Task t;
        t.id = task_id(Strategy::Trail, tasks.size() + 1);
        t.kind = TaskKind::trail_follow;
        t.path = std::move(path);
        t.strategy = Strategy::Trail;
        t.priority = static_cast<int>(tasks.size());
        tasks.push_back(std::move(t));
    }
    return tasks;
}

std::vector<Task> waterway_tasks(const Scenario& s, const std::vector<std::size_t>& cells) {
    const auto& g = s.grid;
    std::vector<std::size_t> water, shore;
    for (auto i : cells) (g.feature(g.cell_at(i)) == Feature::water ? water : shore).push_back(i);
    std::vector<Task> tasks;
    for (const auto& comp : components(s, shore)) {
        Task t;
        t.id = task_id(Strategy::Waterways, tasks.size() + 1);
        t.kind = TaskKind::shoreline_follow;
        t.path = angular_path(s, comp, centroid(s, comp));
        t.path.push_back(t.path.front());
        t.strategy = Strategy::Waterways;
        t.priority = 0;
        tasks.push_back(std::move(t));
    }
    if (!water.empty()) {
        auto lanes = sweep_lanes(s, mask_of(s, water));
        for (auto [b, e] : chunk(lanes.size(), 3)) {
            Task t;
            t.id = task_id(Strategy::Waterways, tasks.size() + 1);
            t.kind = TaskKind::water_sweep;
            t.path = flatten(lanes, b, e);
            t.strategy = Strategy::Waterways;
            t.priority = 1;
            tasks.push_back(std::move(t));
        }
    }
    return tasks;
}

std::vector<Task> shelter_tasks(const Scenario& s, const std::vector<std::size_t>& cells) {
    const auto& g = s.grid;
    const double fp = s.constants.footprint_radius_m;
    struct Cluster {
        Vec2 c;
        double extent;
    };
    std::vector<Cluster> clusters;
    for (const auto& comp : components(s, cells)) {
        Vec2 c = centroid(s, comp);
        double extent = 0.0;
        for (auto i : comp) extent = std::max(extent, distance(g.center(g.cell_at(i)), c));
        clusters.push_back({c, extent});
    }
    std::stable_sort(clusters.begin(), clusters.end(), [&](const Cluster& a, const Cluster& b) {
        return distance(a.c, s.profile.lkp) < distance(b.c, s.profile.lkp);
    });
    std::vector<Task> tasks;
    for (const auto& cl : clusters) {
        Task t;
        t.id = task_id(Strategy::Shelter, tasks.size() + 1);
        t.kind = TaskKind::shelter_visit;
        // Concentric orbits whose footprints overlap until the cluster edge is covered.
        for (double r = 0.5 * fp;; r += 1.5 * fp) {
            auto ring = octagon(cl.c, r);
            t.path.insert(t.path.end(), ring.begin(), ring.end());
            if (r + 0.9 * fp >= cl.extent) break;
        }
        t.strategy = Strategy::Shelter;
        t.priority = static_cast<int>(tasks.size());
        tasks.push_back(std::move(t));
    }
    return tasks;
}

std::vector<Task> contour_tasks(const Scenario& s, const std::vector<std::size_t>& cells) {
    const auto& g = s.grid;
    const double base = lkp_elevation(s);
    std::map<int, std::vector<std::size_t>> bands;
    for (auto i : cells) {
        const double rel = (g.elevation(g.cell_at(i)) - base) / s.constants.contour_band_m;
        bands[static_cast<int>(std::floor(rel + 0.5))].push_back(i);
    }
    std::vector<std::pair<int, int>> order;  // (|band|, band)
    for (const auto& [b, _] : bands) order.push_back({std::abs(b), b});
    std::sort(order.begin(), order.end());
    std::vector<Task> tasks;
    for (auto [mag, b] : order) {
        Task t;
        t.id = task_id(Strategy::Contour, tasks.size() + 1);
        t.kind = TaskKind::contour_follow;
        t.path = angular_path(s, bands[b], s.profile.lkp);
        t.strategy = Strategy::Contour;
        t.priority = mag;
        tasks.push_back(std::move(t));
    }
    return tasks;
}

} // namespace

std::vector<std::size_t> eligible_cells(Strategy st, const Scenario& s) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < s.grid.cell_count(); ++i) {
        Cell c = s.grid.cell_at(i);
        if (eligible(st, s, c) && allowed(s, s.grid.center(c))) out.push_back(i);
    }
    return out;
}

std::vector<Task> generate_tasks(Strategy st, const Scenario& s) {
    auto cells = eligible_cells(st, s);
    if (cells.empty()) return {};
    switch (st) {
    case Strategy::Region: return region_tasks(s, cells);
    case Strategy::Trail: return trail_tasks(s, cells);
    case Strategy::Waterways: return waterway_tasks(s, cells);
    case Strategy::Shelter: return shelter_tasks(s, cells);
    case Strategy::Contour: return contour_tasks(s, cells);
    }
    return {};
}

Task make_inspection_task(const std::string& id, const std::string& clue_id, Vec2 center, double radius_m,
                          Strategy strategy, Provenance provenance, const std::string& directed_agent) {
    Task t;
    t.id = id;
    t.kind = TaskKind::circle_inspect;
    t.path = octagon(center, radius_m);
    t.strategy = strategy;
    t.priority = -1;
    t.provenance = provenance;
    t.clue_id = clue_id;
    t.directed_agent = directed_agent;
    return t;
}

CoverageMap::CoverageMap(const TerrainGrid& grid) : grid_(&grid), covered_(grid.cell_count(), 0) {}

std::vector<std::size_t> CoverageMap::observe(Vec2 p, double radius) {
    std::vector<std::size_t> fresh;
    const double cs = grid_->cell_size();
    const int c0 = std::max(0, static_cast<int>(std::floor((p.x - radius) / cs)));
    const int c1 = std::min(grid_->width() - 1, static_cast<int>(std::floor((p.x + radius) / cs)));
    const int r0 = std::max(0, static_cast<int>(std::floor((p.y - radius) / cs)));
    const int r1 = std::min(grid_->height() - 1, static_cast<int>(std::floor((p.y + radius) / cs)));
    const double r2 = radius * radius;
    for (int r = r0; r <= r1; ++r)
        for (int c = c0; c <= c1; ++c) {
            Vec2 d = grid_->center({c, r}) - p;
            if (dot(d, d) > r2) continue;
            const std::size_t i = grid_->index({c, r});
            if (!covered_[i]) {
                covered_[i] = 1;
                ++count_;
                fresh.push_back(i);
            }
        }
    return fresh;
}

double CoverageMap::fraction(const std::vector<std::size_t>& cells) const {
    if (cells.empty()) return 1.0;
    std::size_t n = 0;
    for (auto i : cells) n += covered_.at(i);
    return static_cast<double>(n) / static_cast<double>(cells.size());
}

} // namespace sar
