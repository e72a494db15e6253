#include "sarguard/terrain.hpp"

#include "sarguard/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace sar {

char feature_code(Feature f) noexcept {
    switch (f) {
    case Feature::forest: return 'F';
    case Feature::shrubland: return 'S';
    case Feature::water: return 'W';
    case Feature::trail: return 'T';
    case Feature::building: return 'B';
    case Feature::shoreline: return 'H';
    case Feature::open: return 'O';
    }
    return 'O';
}

std::optional<Feature> feature_from_code(char c) noexcept {
    switch (c) {
    case 'F': return Feature::forest;
    case 'S': return Feature::shrubland;
    case 'W': return Feature::water;
    case 'T': return Feature::trail;
    case 'B': return Feature::building;
    case 'H': return Feature::shoreline;
    case 'O': return Feature::open;
    default: return std::nullopt;
    }
}

std::string_view to_string(Feature f) noexcept {
    switch (f) {
    case Feature::forest: return "forest";
    case Feature::shrubland: return "shrubland";
    case Feature::water: return "water";
    case Feature::trail: return "trail";
    case Feature::building: return "building";
    case Feature::shoreline: return "shoreline";
    case Feature::open: return "open";
    }
    return "open";
}

TerrainGrid::TerrainGrid(int width, int height, double cell_size_m, std::vector<Feature> features,
                         std::vector<double> elevation)
    : width_(width), height_(height), cell_size_(cell_size_m), features_(std::move(features)),
      elevation_(std::move(elevation)) {
    if (width <= 0 || height <= 0) throw Error(ErrorCode::validation, "grid dimensions must be positive");
    if (!(cell_size_m > 0.0)) throw Error(ErrorCode::validation, "grid cell_size_m must be positive");
    const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    if (features_.size() != n) throw Error(ErrorCode::validation, "grid feature rows do not match width x height");
    if (elevation_.size() != n) throw Error(ErrorCode::validation, "grid elevation rows do not match width x height");
}

bool TerrainGrid::in_bounds(Vec2 p) const noexcept {
    return p.x >= 0.0 && p.y >= 0.0 && p.x <= width_ * cell_size_ && p.y <= height_ * cell_size_;
}

std::optional<Cell> TerrainGrid::cell_of(Vec2 p) const noexcept {
    if (!in_bounds(p)) return std::nullopt;
    Cell c{static_cast<int>(std::floor(p.x / cell_size_)), static_cast<int>(std::floor(p.y / cell_size_))};
    c.col = std::min(c.col, width_ - 1);
    c.row = std::min(c.row, height_ - 1);
    return c;
}

Polygon TerrainGrid::bounds() const {
    const double w = width_ * cell_size_;
    const double h = height_ * cell_size_;
    return Polygon{{{0.0, 0.0}, {w, 0.0}, {w, h}, {0.0, h}}};
}

double TerrainGrid::slope(Cell c) const {
    const double e = elevation(c);
    double worst = 0.0;
    const Cell four[] = {{c.col + 1, c.row}, {c.col - 1, c.row}, {c.col, c.row + 1}, {c.col, c.row - 1}};
    for (Cell n : four)
        if (in_bounds(n)) worst = std::max(worst, std::abs(elevation(n) - e) / cell_size_);
    return worst;
}

std::vector<Cell> TerrainGrid::neighbours(Cell c) const {
    std::vector<Cell> out;
    for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc) {
            if (dr == 0 && dc == 0) continue;
            Cell n{c.col + dc, c.row + dr};
            if (in_bounds(n)) out.push_back(n);
        }
    return out;
}

std::vector<Cell> TerrainGrid::trail_neighbours(Cell c) const {
    std::vector<Cell> out;
    for (Cell n : neighbours(c))
        if (feature(n) == Feature::trail) out.push_back(n);
    return out;
}

std::vector<std::string> TerrainGrid::validate() const {
    std::vector<std::string> problems;
    for (std::size_t i = 0; i < features_.size(); ++i) {
        if (features_[i] != Feature::shoreline) continue;
        Cell c = cell_at(i);
        auto ns = neighbours(c);
        if (std::none_of(ns.begin(), ns.end(), [&](Cell n) { return feature(n) == Feature::water; })) {
            std::ostringstream msg;
            msg << "shoreline cell (" << c.col << "," << c.row << ") has no adjacent water";
            problems.push_back(msg.str());
        }
    }
    for (double e : elevation_)
        if (!std::isfinite(e)) {
            problems.emplace_back("non-finite elevation value");
            break;
        }
    return problems;
}

std::vector<Feature> decode_feature_row(std::string_view row) {
    std::vector<Feature> out;
    std::size_t i = 0;
    while (i < row.size()) {
        std::size_t count = 0;
        bool has_count = false;
        while (i < row.size() && row[i] >= '0' && row[i] <= '9') {
            count = count * 10 + static_cast<std::size_t>(row[i] - '0');
            has_count = true;
            ++i;
        }
        if (i >= row.size()) throw Error(ErrorCode::parse, "feature row ends with a dangling run length");
        auto f = feature_from_code(row[i]);
        if (!f) throw Error(ErrorCode::parse, std::string("unknown feature code '") + row[i] + "'");
        if (has_count && count == 0) throw Error(ErrorCode::parse, "feature run length must be positive");
        out.insert(out.end(), has_count ? count : 1, *f);
        ++i;
    }
    return out;
}

std::vector<double> decode_elevation_row(std::string_view row) {
    std::vector<double> out;
    std::istringstream in{std::string(row)};
    std::string token;
    while (in >> token) {
        std::size_t count = 1;
        std::string_view value = token;
        if (auto star = token.find('*'); star != std::string::npos) {
            auto [p, ec] = std::from_chars(token.data(), token.data() + star, count);
            if (ec != std::errc{} || p != token.data() + star || count == 0)
                throw Error(ErrorCode::parse, "bad elevation run '" + token + "'");
            value = std::string_view(token).substr(star + 1);
        }
        double v = 0.0;
        auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
        if (ec != std::errc{} || p != value.data() + value.size())
            throw Error(ErrorCode::parse, "bad elevation value '" + token + "'");
        out.insert(out.end(), count, v);
    }
    return out;
}

TerrainGrid parse_terrain(const nlohmann::json& doc) {
    try {
        const int width = doc.at("width").get<int>();
        const int height = doc.at("height").get<int>();
        const double cell = doc.at("cell_size_m").get<double>();
        const auto& frows = doc.at("features");
        const auto& erows = doc.at("elevation");
        if (!frows.is_array() || static_cast<int>(frows.size()) != height)
            throw Error(ErrorCode::validation, "grid.features must have one row per grid row");
        if (!erows.is_array() || static_cast<int>(erows.size()) != height)
            throw Error(ErrorCode::validation, "grid.elevation must have one row per grid row");
        std::vector<Feature> features;
        std::vector<double> elevation;
        for (int r = 0; r < height; ++r) {
            auto fr = decode_feature_row(frows[r].get<std::string>());
            auto er = decode_elevation_row(erows[r].get<std::string>());
            if (static_cast<int>(fr.size()) != width)
                throw Error(ErrorCode::validation, "feature row " + std::to_string(r) + " has " +
                                                       std::to_string(fr.size()) + " cells, expected " +
                                                       std::to_string(width));
            if (static_cast<int>(er.size()) != width)
                throw Error(ErrorCode::validation, "elevation row " + std::to_string(r) + " has " +
                                                       std::to_string(er.size()) + " cells, expected " +
                                                       std::to_string(width));
            features.insert(features.end(), fr.begin(), fr.end());
            elevation.insert(elevation.end(), er.begin(), er.end());
        }
        return TerrainGrid(width, height, cell, std::move(features), std::move(elevation));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::parse, std::string("malformed grid: ") + e.what());
    }
}

} // namespace sar
