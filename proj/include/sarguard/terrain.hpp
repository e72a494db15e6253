#pragma once

#include "sarguard/geometry.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sar {

enum class Feature : std::uint8_t { forest, shrubland, water, trail, building, shoreline, open };

/// Single-letter codes used in run-length rows: F S W T B H O.
char feature_code(Feature f) noexcept;
std::optional<Feature> feature_from_code(char c) noexcept;
std::string_view to_string(Feature f) noexcept;

struct Cell {
    int col = 0;
    int row = 0;

    friend bool operator==(Cell a, Cell b) noexcept { return a.col == b.col && a.row == b.row; }
};

/// Row-major grid of square cells. Cell (c, r) spans [c*s, (c+1)*s) x [r*s, (r+1)*s) in metres.
class TerrainGrid {
public:
    TerrainGrid() = default;
    TerrainGrid(int width, int height, double cell_size_m, std::vector<Feature> features, std::vector<double> elevation);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    double cell_size() const noexcept { return cell_size_; }
    std::size_t cell_count() const noexcept { return features_.size(); }

    bool in_bounds(Cell c) const noexcept { return c.col >= 0 && c.row >= 0 && c.col < width_ && c.row < height_; }
    bool in_bounds(Vec2 p) const noexcept;
    std::size_t index(Cell c) const noexcept { return static_cast<std::size_t>(c.row) * width_ + c.col; }
    Cell cell_at(std::size_t index) const noexcept { return {static_cast<int>(index % width_), static_cast<int>(index / width_)}; }
    std::optional<Cell> cell_of(Vec2 p) const noexcept;
    Vec2 center(Cell c) const noexcept { return {(c.col + 0.5) * cell_size_, (c.row + 0.5) * cell_size_}; }
    Polygon bounds() const;

    Feature feature(Cell c) const { return features_.at(index(c)); }
    double elevation(Cell c) const { return elevation_.at(index(c)); }

    /// Largest elevation change to a 4-neighbour, as rise over run.
    double slope(Cell c) const;

    /// 8-connected in-bounds neighbours, in a fixed order.
    std::vector<Cell> neighbours(Cell c) const;

    /// Trail-graph adjacency: 8-connected neighbouring trail cells.
    std::vector<Cell> trail_neighbours(Cell c) const;

    /// Structural problems (shoreline not touching water, ...); empty when valid.
    std::vector<std::string> validate() const;

private:
    int width_ = 0;
    int height_ = 0;
    double cell_size_ = 1.0;
    std::vector<Feature> features_;
    std::vector<double> elevation_;
};

/// Grid section of a scenario: {width, height, cell_size_m, features: [rle rows], elevation: [rle rows]}.
/// Feature rows are runs like "12F3W"; elevation rows are runs like "4*2100 2*2104.5".
TerrainGrid parse_terrain(const nlohmann::json& doc);

std::vector<Feature> decode_feature_row(std::string_view row);
std::vector<double> decode_elevation_row(std::string_view row);

} // namespace sar
