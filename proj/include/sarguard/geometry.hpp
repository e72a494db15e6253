#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace sar {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) noexcept { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) noexcept { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(Vec2 a, double k) noexcept { return {a.x * k, a.y * k}; }
    friend bool operator==(Vec2 a, Vec2 b) noexcept { return a.x == b.x && a.y == b.y; }
};

inline double dot(Vec2 a, Vec2 b) noexcept { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) noexcept { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) noexcept { return std::sqrt(dot(a, a)); }
inline double distance(Vec2 a, Vec2 b) noexcept { return norm(a - b); }

/// Simple polygon given by its vertices (implicitly closed).
struct Polygon {
    std::vector<Vec2> vertices;
};

/// Boundary points within `tol` count as inside.
bool contains(const Polygon& poly, Vec2 p, double tol = 1e-6);
double boundary_distance(const Polygon& poly, Vec2 p);
Vec2 nearest_boundary_point(const Polygon& poly, Vec2 p);

Vec2 nearest_point_on_segment(Vec2 a, Vec2 b, Vec2 p) noexcept;
bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) noexcept;

/// True when no two non-adjacent edges intersect and there are >= 3 vertices.
bool is_simple(const Polygon& poly);

/// True when the segment touches or crosses the polygon.
bool segment_touches(const Polygon& poly, Vec2 a, Vec2 b);

double path_length(std::span<const Vec2> points) noexcept;

/// Regular octagon of the given radius around `center`, starting east and
/// going counter-clockwise. Uses fixed constants so positions are reproducible.
std::vector<Vec2> octagon(Vec2 center, double radius);

/// Perimeter of `octagon(center, radius)`.
double octagon_perimeter(double radius) noexcept;

/// Monotone stand-in for atan2 in [0, 4): exact arithmetic, so orderings are
/// identical on every platform.
double pseudo_angle(Vec2 v) noexcept;

} // namespace sar
