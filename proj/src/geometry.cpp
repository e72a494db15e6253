#include "sarguard/geometry.hpp"

#include <algorithm>
#include <limits>

namespace sar {

namespace {
constexpr double kHalfSqrt2 = 0.70710678118654752440;
// 2*sin(pi/8): side length of a unit-radius regular octagon.
constexpr double kOctagonSide = 0.76536686473017954346;

double orient(Vec2 a, Vec2 b, Vec2 c) noexcept { return cross(b - a, c - a); }

bool on_segment(Vec2 a, Vec2 b, Vec2 p) noexcept {
    return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
           p.y <= std::max(a.y, b.y);
}
} // namespace

Vec2 nearest_point_on_segment(Vec2 a, Vec2 b, Vec2 p) noexcept {
    Vec2 ab = b - a;
    double len2 = dot(ab, ab);
    if (len2 == 0.0) return a;
    double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
    return a + ab * t;
}

double boundary_distance(const Polygon& poly, Vec2 p) {
    double best = std::numeric_limits<double>::infinity();
    const auto& v = poly.vertices;
    for (std::size_t i = 0; i < v.size(); ++i) {
        Vec2 q = nearest_point_on_segment(v[i], v[(i + 1) % v.size()], p);
        best = std::min(best, distance(p, q));
    }
    return best;
}

Vec2 nearest_boundary_point(const Polygon& poly, Vec2 p) {
    double best = std::numeric_limits<double>::infinity();
    Vec2 out = p;
    const auto& v = poly.vertices;
    for (std::size_t i = 0; i < v.size(); ++i) {
        Vec2 q = nearest_point_on_segment(v[i], v[(i + 1) % v.size()], p);
        double d = distance(p, q);
        if (d < best) {
            best = d;
            out = q;
        }
    }
    return out;
}

bool contains(const Polygon& poly, Vec2 p, double tol) {
    const auto& v = poly.vertices;
    if (v.size() < 3) return false;
    if (boundary_distance(poly, p) <= tol) return true;
    bool inside = false;
    for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
        if ((v[i].y > p.y) != (v[j].y > p.y)) {
            double x_cross = v[j].x + (p.y - v[j].y) * (v[i].x - v[j].x) / (v[i].y - v[j].y);
            if (p.x < x_cross) inside = !inside;
        }
    }
    return inside;
}

bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) noexcept {
    double d1 = orient(c, d, a);
    double d2 = orient(c, d, b);
    double d3 = orient(a, b, c);
    double d4 = orient(a, b, d);
    if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) return true;
    if (d1 == 0 && on_segment(c, d, a)) return true;
    if (d2 == 0 && on_segment(c, d, b)) return true;
    if (d3 == 0 && on_segment(a, b, c)) return true;
    if (d4 == 0 && on_segment(a, b, d)) return true;
    return false;
}

bool is_simple(const Polygon& poly) {
    const auto& v = poly.vertices;
    const std::size_t n = v.size();
    if (n < 3) return false;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
            if (adjacent) continue;
            if (segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n])) return false;
        }
    }
    return true;
}

bool segment_touches(const Polygon& poly, Vec2 a, Vec2 b) {
    if (contains(poly, a, 0.0) || contains(poly, b, 0.0)) return true;
    const auto& v = poly.vertices;
    for (std::size_t i = 0; i < v.size(); ++i)
        if (segments_intersect(a, b, v[i], v[(i + 1) % v.size()])) return true;
    return false;
}

double path_length(std::span<const Vec2> points) noexcept {
    double total = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i) total += distance(points[i - 1], points[i]);
    return total;
}

std::vector<Vec2> octagon(Vec2 center, double radius) {
    static constexpr Vec2 unit[8] = {{1, 0},  {kHalfSqrt2, kHalfSqrt2},   {0, 1},  {-kHalfSqrt2, kHalfSqrt2},
                                     {-1, 0}, {-kHalfSqrt2, -kHalfSqrt2}, {0, -1}, {kHalfSqrt2, -kHalfSqrt2}};
    std::vector<Vec2> out;
    out.reserve(9);
    for (const auto& u : unit) out.push_back(center + u * radius);
    out.push_back(out.front());
    return out;
}

double octagon_perimeter(double radius) noexcept { return 8.0 * kOctagonSide * radius; }

double pseudo_angle(Vec2 v) noexcept {
    double denom = std::abs(v.x) + std::abs(v.y);
    if (denom == 0.0) return 0.0;
    double r = v.x / denom;  // in [-1, 1]
    double a = (v.y >= 0.0) ? 1.0 - r : 3.0 + r;
    return a;  // [0,4)
}

} // namespace sar
