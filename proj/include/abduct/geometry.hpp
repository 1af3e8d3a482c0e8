#pragma once

#include <cmath>
#include <optional>
#include <vector>

namespace abduct {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator-() const { return {-x, -y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Vec2& operator+=(Vec2 o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr Vec2& operator-=(Vec2 o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  constexpr bool operator==(const Vec2&) const = default;
};

constexpr Vec2 operator*(double s, Vec2 v) { return v * s; }
constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
/// Counter-clockwise perpendicular.
constexpr Vec2 perp(Vec2 v) { return {-v.y, v.x}; }
inline double length(Vec2 v) { return std::sqrt(dot(v, v)); }
inline bool is_finite(Vec2 v) { return std::isfinite(v.x) && std::isfinite(v.y); }

/// Convex polygon, vertices in counter-clockwise order.
struct ConvexPolygon {
  std::vector<Vec2> vertices;

  ConvexPolygon translated(Vec2 offset) const;
  bool contains(Vec2 p) const;
};

ConvexPolygon make_box(Vec2 min_corner, Vec2 max_corner);
/// Thick segment from a to b (a quad), thickness measured below the segment.
ConvexPolygon make_slab(Vec2 a, Vec2 b, double thickness);

struct Aabb {
  Vec2 lo;
  Vec2 hi;
  bool overlaps(const Aabb& o, double margin) const {
    return lo.x - margin <= o.hi.x && o.lo.x - margin <= hi.x && lo.y - margin <= o.hi.y &&
           o.lo.y - margin <= hi.y;
  }
};

Aabb bounds_of(const ConvexPolygon& poly);

/// Closest-feature query between two convex shapes. `normal` points from the
/// first shape to the second; `separation` is negative when they overlap.
struct Manifold {
  Vec2 normal;
  double separation = 0.0;
};

Manifold collide_circles(Vec2 ca, double ra, Vec2 cb, double rb);
Manifold collide_circle_polygon(Vec2 c, double r, const ConvexPolygon& poly);
Manifold collide_polygons(const ConvexPolygon& a, const ConvexPolygon& b);

}  // namespace abduct
