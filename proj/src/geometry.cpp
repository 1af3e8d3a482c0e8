#include "abduct/geometry.hpp"

#include <algorithm>
#include <limits>

namespace abduct {

ConvexPolygon ConvexPolygon::translated(Vec2 offset) const {
  ConvexPolygon out;
  out.vertices.reserve(vertices.size());
  for (const auto& v : vertices) out.vertices.push_back(v + offset);
  return out;
}

bool ConvexPolygon::contains(Vec2 p) const {
  const auto n = vertices.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = vertices[i];
    const Vec2 b = vertices[(i + 1) % n];
    if (cross(b - a, p - a) < 0.0) return false;
  }
  return true;
}

ConvexPolygon make_box(Vec2 lo, Vec2 hi) {
  return ConvexPolygon{{{lo.x, lo.y}, {hi.x, lo.y}, {hi.x, hi.y}, {lo.x, hi.y}}};
}

ConvexPolygon make_slab(Vec2 a, Vec2 b, double thickness) {
  if (a.x > b.x) std::swap(a, b);
  const Vec2 down{0.0, -thickness};
  return ConvexPolygon{{a + down, b + down, b, a}};
}

Aabb bounds_of(const ConvexPolygon& poly) {
  Aabb box{{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()},
           {-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()}};
  for (const auto& v : poly.vertices) {
    box.lo.x = std::min(box.lo.x, v.x);
    box.lo.y = std::min(box.lo.y, v.y);
    box.hi.x = std::max(box.hi.x, v.x);
    box.hi.y = std::max(box.hi.y, v.y);
  }
  return box;
}

namespace {

Vec2 edge_normal(Vec2 a, Vec2 b) {
  // Outward normal of a CCW edge.
  const Vec2 e = b - a;
  const double len = length(e);
  return {e.y / len, -e.x / len};
}

Vec2 closest_on_segment(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double denom = dot(ab, ab);
  if (denom == 0.0) return a;
  const double t = std::clamp(dot(p - a, ab) / denom, 0.0, 1.0);
  return a + ab * t;
}

/// Largest separation of `b` from `a` along `a`'s edge normals.
std::pair<double, Vec2> max_separation(const ConvexPolygon& a, const ConvexPolygon& b) {
  double best = -std::numeric_limits<double>::infinity();
  Vec2 best_normal{0.0, 1.0};
  const auto n = a.vertices.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 normal = edge_normal(a.vertices[i], a.vertices[(i + 1) % n]);
    double max_a = -std::numeric_limits<double>::infinity();
    for (const auto& v : a.vertices) max_a = std::max(max_a, dot(normal, v));
    double min_b = std::numeric_limits<double>::infinity();
    for (const auto& v : b.vertices) min_b = std::min(min_b, dot(normal, v));
    const double sep = min_b - max_a;
    if (sep > best) {
      best = sep;
      best_normal = normal;
    }
  }
  return {best, best_normal};
}

}  // namespace

Manifold collide_circles(Vec2 ca, double ra, Vec2 cb, double rb) {
  const Vec2 d = cb - ca;
  const double dist = length(d);
  if (dist == 0.0) return {{0.0, 1.0}, -(ra + rb)};
  return {d * (1.0 / dist), dist - ra - rb};
}

Manifold collide_circle_polygon(Vec2 c, double r, const ConvexPolygon& poly) {
  const auto n = poly.vertices.size();
  if (poly.contains(c)) {
    // Deepest-inside case: leave through the nearest face.
    double best = -std::numeric_limits<double>::infinity();
    Vec2 best_normal{0.0, 1.0};
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2 a = poly.vertices[i];
      const Vec2 normal = edge_normal(a, poly.vertices[(i + 1) % n]);
      const double s = dot(c - a, normal);
      if (s > best) {
        best = s;
        best_normal = normal;
      }
    }
    return {-best_normal, best - r};
  }
  Vec2 closest = poly.vertices[0];
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 q = closest_on_segment(c, poly.vertices[i], poly.vertices[(i + 1) % n]);
    const Vec2 d = q - c;
    const double d2 = dot(d, d);
    if (d2 < best_d2) {
      best_d2 = d2;
      closest = q;
    }
  }
  const double dist = std::sqrt(best_d2);
  return {(closest - c) * (1.0 / dist), dist - r};
}

Manifold collide_polygons(const ConvexPolygon& a, const ConvexPolygon& b) {
  const auto [sep_a, n_a] = max_separation(a, b);
  const auto [sep_b, n_b] = max_separation(b, a);
  if (sep_b > sep_a) return {-n_b, sep_b};
  return {n_a, sep_a};
}

}  // namespace abduct
