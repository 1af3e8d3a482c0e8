#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "abduct/geometry.hpp"

namespace abduct {

enum class ShapeKind { kCube = 0, kTriangle = 1, kCircle = 2 };
enum class SizeKind { kSmall = 0, kLarge = 1 };

inline constexpr int kNumShapes = 3;
inline constexpr int kNumSizes = 2;
inline constexpr int kNumColors = 8;
inline constexpr int kNumLayouts = 20;

enum class ElementKind {
  kRamp = 0,
  kPlatform = 1,
  kButton = 2,
  kBasket = 3,
  kLeftWall = 4,
  kRightWall = 5,
  kGround = 6,
};
inline constexpr int kNumElementKinds = 7;

/// Static elements take ids from this base upward; dynamic objects use 1..99.
inline constexpr int kStaticIdBase = 100;
inline constexpr bool is_static_id(int id) { return id >= kStaticIdBase; }

inline constexpr double kWorldSize = 256.0;

std::string_view to_string(ShapeKind s);
std::string_view to_string(SizeKind s);
std::string_view to_string(ElementKind k);
ShapeKind shape_from_string(std::string_view s);
SizeKind size_from_string(std::string_view s);
ElementKind element_from_string(std::string_view s);

struct DynamicObjectSpec {
  int object_id = 0;
  ShapeKind shape = ShapeKind::kCircle;
  SizeKind size = SizeKind::kSmall;
  int color = 0;
  Vec2 init_position;
  Vec2 init_velocity;
  double mass = 1.0;

  /// Characteristic half-extent (circle radius, cube half-side, triangle circumradius).
  double extent() const;
  /// Collision polygon in world coordinates at `center`; empty for circles.
  ConvexPolygon polygon_at(Vec2 center) const;

  bool operator==(const DynamicObjectSpec&) const = default;
};

double mass_for(SizeKind size);
double extent_for(ShapeKind shape, SizeKind size);

struct StaticElement {
  int element_id = kStaticIdBase;
  ElementKind kind = ElementKind::kGround;
  std::vector<ConvexPolygon> parts;

  bool operator==(const StaticElement& o) const;
};

struct SceneSpec {
  int layout_id = 1;
  std::uint64_t seed = 0;
  std::vector<DynamicObjectSpec> dynamic_objects;
  std::vector<StaticElement> static_elements;
  double world_width = kWorldSize;
  double world_height = kWorldSize;

  const DynamicObjectSpec* find_object(int id) const;
  const StaticElement* find_element(int id) const;
  bool operator==(const SceneSpec& o) const;
};

/// Samples a scene for `layout_id` (1..20). Deterministic in (layout_id, seed).
/// Throws InputError for an invalid layout and UnplaceableSceneError when
/// rejection sampling runs out of attempts.
SceneSpec build_scene(int layout_id, std::uint64_t seed);

/// As above with an explicit dynamic object count (0 allowed) instead of the
/// layout's sampled count.
SceneSpec build_scene(int layout_id, std::uint64_t seed, int object_count);

/// The scene without dynamic object `object_id`. Rejects static ids and unknown ids.
SceneSpec remove_object(const SceneSpec& scene, int object_id);

/// Shared by scripted test scenes: walls and ground framing the world.
std::vector<StaticElement> boundary_elements();

/// True when `obj` overlaps (within `margin`) any static part or any of `others`.
bool overlaps_anything(const DynamicObjectSpec& obj, const SceneSpec& scene,
                       const std::vector<DynamicObjectSpec>& others, double margin);

}  // namespace abduct
