#include "abduct/scene.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "abduct/errors.hpp"
#include "abduct/rng.hpp"

namespace abduct {

namespace {

constexpr std::array<std::string_view, kNumShapes> kShapeNames{"cube", "triangle", "circle"};
constexpr std::array<std::string_view, kNumSizes> kSizeNames{"small", "large"};
constexpr std::array<std::string_view, kNumElementKinds> kElementNames{
    "ramp", "platform", "button", "basket", "left_wall", "right_wall", "ground"};

constexpr int kMaxPlacementAttempts = 1000;
constexpr double kWallThickness = 8.0;

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::array<std::string_view, N>& names, const char* what) {
  for (std::size_t i = 0; i < N; ++i)
    if (names[i] == s) return static_cast<E>(i);
  throw InputError(std::string("unknown ") + what + ": " + std::string(s));
}

enum class RampSide { kNone, kLeftHigh, kRightHigh };

struct LayoutTemplate {
  RampSide upper_ramp;
  RampSide lower_ramp;
  int platforms;
  bool button;
  bool basket;
  int min_objects;
  int max_objects;
};

// Twenty fixed arrangements. Element positions inside each are jittered per seed.
constexpr std::array<LayoutTemplate, kNumLayouts> kLayouts{{
    {RampSide::kLeftHigh, RampSide::kNone, 0, false, false, 4, 6},
    {RampSide::kRightHigh, RampSide::kNone, 0, true, false, 4, 6},
    {RampSide::kLeftHigh, RampSide::kRightHigh, 0, false, false, 4, 7},
    {RampSide::kRightHigh, RampSide::kLeftHigh, 0, false, true, 4, 7},
    {RampSide::kNone, RampSide::kNone, 1, false, false, 4, 6},
    {RampSide::kNone, RampSide::kNone, 2, true, false, 5, 7},
    {RampSide::kLeftHigh, RampSide::kNone, 1, false, true, 4, 7},
    {RampSide::kRightHigh, RampSide::kNone, 1, true, false, 4, 7},
    {RampSide::kLeftHigh, RampSide::kLeftHigh, 0, false, false, 4, 6},
    {RampSide::kRightHigh, RampSide::kRightHigh, 0, true, true, 4, 6},
    {RampSide::kNone, RampSide::kLeftHigh, 1, false, false, 5, 7},
    {RampSide::kNone, RampSide::kRightHigh, 1, false, true, 5, 7},
    {RampSide::kLeftHigh, RampSide::kRightHigh, 1, true, false, 4, 7},
    {RampSide::kRightHigh, RampSide::kLeftHigh, 1, false, false, 4, 7},
    {RampSide::kNone, RampSide::kNone, 0, true, true, 5, 7},
    {RampSide::kLeftHigh, RampSide::kNone, 2, false, false, 4, 6},
    {RampSide::kRightHigh, RampSide::kNone, 2, false, true, 4, 6},
    {RampSide::kNone, RampSide::kNone, 1, true, true, 5, 7},
    {RampSide::kLeftHigh, RampSide::kRightHigh, 0, true, true, 4, 7},
    {RampSide::kRightHigh, RampSide::kLeftHigh, 2, false, false, 4, 6},
}};

ConvexPolygon make_ramp(Rng& rng, RampSide side, double y_high_center) {
  const double width = rng.uniform(70.0, 95.0);
  const double slope = rng.uniform(0.35, 0.6);
  const double y_high = y_high_center + rng.uniform(-10.0, 10.0);
  const double y_low = y_high - width * slope;
  if (side == RampSide::kLeftHigh) {
    return make_slab({kWallThickness, y_high}, {kWallThickness + width, y_low}, 6.0);
  }
  return make_slab({kWorldSize - kWallThickness - width, y_low}, {kWorldSize - kWallThickness, y_high},
                   6.0);
}

}  // namespace

std::string_view to_string(ShapeKind s) { return kShapeNames[static_cast<int>(s)]; }
std::string_view to_string(SizeKind s) { return kSizeNames[static_cast<int>(s)]; }
std::string_view to_string(ElementKind k) { return kElementNames[static_cast<int>(k)]; }
ShapeKind shape_from_string(std::string_view s) {
  return parse_enum<ShapeKind>(s, kShapeNames, "shape");
}
SizeKind size_from_string(std::string_view s) { return parse_enum<SizeKind>(s, kSizeNames, "size"); }
ElementKind element_from_string(std::string_view s) {
  return parse_enum<ElementKind>(s, kElementNames, "element kind");
}

double mass_for(SizeKind size) { return size == SizeKind::kSmall ? 1.0 : 3.0; }

double extent_for(ShapeKind shape, SizeKind size) {
  const double base = size == SizeKind::kSmall ? 6.0 : 10.0;
  return shape == ShapeKind::kTriangle ? base * 1.2 : base;
}

double DynamicObjectSpec::extent() const { return extent_for(shape, size); }

ConvexPolygon DynamicObjectSpec::polygon_at(Vec2 c) const {
  const double e = extent();
  switch (shape) {
    case ShapeKind::kCube:
      return make_box({c.x - e, c.y - e}, {c.x + e, c.y + e});
    case ShapeKind::kTriangle: {
      // Upright equilateral triangle with circumradius e.
      const double half_side = e * std::sqrt(3.0) * 0.5;
      return ConvexPolygon{{{c.x - half_side, c.y - e * 0.5},
                            {c.x + half_side, c.y - e * 0.5},
                            {c.x, c.y + e}}};
    }
    case ShapeKind::kCircle:
      break;
  }
  return {};
}

bool StaticElement::operator==(const StaticElement& o) const {
  if (element_id != o.element_id || kind != o.kind || parts.size() != o.parts.size()) return false;
  for (std::size_t i = 0; i < parts.size(); ++i)
    if (parts[i].vertices != o.parts[i].vertices) return false;
  return true;
}

const DynamicObjectSpec* SceneSpec::find_object(int id) const {
  for (const auto& o : dynamic_objects)
    if (o.object_id == id) return &o;
  return nullptr;
}

const StaticElement* SceneSpec::find_element(int id) const {
  for (const auto& e : static_elements)
    if (e.element_id == id) return &e;
  return nullptr;
}

bool SceneSpec::operator==(const SceneSpec& o) const {
  return layout_id == o.layout_id && seed == o.seed && dynamic_objects == o.dynamic_objects &&
         static_elements == o.static_elements && world_width == o.world_width &&
         world_height == o.world_height;
}

std::vector<StaticElement> boundary_elements() {
  std::vector<StaticElement> out;
  out.push_back({kStaticIdBase + 0, ElementKind::kGround,
                 {make_box({0.0, 0.0}, {kWorldSize, kWallThickness})}});
  out.push_back({kStaticIdBase + 1, ElementKind::kLeftWall,
                 {make_box({0.0, 0.0}, {kWallThickness, kWorldSize})}});
  out.push_back({kStaticIdBase + 2, ElementKind::kRightWall,
                 {make_box({kWorldSize - kWallThickness, 0.0}, {kWorldSize, kWorldSize})}});
  return out;
}

bool overlaps_anything(const DynamicObjectSpec& obj, const SceneSpec& scene,
                       const std::vector<DynamicObjectSpec>& others, double margin) {
  const Vec2 c = obj.init_position;
  const double r = obj.extent();
  const ConvexPolygon poly = obj.polygon_at(c);
  const bool is_circle = obj.shape == ShapeKind::kCircle;
  auto sep_with_poly = [&](const ConvexPolygon& p) {
    return is_circle ? collide_circle_polygon(c, r, p).separation : collide_polygons(poly, p).separation;
  };
  for (const auto& el : scene.static_elements)
    for (const auto& part : el.parts)
      if (sep_with_poly(part) < margin) return true;
  for (const auto& o : others) {
    double sep;
    if (is_circle && o.shape == ShapeKind::kCircle) {
      sep = collide_circles(c, r, o.init_position, o.extent()).separation;
    } else if (o.shape == ShapeKind::kCircle) {
      sep = collide_circle_polygon(o.init_position, o.extent(), poly).separation;
    } else {
      sep = sep_with_poly(o.polygon_at(o.init_position));
    }
    if (sep < margin) return true;
  }
  return false;
}

namespace {

SceneSpec build_scene_impl(int layout_id, std::uint64_t seed, std::optional<int> forced_count) {
  if (layout_id < 1 || layout_id > kNumLayouts)
    throw InputError("layout id must be in 1..20, got " + std::to_string(layout_id));
  const LayoutTemplate& tpl = kLayouts[layout_id - 1];
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(layout_id)));

  SceneSpec scene;
  scene.layout_id = layout_id;
  scene.seed = seed;
  scene.static_elements = boundary_elements();
  int next_id = kStaticIdBase + static_cast<int>(scene.static_elements.size());

  if (tpl.upper_ramp != RampSide::kNone)
    scene.static_elements.push_back(
        {next_id++, ElementKind::kRamp, {make_ramp(rng, tpl.upper_ramp, 165.0)}});
  if (tpl.lower_ramp != RampSide::kNone)
    scene.static_elements.push_back(
        {next_id++, ElementKind::kRamp, {make_ramp(rng, tpl.lower_ramp, 95.0)}});
  for (int p = 0; p < tpl.platforms; ++p) {
    const double half_w = rng.uniform(22.0, 32.0);
    const double cx = rng.uniform(100.0, 156.0);
    const double top = (p == 0 ? 70.0 : 125.0) + rng.uniform(-8.0, 8.0);
    scene.static_elements.push_back(
        {next_id++, ElementKind::kPlatform, {make_box({cx - half_w, top - 6.0}, {cx + half_w, top})}});
  }
  if (tpl.button) {
    const double x = rng.uniform(40.0, 200.0);
    scene.static_elements.push_back({next_id++, ElementKind::kButton,
                                     {make_box({x, kWallThickness}, {x + 16.0, kWallThickness + 4.0})}});
  }
  if (tpl.basket) {
    const double x = rng.uniform(60.0, 150.0);
    const double y0 = kWallThickness;
    scene.static_elements.push_back(
        {next_id++,
         ElementKind::kBasket,
         {make_box({x, y0}, {x + 44.0, y0 + 4.0}), make_box({x, y0}, {x + 4.0, y0 + 22.0}),
          make_box({x + 40.0, y0}, {x + 44.0, y0 + 22.0})}});
  }

  const int count = forced_count ? *forced_count : rng.range(tpl.min_objects, tpl.max_objects);
  if (count < 0 || count >= kStaticIdBase) throw InputError("object count out of range");

  for (int i = 0; i < count; ++i) {
    DynamicObjectSpec obj;
    obj.object_id = i + 1;
    obj.shape = static_cast<ShapeKind>(rng.below(kNumShapes));
    obj.size = static_cast<SizeKind>(rng.below(kNumSizes));
    obj.color = static_cast<int>(rng.below(kNumColors));
    obj.mass = mass_for(obj.size);
    obj.init_velocity = {rng.uniform(-60.0, 60.0), rng.uniform(-30.0, 30.0)};
    const double e = obj.extent();
    bool placed = false;
    for (int attempt = 0; attempt < kMaxPlacementAttempts && !placed; ++attempt) {
      obj.init_position = {rng.uniform(20.0 + e, kWorldSize - 20.0 - e),
                           rng.uniform(110.0, kWorldSize - 16.0 - e)};
      placed = !overlaps_anything(obj, scene, scene.dynamic_objects, 2.0);
    }
    if (!placed) throw UnplaceableSceneError(layout_id, seed);
    scene.dynamic_objects.push_back(obj);
  }
  return scene;
}

}  // namespace

SceneSpec build_scene(int layout_id, std::uint64_t seed) {
  return build_scene_impl(layout_id, seed, std::nullopt);
}

SceneSpec build_scene(int layout_id, std::uint64_t seed, int object_count) {
  return build_scene_impl(layout_id, seed, object_count);
}

SceneSpec remove_object(const SceneSpec& scene, int object_id) {
  if (is_static_id(object_id))
    throw InputError("cannot remove static element " + std::to_string(object_id));
  SceneSpec out = scene;
  const auto it = std::find_if(out.dynamic_objects.begin(), out.dynamic_objects.end(),
                               [&](const DynamicObjectSpec& o) { return o.object_id == object_id; });
  if (it == out.dynamic_objects.end())
    throw InputError("unknown dynamic object " + std::to_string(object_id));
  out.dynamic_objects.erase(it);
  return out;
}

}  // namespace abduct
