#include "abduct/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <tuple>

#include "abduct/errors.hpp"

namespace abduct {

int WorldConfig::steps() const { return static_cast<int>(std::llround(duration / dt)); }

void WorldConfig::validate() const {
  if (!(dt > 0.0)) throw InputError("dt must be positive");
  if (!(duration > 0.0)) throw InputError("duration must be positive");
  const double ratio = duration / dt;
  if (std::abs(ratio - std::round(ratio)) > 1e-6)
    throw InputError("duration must be an integer multiple of dt");
  if (restitution_dynamic < 0.0 || restitution_dynamic > 1.0 || restitution_static < 0.0 ||
      restitution_static > 1.0)
    throw InputError("restitution must lie in [0, 1]");
  if (friction < 0.0) throw InputError("friction must be non-negative");
  if (solver_iterations < 1) throw InputError("solver_iterations must be >= 1");
}

const Trajectory* SimulationResult::find(int object_id) const {
  for (const auto& t : trajectories)
    if (t.object_id == object_id) return &t;
  return nullptr;
}

namespace {

struct Body {
  int id = 0;
  bool circle = true;
  double radius = 0.0;
  DynamicObjectSpec spec;
  double mass = 1.0;
  double inv_mass = 1.0;
  Vec2 x;
  Vec2 v;

  ConvexPolygon polygon() const { return spec.polygon_at(x); }
  Aabb aabb() const { return {{x.x - radius, x.y - radius}, {x.x + radius, x.y + radius}}; }
};

struct StaticPart {
  int element_id = 0;
  const ConvexPolygon* poly = nullptr;
  Aabb box;
};

struct Contact {
  int a = 0;   // body index
  int b = -1;  // body index, or -1 for a static part
  int id_a = 0;
  int id_b = 0;
  Vec2 normal;
  double separation = 0.0;
  double restitution = 0.0;
  double target = 0.0;
  double allowed_approach = 0.0;  // closing speed that still leaves the gap open
  bool initialized = false;
};

Manifold body_body(const Body& a, const Body& b) {
  if (a.circle && b.circle) return collide_circles(a.x, a.radius, b.x, b.radius);
  if (a.circle) return collide_circle_polygon(a.x, a.radius, b.polygon());
  if (b.circle) {
    Manifold m = collide_circle_polygon(b.x, b.radius, a.polygon());
    m.normal = -m.normal;
    return m;
  }
  return collide_polygons(a.polygon(), b.polygon());
}

Manifold body_static(const Body& a, const ConvexPolygon& p) {
  if (a.circle) return collide_circle_polygon(a.x, a.radius, p);
  return collide_polygons(a.polygon(), p);
}

class World {
 public:
  World(const SceneSpec& scene, const WorldConfig& config) : config_(config) {
    auto objects = scene.dynamic_objects;
    std::sort(objects.begin(), objects.end(),
              [](const auto& l, const auto& r) { return l.object_id < r.object_id; });
    for (const auto& o : objects) {
      Body b;
      b.id = o.object_id;
      b.circle = o.shape == ShapeKind::kCircle;
      b.radius = o.extent();
      b.spec = o;
      b.mass = o.mass;
      b.inv_mass = 1.0 / o.mass;
      b.x = o.init_position;
      b.v = o.init_velocity;
      bodies_.push_back(b);
    }
    for (const auto& el : scene.static_elements)
      for (const auto& part : el.parts) statics_.push_back({el.element_id, &part, bounds_of(part)});
    std::stable_sort(statics_.begin(), statics_.end(),
                     [](const auto& l, const auto& r) { return l.element_id < r.element_id; });
  }

  SimulationResult run() {
    SimulationResult out;
    const int steps = config_.steps();
    out.trajectories.resize(bodies_.size());
    for (std::size_t i = 0; i < bodies_.size(); ++i) {
      out.trajectories[i].object_id = bodies_[i].id;
      out.trajectories[i].states.reserve(steps + 1);
    }
    record(out, 0);
    for (int t = 1; t <= steps; ++t) {
      step(t, out.contacts);
      record(out, t);
    }
    return out;
  }

 private:
  // With `speculative`, pairs whose gap could close within this step are
  // included too, so fast approaches are not skipped between steps.
  std::vector<Contact> find_contacts(double max_separation, bool speculative = false) const {
    std::vector<Contact> contacts;
    const double dt = config_.dt;
    auto make = [&](int a, int b, int id_a, int id_b, const Manifold& m, double restitution) {
      Contact c{a, b, id_a, id_b, m.normal, m.separation, restitution};
      if (m.separation > touch_slop_) c.allowed_approach = m.separation / dt;
      return c;
    };
    for (std::size_t i = 0; i < bodies_.size(); ++i) {
      const Body& a = bodies_[i];
      const Aabb box = a.aabb();
      const double reach_a = speculative ? length(a.v) * dt : 0.0;
      for (std::size_t j = i + 1; j < bodies_.size(); ++j) {
        const Body& b = bodies_[j];
        const double limit = max_separation + (speculative ? reach_a + length(b.v) * dt : 0.0);
        if (!box.overlaps(b.aabb(), limit)) continue;
        const Manifold m = body_body(a, b);
        if (m.separation <= limit)
          contacts.push_back(make(static_cast<int>(i), static_cast<int>(j), a.id, b.id, m,
                                  config_.restitution_dynamic));
      }
      const double limit = max_separation + reach_a;
      for (const auto& s : statics_) {
        if (!box.overlaps(s.box, limit)) continue;
        const Manifold m = body_static(a, *s.poly);
        if (m.separation <= limit)
          contacts.push_back(make(static_cast<int>(i), -1, a.id, s.element_id, m, config_.restitution_static));
      }
    }
    return contacts;
  }

  double pair_energy(const Contact& c) const {
    const Body& a = bodies_[c.a];
    double e = 0.5 * a.mass * dot(a.v, a.v);
    if (c.b >= 0) e += 0.5 * bodies_[c.b].mass * dot(bodies_[c.b].v, bodies_[c.b].v);
    return e;
  }

  Vec2 relative_velocity(const Contact& c) const {
    const Vec2 vb = c.b >= 0 ? bodies_[c.b].v : Vec2{};
    return vb - bodies_[c.a].v;
  }

  // One impulse application; returns (normal impulse, kinetic energy change).
  std::pair<double, double> apply(Contact& c) {
    Body& a = bodies_[c.a];
    Body* b = c.b >= 0 ? &bodies_[c.b] : nullptr;
    const double inv_a = a.inv_mass;
    const double inv_b = b ? b->inv_mass : 0.0;
    const double inv_sum = inv_a + inv_b;
    const double vn = dot(relative_velocity(c), c.normal);
    if (vn >= -c.allowed_approach) return {0.0, 0.0};
    if (!c.initialized) {
      c.initialized = true;
      c.target = vn < -config_.bounce_threshold ? -c.restitution * vn : 0.0;
    }
    if (vn >= 0.0 || vn >= c.target) return {0.0, 0.0};
    // Never leave faster than the current approach speed: each application
    // is individually non-increasing in kinetic energy.
    const double vn_after = std::min(c.target, -vn);
    const double delta = vn_after - vn;
    const double energy_before = pair_energy(c);
    a.v -= c.normal * (delta * (inv_a / inv_sum));
    if (b) b->v += c.normal * (delta * (inv_b / inv_sum));
    const double jn = delta / inv_sum;

    // Coulomb friction bounded by this application's normal impulse; it only
    // slows the tangential slip, never reverses it.
    const Vec2 tangent = perp(c.normal);
    const double vt = dot(relative_velocity(c), tangent);
    if (vt != 0.0 && config_.friction > 0.0) {
      const double jt_free = -vt / inv_sum;
      const double jt_max = config_.friction * jn;
      const double jt = std::clamp(jt_free, -jt_max, jt_max);
      a.v -= tangent * (jt * inv_a);
      if (b) b->v += tangent * (jt * inv_b);
    }
    return {jn, pair_energy(c) - energy_before};
  }

  void step(int t, ContactLog& log) {
    const double dt = config_.dt;
    const Vec2 g{0.0, -config_.gravity};
    std::vector<Vec2> v_old(bodies_.size());
    for (std::size_t i = 0; i < bodies_.size(); ++i) {
      v_old[i] = bodies_[i].v;
      bodies_[i].v += g * dt;
    }

    auto contacts = find_contacts(touch_slop_, true);
    std::vector<double> impulse(contacts.size(), 0.0);
    std::vector<double> energy(contacts.size(), 0.0);
    for (int it = 0; it < config_.solver_iterations; ++it) {
      for (std::size_t k = 0; k < contacts.size(); ++k) {
        const auto [jn, de] = apply(contacts[k]);
        impulse[k] += jn;
        energy[k] += de;
      }
    }

    // Aggregate per pair; several static parts of one element collapse to one record.
    std::map<std::pair<int, int>, ContactRecord> by_pair;
    std::map<std::pair<int, int>, double> strongest;
    for (std::size_t k = 0; k < contacts.size(); ++k) {
      if (impulse[k] <= 0.0) continue;
      const auto key = std::make_pair(contacts[k].id_a, contacts[k].id_b);
      auto [it, inserted] = by_pair.try_emplace(key, ContactRecord{t, key.first, key.second, {}, 0.0, 0.0});
      it->second.impulse += impulse[k];
      it->second.energy_delta += energy[k];
      if (inserted || impulse[k] > strongest[key]) {
        strongest[key] = impulse[k];
        it->second.normal = contacts[k].normal;
      }
    }
    for (auto& [key, rec] : by_pair) log.push_back(rec);

    for (std::size_t i = 0; i < bodies_.size(); ++i)
      bodies_[i].x += (v_old[i] + bodies_[i].v) * (0.5 * dt);

    resolve_penetration();

    for (auto& b : bodies_) {
      if (!is_finite(b.v) || length(b.v) > config_.speed_cap) throw SimulationDivergedError(t, b.id);
      b.x.x = std::clamp(b.x.x, 0.0, kWorldSize);
      b.x.y = std::clamp(b.x.y, 0.0, kWorldSize);
    }
  }

  // Pure position projection; velocities are untouched.
  void resolve_penetration() {
    for (int it = 0; it < 4; ++it) {
      bool any = false;
      for (const auto& c : find_contacts(0.0)) {
        if (c.separation >= 0.0) continue;
        any = true;
        Body& a = bodies_[c.a];
        const double pen = -c.separation;
        if (c.b >= 0) {
          Body& b = bodies_[c.b];
          const double inv_sum = a.inv_mass + b.inv_mass;
          a.x -= c.normal * (pen * (a.inv_mass / inv_sum));
          b.x += c.normal * (pen * (b.inv_mass / inv_sum));
        } else {
          a.x -= c.normal * pen;
        }
      }
      if (!any) break;
    }
  }

  // Contact sets: within tolerance at the recorded positions, plus any pair
  // that exchanged an impulse this step (speculative contacts can act a
  // fraction of a step before the surfaces meet).
  void record(SimulationResult& out, int t) const {
    std::vector<std::vector<int>> touching(bodies_.size());
    for (const auto& c : find_contacts(config_.contact_tolerance)) {
      touching[c.a].push_back(c.id_b);
      if (c.b >= 0) touching[c.b].push_back(c.id_a);
    }
    for (auto it = out.contacts.rbegin(); it != out.contacts.rend() && it->timestep == t; ++it) {
      const auto index_of = [&](int id) {
        for (std::size_t i = 0; i < bodies_.size(); ++i)
          if (bodies_[i].id == id) return static_cast<int>(i);
        return -1;
      };
      const int ia = index_of(it->id_a);
      const int ib = index_of(it->id_b);
      if (ia >= 0) touching[ia].push_back(it->id_b);
      if (ib >= 0) touching[ib].push_back(it->id_a);
    }
    for (std::size_t i = 0; i < bodies_.size(); ++i) {
      auto& ids = touching[i];
      std::sort(ids.begin(), ids.end());
      ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
      out.trajectories[i].states.push_back({bodies_[i].x, bodies_[i].v, std::move(ids)});
    }
  }

  WorldConfig config_;
  std::vector<Body> bodies_;
  std::vector<StaticPart> statics_;
  double touch_slop_ = 0.01;
};

}  // namespace

SimulationResult simulate(const SceneSpec& scene, const WorldConfig& config) {
  config.validate();
  return World(scene, config).run();
}

double kinetic_energy(const SceneSpec& scene, const SimulationResult& result, int timestep) {
  double e = 0.0;
  for (const auto& tr : result.trajectories) {
    const auto* spec = scene.find_object(tr.object_id);
    const Vec2 v = tr.states.at(timestep).velocity;
    e += 0.5 * (spec ? spec->mass : 1.0) * dot(v, v);
  }
  return e;
}

}  // namespace abduct
