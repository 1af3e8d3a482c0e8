#include "abduct/events.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <tuple>

#include "abduct/errors.hpp"

namespace abduct {

namespace {

constexpr std::array<std::string_view, 2> kInteractionNames{"collision", "slide"};

double angle_between(Vec2 a, Vec2 b) {
  const double c = std::clamp(dot(a, b) / (length(a) * length(b)), -1.0, 1.0);
  return std::acos(c);
}

/// Velocity at `to` predicted from the motion just before `from`.
Vec2 extrapolate(const std::vector<ObjectState>& states, int from, int to, const WorldConfig& config) {
  const Vec2 v = states[from].velocity;
  const Vec2 accel = from >= 1 ? v - states[from - 1].velocity : Vec2{0.0, -config.gravity * config.dt};
  return v + accel * static_cast<double>(to - from);
}

struct PairKey {
  int a;
  int b;
  auto operator<=>(const PairKey&) const = default;
};

void validate_lengths(const SimulationResult& sim, const ContactLog& contacts) {
  if (sim.trajectories.empty()) return;
  const std::size_t len = sim.trajectories.front().states.size();
  for (const auto& tr : sim.trajectories)
    if (tr.states.size() != len)
      throw InputError("trajectory lengths differ (object " + std::to_string(tr.object_id) + ")");
  for (const auto& c : contacts)
    if (c.timestep < 0 || static_cast<std::size_t>(c.timestep) >= len)
      throw InputError("contact log timestep " + std::to_string(c.timestep) +
                       " outside trajectory range");
}

}  // namespace

std::string_view to_string(InteractionType t) { return kInteractionNames[static_cast<int>(t)]; }

InteractionType interaction_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kInteractionNames.size(); ++i)
    if (kInteractionNames[i] == s) return static_cast<InteractionType>(i);
  throw InputError("unknown interaction type: " + std::string(s));
}

std::vector<StateChange> detect_state_changes(const SimulationResult& sim, const WorldConfig& config,
                                              const Thresholds& th) {
  std::vector<StateChange> out;
  const double heading_limit = th.heading_degrees * std::numbers::pi / 180.0;
  for (const auto& tr : sim.trajectories) {
    const auto& s = tr.states;
    for (int t = 1; t < static_cast<int>(s.size()); ++t) {
      const Vec2 predicted = extrapolate(s, t - 1, t, config);
      const Vec2 actual = s[t].velocity;
      const double jump = length(actual - predicted);
      double heading = 0.0;
      if (length(predicted) >= th.min_speed && length(actual) >= th.min_speed)
        heading = angle_between(predicted, actual);
      if (jump > th.delta_speed || heading > heading_limit)
        out.push_back({tr.object_id, t, jump, heading});
    }
  }
  return out;
}

std::vector<Interaction> detect_interactions(const SimulationResult& sim, const ContactLog& contacts,
                                             const WorldConfig& config, const Thresholds& th) {
  validate_lengths(sim, contacts);
  if (sim.trajectories.empty()) return {};
  const int last = static_cast<int>(sim.trajectories.front().states.size()) - 1;
  const int w = th.proximity_window;

  std::set<std::pair<int, int>> changes;  // (object, timestep)
  for (const auto& sc : detect_state_changes(sim, config, th)) changes.emplace(sc.object_id, sc.timestep);
  auto changed_near = [&](int id, int t) {
    if (is_static_id(id)) return false;
    auto it = changes.lower_bound({id, t - w});
    return it != changes.end() && it->first == id && it->second <= t + w;
  };

  std::map<PairKey, std::vector<const ContactRecord*>> impulses;
  for (const auto& c : contacts) impulses[{c.id_a, c.id_b}].push_back(&c);

  std::map<PairKey, std::vector<int>> touching;
  for (const auto& tr : sim.trajectories)
    for (int t = 0; t <= last; ++t)
      for (int other : tr.states[t].in_contact_with)
        if (other > tr.object_id) touching[{tr.object_id, other}].push_back(t);

  std::vector<Interaction> out;
  for (const auto& [key, steps] : touching) {
    const auto log_it = impulses.find(key);
    if (log_it == impulses.end()) continue;
    const auto& log = log_it->second;
    std::size_t i = 0;
    while (i < steps.size()) {
      std::size_t j = i;
      while (j + 1 < steps.size() && steps[j + 1] == steps[j] + 1) ++j;
      const int run_start = steps[i];
      const int run_end = steps[j];
      i = j + 1;

      // First impulse exchanged during the run marks physical contact.
      const auto first = std::find_if(log.begin(), log.end(), [&](const ContactRecord* c) {
        return c->timestep >= run_start - w && c->timestep <= run_end + w;
      });
      if (first == log.end()) continue;
      const int onset = std::clamp((*first)->timestep - 1, run_start, run_end);
      if (!changed_near(key.a, onset) && !changed_near(key.b, onset)) continue;

      InteractionType type = InteractionType::kCollision;
      if (run_end - onset + 1 >= th.slide_min_steps) {
        double tangential = 0.0;
        int samples = 0;
        for (auto it = first; it != log.end() && (*it)->timestep <= run_end + 1; ++it) {
          const int t = std::min((*it)->timestep, last);
          const Vec2 va = sim.find(key.a)->states[t].velocity;
          const Vec2 vb = is_static_id(key.b) ? Vec2{} : sim.find(key.b)->states[t].velocity;
          tangential += std::abs(dot(vb - va, perp((*it)->normal)));
          ++samples;
        }
        if (samples > 0 && tangential / samples > th.slide_tangential_speed) type = InteractionType::kSlide;
      }
      out.push_back({key.a, key.b, type, onset, run_end});
    }
  }
  std::sort(out.begin(), out.end(), [](const Interaction& l, const Interaction& r) {
    return std::tie(l.timestep_start, l.id_a, l.id_b) < std::tie(r.timestep_start, r.id_a, r.id_b);
  });
  return out;
}

std::vector<Event> segment_events(const std::vector<Interaction>& interactions,
                                  const SimulationResult& sim, const WorldConfig& config,
                                  const Thresholds& th) {
  const double heading_limit = th.heading_degrees * std::numbers::pi / 180.0;
  std::vector<Event> events;
  for (const auto& tr : sim.trajectories) {
    const int m = tr.object_id;
    const auto& s = tr.states;
    const int last = static_cast<int>(s.size()) - 1;

    // (onset, partner, type) of interactions that redirect m.
    std::vector<std::tuple<int, int, InteractionType>> boundaries;
    for (const auto& in : interactions) {
      if (in.id_a != m && in.id_b != m) continue;
      const int partner = in.id_a == m ? in.id_b : in.id_a;
      const int onset = in.timestep_start;
      if (onset >= last) continue;
      const int pre = std::max(onset - 1, 0);
      const int post = std::min(onset + th.proximity_window + 1, last);
      const Vec2 predicted = extrapolate(s, pre, post, config);
      const Vec2 actual = s[post].velocity;
      const double sp = length(predicted);
      const double sa = length(actual);
      bool redirect;
      if (sp >= th.min_speed && sa >= th.min_speed) {
        redirect = angle_between(predicted, actual) > heading_limit;
      } else {
        redirect = std::abs(sa - sp) > th.delta_speed;
      }
      if (redirect) boundaries.emplace_back(onset, partner, in.type);
    }
    // One boundary per onset: prefer a dynamic partner, then the lowest id.
    std::sort(boundaries.begin(), boundaries.end(), [](const auto& l, const auto& r) {
      const auto key = [](const auto& b) {
        return std::make_tuple(std::get<0>(b), is_static_id(std::get<1>(b)), std::get<1>(b));
      };
      return key(l) < key(r);
    });
    boundaries.erase(std::unique(boundaries.begin(), boundaries.end(),
                                 [](const auto& l, const auto& r) { return std::get<0>(l) == std::get<0>(r); }),
                     boundaries.end());

    for (std::size_t k = 0; k < boundaries.size(); ++k) {
      const auto [onset, partner, type] = boundaries[k];
      const int end = k + 1 < boundaries.size() ? std::get<0>(boundaries[k + 1]) : last;
      Event e;
      e.main_object_id = m;
      e.partner_id = partner;
      e.type = type;
      e.ts = onset * config.dt;
      e.te = k + 1 < boundaries.size() ? end * config.dt : config.duration;
      events.push_back(std::move(e));
    }
  }
  assign_event_ids(events);
  return events;
}

void assign_event_ids(std::vector<Event>& events) {
  std::sort(events.begin(), events.end(), [](const Event& l, const Event& r) {
    if (l.te != r.te) return l.te < r.te;
    if (l.ts != r.ts) return l.ts > r.ts;
    return std::tie(l.main_object_id, l.partner_id) < std::tie(r.main_object_id, r.partner_id);
  });
  for (std::size_t i = 0; i < events.size(); ++i) events[i].event_id = static_cast<int>(i);
}

namespace {

void append_object_features(std::vector<double>& f, const DynamicObjectSpec* obj, Vec2 pos, Vec2 vel,
                            int partner_class) {
  const std::size_t base = f.size();
  f.resize(base + kObjectFeatureDim, 0.0);
  if (obj) {
    f[base + 0] = pos.x;
    f[base + 1] = pos.y;
    f[base + 2] = vel.x;
    f[base + 3] = vel.y;
    f[base + 4 + static_cast<int>(obj->shape)] = 1.0;
    f[base + 4 + kNumShapes + static_cast<int>(obj->size)] = 1.0;
    f[base + 4 + kNumShapes + kNumSizes + obj->color] = 1.0;
  }
  f[base + 4 + kNumShapes + kNumSizes + kNumColors + partner_class] = 1.0;
}

}  // namespace

void featurize_event(Event& event, const SimulationResult& sim, const SceneSpec& scene,
                     const WorldConfig& config) {
  if (!(event.te > event.ts)) throw InputError("event " + std::to_string(event.event_id) + " has an empty interval");
  const Trajectory* main = sim.find(event.main_object_id);
  const DynamicObjectSpec* main_spec = scene.find_object(event.main_object_id);
  if (!main || !main_spec) throw InputError("unknown main object " + std::to_string(event.main_object_id));
  const int k0 = static_cast<int>(std::llround(event.ts / config.dt));
  const int k1 = static_cast<int>(std::llround(event.te / config.dt));
  if (k0 < 0 || k1 >= static_cast<int>(main->states.size()) || k1 <= k0)
    throw InputError("event " + std::to_string(event.event_id) + " interval outside trajectory");

  const Trajectory* partner = nullptr;
  const DynamicObjectSpec* partner_spec = nullptr;
  int partner_class = kDynamicPartnerClass;
  if (is_static_id(event.partner_id)) {
    const StaticElement* el = scene.find_element(event.partner_id);
    if (!el) throw InputError("unknown static partner " + std::to_string(event.partner_id));
    partner_class = static_cast<int>(el->kind);
  } else {
    partner = sim.find(event.partner_id);
    partner_spec = scene.find_object(event.partner_id);
    if (!partner || !partner_spec) throw InputError("unknown partner " + std::to_string(event.partner_id));
  }

  // Temporal mean of the kinematic channels over the closed interval [k0, k1].
  Vec2 main_pos, main_vel, part_pos, part_vel;
  for (int k = k0; k <= k1; ++k) {
    main_pos += main->states[k].position;
    main_vel += main->states[k].velocity;
    if (partner) {
      part_pos += partner->states[k].position;
      part_vel += partner->states[k].velocity;
    }
  }
  const double inv = 1.0 / static_cast<double>(k1 - k0 + 1);
  main_pos = main_pos * inv;
  main_vel = main_vel * inv;
  part_pos = part_pos * inv;
  part_vel = part_vel * inv;

  event.features.clear();
  event.features.reserve(kEventFeatureDim);
  append_object_features(event.features, main_spec, main_pos, main_vel, partner_class);
  append_object_features(event.features, partner_spec, part_pos, part_vel, partner_class);
  event.features.push_back(event.ts);
  event.features.push_back(event.te);
  event.main_position = main_pos;
}

std::vector<Event> extract_events(const SceneSpec& scene, const SimulationResult& sim,
                                  const WorldConfig& config, const Thresholds& thresholds) {
  const auto interactions = detect_interactions(sim, sim.contacts, config, thresholds);
  auto events = segment_events(interactions, sim, config, thresholds);
  for (auto& e : events) featurize_event(e, sim, scene, config);
  return events;
}

}  // namespace abduct
