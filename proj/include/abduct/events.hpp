#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "abduct/allen.hpp"
#include "abduct/scene.hpp"
#include "abduct/simulate.hpp"

namespace abduct {

/// Detection thresholds for state changes and interactions.
struct Thresholds {
  double delta_speed = 5.0;        ///< units/s, velocity jump beyond free fall
  double heading_degrees = 10.0;   ///< heading jump beyond free fall
  int proximity_window = 2;        ///< timesteps on either side of a contact onset
  int slide_min_steps = 5;
  double slide_tangential_speed = 1.0;
  double min_speed = 1.0;          ///< headings of slower objects are not compared

  bool operator==(const Thresholds&) const = default;
};

enum class InteractionType { kCollision = 0, kSlide = 1 };
std::string_view to_string(InteractionType t);
InteractionType interaction_from_string(std::string_view s);

struct StateChange {
  int object_id = 0;
  int timestep = 0;
  double delta_speed = 0.0;
  double delta_heading = 0.0;  ///< radians
};

struct Interaction {
  int id_a = 0;  ///< dynamic object, id_a < id_b
  int id_b = 0;
  InteractionType type = InteractionType::kCollision;
  int timestep_start = 0;
  int timestep_end = 0;

  bool operator==(const Interaction&) const = default;
};

/// Per-object, per-timestep feature layout:
/// position(2) velocity(2) shape(3) size(2) color(8) partner class(8).
inline constexpr int kObjectFeatureDim = 2 + 2 + kNumShapes + kNumSizes + kNumColors + 8;
/// [main object features, partner features, ts, te].
inline constexpr int kEventFeatureDim = 2 * kObjectFeatureDim + 2;
/// Partner-class slot used for dynamic objects; static kinds use their enum value.
inline constexpr int kDynamicPartnerClass = kNumElementKinds;

struct Event {
  int event_id = 0;
  int main_object_id = 0;
  int partner_id = 0;
  InteractionType type = InteractionType::kCollision;
  double ts = 0.0;
  double te = 0.0;
  std::vector<double> features;
  /// Main object's mean position over [ts, te]; used for counterfactual matching.
  Vec2 main_position;
  /// Free text carried through from external records; empty for simulated events.
  std::string label;

  bool partner_is_dynamic() const { return !is_static_id(partner_id); }
  TimedEvent timed() const { return {ts, te, event_id}; }
  bool operator==(const Event&) const = default;
};

/// Velocity jumps not explained by gravity, per object and timestep.
std::vector<StateChange> detect_state_changes(const SimulationResult& sim, const WorldConfig& config,
                                              const Thresholds& thresholds);

/// Pairwise interactions backed by a participant state change within the
/// proximity window of the contact onset. Throws InputError when the
/// trajectories and contact log disagree in length.
std::vector<Interaction> detect_interactions(const SimulationResult& sim, const ContactLog& contacts,
                                             const WorldConfig& config, const Thresholds& thresholds);

/// Splits each object's lifetime at direction-changing interactions. Features
/// are left empty; event ids are assigned in temporal order.
std::vector<Event> segment_events(const std::vector<Interaction>& interactions,
                                  const SimulationResult& sim, const WorldConfig& config,
                                  const Thresholds& thresholds);

/// Fills `event.features` (and main_position). Throws InputError for an
/// empty or out-of-range interval.
void featurize_event(Event& event, const SimulationResult& sim, const SceneSpec& scene,
                     const WorldConfig& config);

/// detect -> segment -> featurize.
std::vector<Event> extract_events(const SceneSpec& scene, const SimulationResult& sim,
                                  const WorldConfig& config, const Thresholds& thresholds);

/// Sorts events into temporal order and renumbers ids 0..n-1.
void assign_event_ids(std::vector<Event>& events);

}  // namespace abduct
