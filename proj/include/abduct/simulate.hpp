#pragma once

#include <vector>

#include "abduct/geometry.hpp"
#include "abduct/scene.hpp"

namespace abduct {

struct WorldConfig {
  double gravity = 400.0;              ///< units/s^2, acting along -y
  double restitution_dynamic = 0.8;    ///< dynamic-dynamic contacts
  double restitution_static = 0.5;     ///< dynamic-static contacts
  double friction = 0.3;
  double dt = 1.0 / 60.0;
  double duration = 10.0;
  /// Approach speeds below this are resolved inelastically (resting contact).
  double bounce_threshold = 10.0;
  /// |v| above this aborts the run.
  double speed_cap = 5000.0;
  /// Separation at or below which two shapes are recorded as in contact.
  double contact_tolerance = 0.5;
  int solver_iterations = 8;

  int steps() const;
  /// Throws InputError when dt/duration are inconsistent.
  void validate() const;
  bool operator==(const WorldConfig&) const = default;
};

struct ObjectState {
  Vec2 position;
  Vec2 velocity;
  std::vector<int> in_contact_with;  ///< sorted ids (dynamic and static)
};

struct Trajectory {
  int object_id = 0;
  std::vector<ObjectState> states;  ///< steps() + 1 entries, index = timestep
};

struct ContactRecord {
  int timestep = 0;
  int id_a = 0;  ///< always < id_b
  int id_b = 0;
  Vec2 normal;   ///< from id_a towards id_b
  double impulse = 0.0;
  /// Sum of kinetic-energy changes of the pair's impulse applications this step (<= 0).
  double energy_delta = 0.0;
};

using ContactLog = std::vector<ContactRecord>;

struct SimulationResult {
  std::vector<Trajectory> trajectories;  ///< ascending object id
  ContactLog contacts;                    ///< ascending (timestep, id_a, id_b)

  const Trajectory* find(int object_id) const;
};

/// Fixed-step deterministic integration of `scene` under `config`.
/// Throws SimulationDivergedError when a body exceeds the speed cap.
SimulationResult simulate(const SceneSpec& scene, const WorldConfig& config);

double kinetic_energy(const SceneSpec& scene, const SimulationResult& result, int timestep);

}  // namespace abduct
