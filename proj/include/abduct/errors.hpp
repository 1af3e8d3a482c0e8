#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace abduct {

/// Malformed or inconsistent input (bad ids, mismatched lengths, bad files).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Rejection sampling could not place every dynamic object.
class UnplaceableSceneError : public std::runtime_error {
 public:
  UnplaceableSceneError(int layout_id, std::uint64_t seed)
      : std::runtime_error("unplaceable scene: layout " + std::to_string(layout_id) +
                           ", seed " + std::to_string(seed)),
        layout_id(layout_id),
        seed(seed) {}
  int layout_id;
  std::uint64_t seed;
};

/// A body exceeded the velocity cap.
class SimulationDivergedError : public std::runtime_error {
 public:
  SimulationDivergedError(int timestep, int object_id)
      : std::runtime_error("simulation diverged at timestep " + std::to_string(timestep) +
                           " (object " + std::to_string(object_id) + ")"),
        timestep(timestep),
        object_id(object_id) {}
  int timestep;
  int object_id;
};

/// A counterfactual re-simulation failed; names the removed object.
class CounterfactualSimulationError : public std::runtime_error {
 public:
  CounterfactualSimulationError(int removed_object_id, const std::string& cause)
      : std::runtime_error("re-simulation without object " + std::to_string(removed_object_id) +
                           " failed: " + cause),
        removed_object_id(removed_object_id) {}
  int removed_object_id;
};

/// Loss became non-finite during training.
class TrainingDivergedError : public std::runtime_error {
 public:
  TrainingDivergedError(int epoch, int step)
      : std::runtime_error("training diverged (non-finite loss) at epoch " +
                           std::to_string(epoch) + ", step " + std::to_string(step)),
        epoch(epoch),
        step(step) {}
  int epoch;
  int step;
};

}  // namespace abduct
