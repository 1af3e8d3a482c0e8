#pragma once

#include <map>
#include <vector>

#include "abduct/events.hpp"

namespace abduct {

enum class EdgeMode {
  /// Consecutive events along each object's chain.
  kChain,
  /// Every ordered pair under the Allen order (complete DAG).
  kFull,
};

/// Directed acyclic graph of one video's events. Nodes are stored in temporal
/// order; edges always point from an earlier node to a later one.
struct EventGraph {
  std::vector<Event> nodes;
  std::vector<std::vector<int>> out_edges;  ///< node index -> ascending node indices
  std::vector<std::vector<int>> in_edges;
  /// Dynamic object id -> node indices of the events it takes part in (main or partner), in order.
  std::map<int, std::vector<int>> chains;
  std::map<int, int> index_of_id;
  EdgeMode mode = EdgeMode::kChain;

  int index_of(int event_id) const;  ///< -1 when absent
  std::size_t edge_count() const;
  const Event& event(int event_id) const;
};

/// Throws InputError on duplicate event ids.
EventGraph build_event_graph(std::vector<Event> events, EdgeMode mode = EdgeMode::kChain);

}  // namespace abduct
