#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "abduct/event_graph.hpp"
#include "abduct/events.hpp"
#include "abduct/scene.hpp"
#include "abduct/simulate.hpp"

namespace abduct {

struct MatchTolerances {
  double time = 0.3;    ///< seconds, applied to both ts and te
  double space = 10.0;  ///< units, main-object mean position

  bool operator==(const MatchTolerances&) const = default;
};

/// Outcome of searching one target in a counterfactual graph.
struct TargetMatch {
  int original_target_event_id = 0;
  std::optional<int> matched_event_id;
  // Components for the best attribute-compatible candidate, if any.
  bool same_objects = false;
  bool same_type = false;
  double delta_ts = 0.0;
  double delta_te = 0.0;
  double spatial_distance = 0.0;
};

TargetMatch match_target_detailed(const Event& target, const EventGraph& counterfactual,
                                  const MatchTolerances& tolerances);

/// Event id in `counterfactual` that reproduces `target`, if any.
std::optional<int> match_target(const Event& target, const EventGraph& counterfactual,
                                const MatchTolerances& tolerances);

struct PathSearch {
  std::vector<std::vector<int>> paths;  ///< event ids, src first
  bool truncated = false;               ///< stopped at the path cap
};

inline constexpr std::size_t kDefaultPathCap = 10000;

/// All simple directed paths src -> dst in lexicographic order of node ids.
PathSearch dfs_all_paths(const EventGraph& graph, int src_event_id, int dst_event_id,
                         std::size_t max_paths = kDefaultPathCap);

struct TriggerTargetPair {
  int video_id = 0;
  int target_event_id = 0;
  std::vector<int> trigger_event_ids;    ///< ascending, deduplicated
  std::vector<int> affecting_object_ids;  ///< ascending
  bool path_cap_hit = false;

  bool operator==(const TriggerTargetPair&) const = default;
};

/// Trigger selection for one target given its affecting objects. Only
/// events that precede the target are candidates. The trigger list may come
/// back empty, in which case callers drop the target. Throws InputError if
/// the target is not in `graph`.
TriggerTargetPair extract_trigger_pairs(const EventGraph& graph, int target_event_id,
                                        const std::vector<int>& affecting_objects,
                                        std::size_t max_paths = kDefaultPathCap);

struct LabelConfig {
  WorldConfig world;
  Thresholds thresholds;
  MatchTolerances tolerances;
  std::size_t max_paths = kDefaultPathCap;
  EdgeMode edge_mode = EdgeMode::kChain;
};

/// Events of one simulated scene plus the counterfactual graph obtained by
/// removing each dynamic object in turn.
class CounterfactualSet {
 public:
  CounterfactualSet(const SceneSpec& scene, const LabelConfig& config);

  const std::vector<Event>& events() const { return events_; }
  const EventGraph& graph() const { return graph_; }
  const EventGraph& without(int object_id) const { return counterfactuals_.at(object_id); }
  const std::map<int, EventGraph>& counterfactuals() const { return counterfactuals_; }

  /// Objects whose removal makes `target` disappear.
  std::vector<int> affecting_objects(const Event& target) const;

 private:
  LabelConfig config_;
  std::vector<Event> events_;
  EventGraph graph_;
  std::map<int, EventGraph> counterfactuals_;
};

/// Simulate -> extract -> build graph for one scene.
std::vector<Event> simulate_and_extract(const SceneSpec& scene, const LabelConfig& config);

/// Uncached: re-simulates the scene once per dynamic object.
std::vector<int> find_affecting_objects(const SceneSpec& scene, const LabelConfig& config,
                                        const Event& target);

struct VideoRecord {
  int video_id = 0;
  SceneSpec scene;
  std::vector<Event> events;
  std::vector<TriggerTargetPair> pairs;
};

/// Labels every target (events with at least one predecessor) of one video.
VideoRecord label_video(int video_id, const SceneSpec& scene, const LabelConfig& config);

/// Re-runs the construction check for one pair: every affecting object's
/// removal must make the target unmatchable. Returns the failing object ids.
std::vector<int> verify_pair(const SceneSpec& scene, const LabelConfig& config,
                             const std::vector<Event>& events, const TriggerTargetPair& pair);

}  // namespace abduct
