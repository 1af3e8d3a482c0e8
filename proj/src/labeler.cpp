#include "abduct/labeler.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "abduct/errors.hpp"

namespace abduct {

TargetMatch match_target_detailed(const Event& target, const EventGraph& counterfactual,
                                  const MatchTolerances& tolerances) {
  TargetMatch out;
  out.original_target_event_id = target.event_id;
  double best_score = INFINITY;
  int best_id = 0;
  bool have_candidate = false;
  for (const Event& e : counterfactual.nodes) {
    if (e.main_object_id != target.main_object_id || e.partner_id != target.partner_id) continue;
    const double dts = std::abs(e.ts - target.ts);
    const double dte = std::abs(e.te - target.te);
    const double dist = length(e.main_position - target.main_position);
    const bool same_type = e.type == target.type;
    const bool ok = same_type && dts <= tolerances.time && dte <= tolerances.time &&
                    dist <= tolerances.space;
    // Matches beat non-matches; among equals, closest in time, then lowest id.
    const double score = (ok ? 0.0 : 1e9) + dts + dte;
    if (!have_candidate || score < best_score ||
        (score == best_score && e.event_id < best_id)) {
      have_candidate = true;
      best_id = e.event_id;
      best_score = score;
      out.same_objects = true;
      out.same_type = same_type;
      out.delta_ts = dts;
      out.delta_te = dte;
      out.spatial_distance = dist;
      out.matched_event_id = ok ? std::optional<int>(e.event_id) : std::nullopt;
    }
  }
  return out;
}

std::optional<int> match_target(const Event& target, const EventGraph& counterfactual,
                                const MatchTolerances& tolerances) {
  return match_target_detailed(target, counterfactual, tolerances).matched_event_id;
}

namespace {

struct PathDfs {
  const EventGraph& g;
  int dst;
  std::size_t cap;
  std::vector<char> reaches_dst;
  std::vector<std::vector<int>> sorted_out;  // neighbours ordered by event id
  std::vector<char> on_path;
  std::vector<int> path;
  PathSearch result;

  void run(int node) {
    if (result.truncated) return;
    path.push_back(g.nodes[node].event_id);
    on_path[node] = 1;
    if (node == dst) {
      if (result.paths.size() >= cap) {
        result.truncated = true;
      } else {
        result.paths.push_back(path);
      }
    } else {
      for (int next : sorted_out[node]) {
        if (result.truncated) break;
        if (!reaches_dst[next] || on_path[next]) continue;
        run(next);
      }
    }
    on_path[node] = 0;
    path.pop_back();
  }
};

}  // namespace

PathSearch dfs_all_paths(const EventGraph& graph, int src_event_id, int dst_event_id,
                         std::size_t max_paths) {
  const int src = graph.index_of(src_event_id);
  const int dst = graph.index_of(dst_event_id);
  if (src < 0 || dst < 0) throw InputError("path endpoints must be events of the graph");
  const std::size_t n = graph.nodes.size();

  PathDfs dfs{graph, dst, max_paths, std::vector<char>(n, 0), {}, std::vector<char>(n, 0), {}, {}};
  // Backward reachability prunes branches that cannot end at dst.
  std::vector<int> stack{dst};
  dfs.reaches_dst[dst] = 1;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int u : graph.in_edges[v]) {
      if (!dfs.reaches_dst[u]) {
        dfs.reaches_dst[u] = 1;
        stack.push_back(u);
      }
    }
  }
  if (!dfs.reaches_dst[src]) return {};

  dfs.sorted_out = graph.out_edges;
  for (auto& v : dfs.sorted_out)
    std::sort(v.begin(), v.end(), [&](int a, int b) {
      return graph.nodes[a].event_id < graph.nodes[b].event_id;
    });
  dfs.run(src);
  return std::move(dfs.result);
}

TriggerTargetPair extract_trigger_pairs(const EventGraph& graph, int target_event_id,
                                        const std::vector<int>& affecting_objects,
                                        std::size_t max_paths) {
  const int target = graph.index_of(target_event_id);
  if (target < 0) throw InputError("target event " + std::to_string(target_event_id) + " not in graph");

  TriggerTargetPair pair;
  pair.target_event_id = target_event_id;
  pair.affecting_object_ids = affecting_objects;
  std::sort(pair.affecting_object_ids.begin(), pair.affecting_object_ids.end());
  pair.affecting_object_ids.erase(
      std::unique(pair.affecting_object_ids.begin(), pair.affecting_object_ids.end()),
      pair.affecting_object_ids.end());

  std::set<int> triggers;
  for (int object : pair.affecting_object_ids) {
    const auto chain_it = graph.chains.find(object);
    if (chain_it == graph.chains.end()) continue;
    // Earliest event of this object that precedes the target.
    const auto& chain = chain_it->second;
    if (chain.empty() || chain.front() >= target) continue;
    const Event& first = graph.nodes[chain.front()];

    const PathSearch search = dfs_all_paths(graph, first.event_id, target_event_id, max_paths);
    pair.path_cap_hit = pair.path_cap_hit || search.truncated;
    for (const auto& path : search.paths) {
      int chosen = first.event_id;
      for (std::size_t k = 0; k + 1 < path.size(); ++k) {
        if (graph.event(path[k]).partner_is_dynamic()) {
          chosen = path[k];
          break;
        }
      }
      triggers.insert(chosen);
    }
  }
  pair.trigger_event_ids.assign(triggers.begin(), triggers.end());
  return pair;
}

std::vector<Event> simulate_and_extract(const SceneSpec& scene, const LabelConfig& config) {
  const SimulationResult sim = simulate(scene, config.world);
  return extract_events(scene, sim, config.world, config.thresholds);
}

namespace {

EventGraph counterfactual_graph(const SceneSpec& scene, const LabelConfig& config, int removed) {
  try {
    return build_event_graph(simulate_and_extract(remove_object(scene, removed), config),
                             config.edge_mode);
  } catch (const SimulationDivergedError& e) {
    throw CounterfactualSimulationError(removed, e.what());
  }
}

bool disappears(const Event& target, const EventGraph& cf, const MatchTolerances& tol) {
  return !match_target(target, cf, tol).has_value();
}

}  // namespace

CounterfactualSet::CounterfactualSet(const SceneSpec& scene, const LabelConfig& config)
    : config_(config),
      events_(simulate_and_extract(scene, config)),
      graph_(build_event_graph(events_, config.edge_mode)) {
  for (const auto& obj : scene.dynamic_objects)
    counterfactuals_.emplace(obj.object_id, counterfactual_graph(scene, config, obj.object_id));
}

std::vector<int> CounterfactualSet::affecting_objects(const Event& target) const {
  std::vector<int> out;
  for (const auto& [id, cf] : counterfactuals_)
    if (disappears(target, cf, config_.tolerances)) out.push_back(id);
  return out;
}

std::vector<int> find_affecting_objects(const SceneSpec& scene, const LabelConfig& config,
                                        const Event& target) {
  std::vector<int> out;
  for (const auto& obj : scene.dynamic_objects) {
    if (disappears(target, counterfactual_graph(scene, config, obj.object_id), config.tolerances))
      out.push_back(obj.object_id);
  }
  return out;
}

VideoRecord label_video(int video_id, const SceneSpec& scene, const LabelConfig& config) {
  const CounterfactualSet cf(scene, config);
  VideoRecord rec;
  rec.video_id = video_id;
  rec.scene = scene;
  rec.events = cf.events();
  const EventGraph& g = cf.graph();
  // Node 0 has no premise; every later node is a target candidate.
  for (std::size_t i = 1; i < g.nodes.size(); ++i) {
    const Event& target = g.nodes[i];
    const auto affecting = cf.affecting_objects(target);
    if (affecting.empty()) continue;
    TriggerTargetPair pair = extract_trigger_pairs(g, target.event_id, affecting, config.max_paths);
    if (pair.trigger_event_ids.empty()) continue;
    pair.video_id = video_id;
    rec.pairs.push_back(std::move(pair));
  }
  return rec;
}

std::vector<int> verify_pair(const SceneSpec& scene, const LabelConfig& config,
                             const std::vector<Event>& events, const TriggerTargetPair& pair) {
  const auto it = std::find_if(events.begin(), events.end(),
                               [&](const Event& e) { return e.event_id == pair.target_event_id; });
  if (it == events.end()) throw InputError("target event not found");
  std::vector<int> failing;
  for (int object : pair.affecting_object_ids) {
    if (!disappears(*it, counterfactual_graph(scene, config, object), config.tolerances))
      failing.push_back(object);
  }
  return failing;
}

}  // namespace abduct
