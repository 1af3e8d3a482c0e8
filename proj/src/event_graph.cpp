#include "abduct/event_graph.hpp"

#include <algorithm>
#include <string>

#include "abduct/errors.hpp"

namespace abduct {

int EventGraph::index_of(int event_id) const {
  const auto it = index_of_id.find(event_id);
  return it == index_of_id.end() ? -1 : it->second;
}

std::size_t EventGraph::edge_count() const {
  std::size_t n = 0;
  for (const auto& e : out_edges) n += e.size();
  return n;
}

const Event& EventGraph::event(int event_id) const {
  const int i = index_of(event_id);
  if (i < 0) throw InputError("event " + std::to_string(event_id) + " not in graph");
  return nodes[i];
}

EventGraph build_event_graph(std::vector<Event> events, EdgeMode mode) {
  EventGraph g;
  g.mode = mode;
  std::sort(events.begin(), events.end(),
            [](const Event& l, const Event& r) { return precedes(l.timed(), r.timed()); });
  g.nodes = std::move(events);
  const int n = static_cast<int>(g.nodes.size());
  for (int i = 0; i < n; ++i) {
    if (!g.index_of_id.emplace(g.nodes[i].event_id, i).second)
      throw InputError("duplicate event id " + std::to_string(g.nodes[i].event_id));
  }
  g.out_edges.assign(n, {});
  g.in_edges.assign(n, {});

  for (int i = 0; i < n; ++i) {
    const Event& e = g.nodes[i];
    g.chains[e.main_object_id].push_back(i);
    if (e.partner_is_dynamic() && e.partner_id != e.main_object_id) g.chains[e.partner_id].push_back(i);
  }

  auto add_edge = [&](int from, int to) {
    g.out_edges[from].push_back(to);
    g.in_edges[to].push_back(from);
  };
  if (mode == EdgeMode::kFull) {
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) add_edge(i, j);
  } else {
    for (const auto& [obj, chain] : g.chains)
      for (std::size_t k = 1; k < chain.size(); ++k) add_edge(chain[k - 1], chain[k]);
  }
  for (auto& v : g.out_edges) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  for (auto& v : g.in_edges) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  return g;
}

}  // namespace abduct
