#include "abduct/relations.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "abduct/errors.hpp"

namespace abduct {

RelationParams::RelationParams(int d)
    : bilinear(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d) * d, d)), bias(Eigen::VectorXd::Zero(d)) {}

double RelationParams::decay() const { return std::exp(raw_decay); }

double interval_gap(const TimedEvent& i, const TimedEvent& j) {
  return std::hypot(j.ts - i.ts, j.te - i.te);
}

double distance_penalty(double decay, double gap) { return std::exp(-decay * gap); }

Eigen::VectorXd semantic_relation(const Eigen::VectorXd& e_i, const TimedEvent& t_i,
                                  const Eigen::VectorXd& e_j, const TimedEvent& t_j,
                                  const RelationParams& params, bool use_penalty) {
  const int d = params.dim();
  if (e_i.size() != d || e_j.size() != d)
    throw InputError("feature dimension " + std::to_string(e_i.size()) + "/" + std::to_string(e_j.size()) +
                     " does not match relation dimension " + std::to_string(d));
  // Stacked slices times e_j, viewed as d x k: column s is W_s e_j.
  const Eigen::VectorXd stacked = params.bilinear * e_j;
  const Eigen::Map<const Eigen::MatrixXd> projected(stacked.data(), d, d);
  const Eigen::VectorXd pre = projected.transpose() * e_i + params.bias;
  const double gamma = use_penalty ? distance_penalty(params.decay(), interval_gap(t_i, t_j)) : 1.0;
  return gamma * pre.array().tanh().matrix();
}

EdgeFeature combine_relation(const TemporalDistance& temporal, const Eigen::VectorXd& sem,
                             const RelationParams& params) {
  const Eigen::Vector4d dv(temporal.v[0], temporal.v[1], temporal.v[2], temporal.v[3]);
  EdgeFeature f;
  f.r_temp = 1.0 / (1.0 + std::exp(-(params.temporal_w.dot(dv) + params.temporal_b)));
  f.r_sem = sem;
  f.r = f.r_temp * sem;
  return f;
}

std::size_t PremiseGraph::edge_count() const {
  std::size_t n = 0;
  for (const auto& v : in_neighbors) n += v.size();
  return n;
}

std::vector<std::vector<int>> premise_in_neighbors(const std::vector<TimedEvent>& ordered,
                                                   const PremiseOptions& options) {
  const int n = static_cast<int>(ordered.size());
  std::vector<std::vector<int>> in(n);
  for (int v = 0; v < n; ++v) {
    for (int u = 0; u < v; ++u) {
      if (options.window && ordered[v].ts - ordered[u].ts > *options.window) continue;
      in[v].push_back(u);
    }
  }
  return in;
}

PremiseGraph build_premise_graph(const std::vector<Event>& events, int target_index,
                                 const PremiseOptions& options) {
  if (target_index < 1) throw InputError("target has no premise events");
  if (target_index > static_cast<int>(events.size())) throw InputError("target index beyond event list");
  std::vector<TimedEvent> ordered;
  for (const auto& e : events) ordered.push_back(e.timed());
  std::sort(ordered.begin(), ordered.end(), precedes);
  ordered.resize(target_index);

  PremiseGraph g;
  for (const auto& t : ordered) g.event_ids.push_back(t.id);
  g.in_neighbors = premise_in_neighbors(ordered, options);
  return g;
}

}  // namespace abduct
