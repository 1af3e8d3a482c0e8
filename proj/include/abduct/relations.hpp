#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "abduct/allen.hpp"
#include "abduct/events.hpp"

namespace abduct {

/// Learnable edge parameters. The bilinear tensor has k = d slices stacked
/// row-wise: slice s occupies rows [s*d, (s+1)*d) of `bilinear`.
struct RelationParams {
  Eigen::MatrixXd bilinear;     ///< (k*d) x d
  Eigen::VectorXd bias;         ///< k
  double raw_decay = 0.0;       ///< decay = exp(raw_decay) > 0
  Eigen::Vector4d temporal_w = Eigen::Vector4d::Zero();
  double temporal_b = 0.0;

  explicit RelationParams(int d = 0);
  int dim() const { return static_cast<int>(bilinear.cols()); }
  double decay() const;
  auto slice(int s) { return bilinear.middleRows(static_cast<Eigen::Index>(s) * dim(), dim()); }
  auto slice(int s) const { return bilinear.middleRows(static_cast<Eigen::Index>(s) * dim(), dim()); }
};

struct EdgeFeature {
  double r_temp = 0.0;
  Eigen::VectorXd r_sem;
  Eigen::VectorXd r;
};

/// Euclidean distance between (ts, te) pairs.
double interval_gap(const TimedEvent& i, const TimedEvent& j);

/// exp(-decay * gap).
double distance_penalty(double decay, double gap);

/// penalty * tanh(e_iᵀ W_s e_j + b_s) for every slice s. Throws InputError on
/// a dimension mismatch.
Eigen::VectorXd semantic_relation(const Eigen::VectorXd& e_i, const TimedEvent& t_i,
                                  const Eigen::VectorXd& e_j, const TimedEvent& t_j,
                                  const RelationParams& params, bool use_penalty = true);

/// r_temp = sigmoid(w_tᵀ d + b_t); r = r_temp * r_sem.
EdgeFeature combine_relation(const TemporalDistance& temporal, const Eigen::VectorXd& sem,
                             const RelationParams& params);

/// Topology of the graph over the events preceding a target. Nodes are in
/// temporal order; in_neighbors hold ascending node positions.
struct PremiseGraph {
  std::vector<int> event_ids;
  std::vector<std::vector<int>> in_neighbors;

  std::size_t edge_count() const;
};

struct PremiseOptions {
  /// Keep u -> v only when ts_v - ts_u <= window (seconds). Unset: complete DAG.
  std::optional<double> window;

  bool operator==(const PremiseOptions&) const = default;
};

/// Graph over the first `target_index` events of `events` once sorted into
/// temporal order. Throws InputError when target_index < 1 (no premise) or
/// exceeds the event count.
PremiseGraph build_premise_graph(const std::vector<Event>& events, int target_index,
                                 const PremiseOptions& options = {});

/// Same topology rule applied to already-ordered intervals.
std::vector<std::vector<int>> premise_in_neighbors(const std::vector<TimedEvent>& ordered,
                                                   const PremiseOptions& options);

}  // namespace abduct
