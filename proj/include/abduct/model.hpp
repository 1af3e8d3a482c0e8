#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "abduct/execution.hpp"
#include "abduct/relations.hpp"

namespace abduct {

/// Structural switches, including the ablations.
struct ModelOptions {
  int layers = 4;
  bool temporal_only = false;     ///< r_sem replaced by ones
  bool semantic_only = false;     ///< r_temp fixed to 1
  bool message_skip = true;       ///< W2 term of the aggregation
  bool layer_skip = true;         ///< h^{l-1} term of the update
  bool distance_penalty = true;   ///< gamma; when false gamma = 1
  PremiseOptions premise;

  /// Throws InputError for contradictory or invalid settings.
  void validate() const;
  bool operator==(const ModelOptions&) const = default;
};

struct LayerParams {
  Eigen::MatrixXd W1, W2, W3, W4;  ///< W3 is d x 2d and acts on [h; r]

  explicit LayerParams(int d = 0);
};

/// z-score statistics fitted on training features; fixed during training.
struct FeatureScaler {
  Eigen::VectorXd mean;
  Eigen::VectorXd inv_std;

  static FeatureScaler identity(int d);
  Eigen::VectorXd apply(const std::vector<double>& raw) const;
};

struct ModelParams {
  RelationParams relation;
  std::vector<LayerParams> layers;
  Eigen::MatrixXd target_W;    ///< d x d
  Eigen::VectorXd target_b;    ///< d
  Eigen::VectorXd classifier;  ///< 2d, acts on [h_i; z_t]
  double classifier_b = 0.0;
  FeatureScaler scaler;        ///< not learnable

  ModelParams() = default;
  ModelParams(int d, int layer_count);  ///< all zeros, identity scaler

  int dim() const { return relation.dim(); }
  int layer_count() const { return static_cast<int>(layers.size()); }

  /// Xavier-uniform weights, zero biases, decay set so the penalty is
  /// exp(-1) at `mean_gap`.
  static ModelParams initialize(int d, int layer_count, std::uint64_t seed, double mean_gap);

  /// Visits every learnable block in a fixed order.
  void for_each_block(const std::function<void(Eigen::Ref<Eigen::MatrixXd>)>& f);
  std::size_t scalar_count() const;
  Eigen::VectorXd flatten() const;
  void unflatten(const Eigen::VectorXd& flat);
  /// Same shapes, all learnable values zero (scaler copied).
  ModelParams zeros_like() const;
};

/// Ordered nodes of one video with normalized features and full premise topology.
struct GraphInput {
  Eigen::MatrixXd features;             ///< d x n, columns in temporal order
  std::vector<TimedEvent> times;
  std::vector<int> event_ids;
  std::vector<std::vector<int>> in_neighbors;

  int size() const { return static_cast<int>(times.size()); }
  int position_of(int event_id) const;
};

GraphInput make_graph_input(const std::vector<Event>& events, const FeatureScaler& scaler,
                            const PremiseOptions& premise);

struct NodeEmbeddings {
  std::vector<Eigen::MatrixXd> h;  ///< h[0] = inputs, h[l] after layer l; each d x n
};

/// Edge features for every in-edge, indexed like in_neighbors.
std::vector<std::vector<EdgeFeature>> edge_features(const GraphInput& g, const ModelParams& params,
                                                    const ModelOptions& options);

/// One message-passing layer.
Eigen::MatrixXd forward_layer(const GraphInput& g, const Eigen::MatrixXd& h_prev,
                              const std::vector<std::vector<EdgeFeature>>& edges, const LayerParams& layer,
                              const ModelOptions& options);

/// All layers; throws InputError if options.layers does not match params.
NodeEmbeddings forward(const GraphInput& g, const ModelParams& params, const ModelOptions& options);

Eigen::VectorXd target_embedding(const Eigen::VectorXd& e_target, const ModelParams& params);

double classify(const Eigen::VectorXd& h_i, const Eigen::VectorXd& z_t, const ModelParams& params);

inline constexpr double kProbabilityEpsilon = 1e-7;

/// Mean binary cross-entropy with predictions clamped to [eps, 1-eps].
double bce_loss(const std::vector<double>& predictions, const std::vector<double>& labels);

/// One supervised target inside a video: positions index GraphInput nodes.
struct LabeledTarget {
  int target = 0;
  std::vector<int> triggers;  ///< ascending positions < target
};

struct TrainingVideo {
  GraphInput graph;
  std::vector<LabeledTarget> targets;
};

struct BatchItem {
  const TrainingVideo* video = nullptr;
  std::vector<int> target_indices;  ///< into video->targets
};

/// Mean BCE over every (target, premise event) label of the batch and its
/// exact gradient. Per-video gradients are reduced in batch order, so serial
/// and parallel execution agree bitwise. Positive labels may be up-weighted.
double loss_and_gradient(const std::vector<BatchItem>& batch, const ModelParams& params,
                         const ModelOptions& options, ModelParams* gradient, Execution exec,
                         double positive_weight = 1.0);

/// Trigger probabilities for every premise node of `target` (positions 0..target-1).
std::vector<double> premise_scores(const GraphInput& g, const NodeEmbeddings& emb, int target,
                                   const ModelParams& params);

/// JSON checkpoint with explicit shapes; loading validates every dimension.
std::string params_to_json(const ModelParams& params, const ModelOptions& options);
std::pair<ModelParams, ModelOptions> params_from_json(const std::string& text);

}  // namespace abduct
