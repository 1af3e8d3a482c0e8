#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "abduct/dataset.hpp"
#include "abduct/model.hpp"
#include "abduct/rng.hpp"

namespace abduct {

/// One video ready for the network: events in temporal order plus labels by position.
struct PreparedVideo {
  int video_id = 0;
  std::vector<Event> events;  ///< temporal order; index = graph position
  TrainingVideo data;
};

/// z-scores fitted on the raw features of the given videos (zero-variance
/// channels keep scale 1).
FeatureScaler fit_scaler(const std::vector<const VideoRecord*>& videos, int dim);

std::vector<PreparedVideo> prepare_videos(const std::vector<const VideoRecord*>& videos,
                                          const FeatureScaler& scaler, const PremiseOptions& premise);

std::vector<PreparedVideo> prepare_split(const Dataset& dataset, Split split, const FeatureScaler& scaler,
                                         const PremiseOptions& premise);

/// Mean interval gap over every premise edge; used to initialize the decay.
double mean_edge_gap(const std::vector<PreparedVideo>& videos);

struct TrainConfig {
  int epochs = 100;
  int batch_size = 128;         ///< instances; batches are whole videos
  double learning_rate = 1e-4;
  double lr_decay = 0.95;       ///< multiplied in after every epoch
  std::uint64_t seed = 0;
  int patience = 10;            ///< epochs without validation gain before stopping
  double positive_weight = 1.0;
  ModelOptions model;
  Execution exec = Execution::kParallel;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  double learning_rate = 0.0;
};

struct TrainResult {
  ModelParams params;  ///< best on validation
  ModelOptions options;
  std::vector<EpochRecord> curve;
  int best_epoch = 0;
  double best_val_accuracy = 0.0;
};

/// Adam with per-epoch decay; keeps the best-on-validation parameters (the
/// latest ones when there is no validation set).
/// Throws TrainingDivergedError on a non-finite loss.
TrainResult train(const std::vector<PreparedVideo>& train_set, const std::vector<PreparedVideo>& val_set,
                  ModelParams init, const TrainConfig& config);

/// Fits the scaler on the train split, prepares all splits and trains.
TrainResult train_on_dataset(const Dataset& dataset, const TrainConfig& config);

std::string loss_curve_csv(const std::vector<EpochRecord>& curve);

// ---- evaluation ---------------------------------------------------------

enum class TieBreak { kEarliest, kRandom };

/// Scores premise positions [0, target) of one video.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual std::string name() const = 0;
  virtual void begin_video(const PreparedVideo&) {}
  virtual std::vector<double> score(const PreparedVideo& video, int target) = 0;
};

struct InstanceResult {
  int video_id = 0;
  int target_event_id = 0;
  int predicted_event_id = 0;
  int premise_count = 0;
  int trigger_count = 0;
  bool correct = false;
};

struct VideoBreakdown {
  int video_id = 0;
  int instances = 0;
  int correct = 0;
};

struct EvalReport {
  std::string model;
  std::string split;
  double accuracy = 0.0;          ///< % top-1 hits on any ground-truth trigger
  double all_hit_accuracy = 0.0;  ///< % instances whose whole trigger set outranks every non-trigger
  double random_expectation = 0.0;  ///< % analytic top-1 accuracy of a uniform guess
  int instances = 0;
  std::vector<VideoBreakdown> per_video;
  std::vector<InstanceResult> details;
  std::string config_fingerprint;
};

EvalReport evaluate(Scorer& scorer, const std::vector<PreparedVideo>& videos, const std::string& split,
                    TieBreak tie_break = TieBreak::kEarliest, std::uint64_t seed = 0);

/// Index of the winning score under the tie-break rule.
int pick_top(const std::vector<double>& scores, TieBreak tie_break, Rng* rng);

/// Σ (triggers / premises) / instances, in percent.
double analytic_random_accuracy(const std::vector<PreparedVideo>& videos);

class CernScorer : public Scorer {
 public:
  CernScorer(ModelParams params, ModelOptions options, std::string name = "cern");
  std::string name() const override { return name_; }
  void begin_video(const PreparedVideo& video) override;
  std::vector<double> score(const PreparedVideo& video, int target) override;

 private:
  ModelParams params_;
  ModelOptions options_;
  std::string name_;
  NodeEmbeddings emb_;
};

/// Uniform random scores from a seeded stream.
class RandomScorer : public Scorer {
 public:
  explicit RandomScorer(std::uint64_t seed);
  std::string name() const override { return "random"; }
  std::vector<double> score(const PreparedVideo& video, int target) override;

 private:
  Rng rng_;
};

/// Earliest collision among the premise events, else the earliest event.
class FirstCollisionScorer : public Scorer {
 public:
  std::string name() const override { return "first_collision"; }
  std::vector<double> score(const PreparedVideo& video, int target) override;
};

/// Logistic regression on an event's own features.
class NodeEmbeddingScorer : public Scorer {
 public:
  NodeEmbeddingScorer(Eigen::VectorXd weights, double bias) : w_(std::move(weights)), b_(bias) {}
  std::string name() const override { return "node_embeddings"; }
  std::vector<double> score(const PreparedVideo& video, int target) override;
  const Eigen::VectorXd& weights() const { return w_; }
  double bias() const { return b_; }

 private:
  Eigen::VectorXd w_;
  double b_;
};

/// Full-batch Adam on the weighted label loss; starts from zero (the problem is convex).
struct LinearConfig {
  int steps = 400;
  double learning_rate = 5e-2;
  int eval_every = 10;  ///< validation accuracy checked every this many steps
  int patience = 10;    ///< checks without gain before stopping
};

NodeEmbeddingScorer train_node_embeddings(const std::vector<PreparedVideo>& train_set,
                                          const std::vector<PreparedVideo>& val_set, const LinearConfig& config);

// ---- ablations ----------------------------------------------------------

/// Known names: full, temporal_only, semantic_only, two_layers, no_msg_skip,
/// no_layer_skip, no_skip, no_distance_penalty. Throws InputError otherwise.
ModelOptions ablation_options(const std::string& name, const ModelOptions& base);
std::vector<std::string> ablation_names();

struct AblationResult {
  std::string name;
  TrainResult training;
  EvalReport val;
  EvalReport test;
};

AblationResult run_ablation(const std::string& name, const Dataset& dataset, const TrainConfig& base);

// ---- reports ------------------------------------------------------------

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);
/// Header plus one row per report: model, split, accuracy, all-hit, random expectation, instances, fingerprint.
std::string reports_csv(const std::vector<EvalReport>& reports);

/// Stable 64-bit FNV-1a digest rendered as 16 hex digits.
std::string fingerprint(const std::string& text);

}  // namespace abduct
