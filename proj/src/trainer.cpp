#include "abduct/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "abduct/errors.hpp"
#include "abduct/rng.hpp"

namespace abduct {

using Eigen::VectorXd;

FeatureScaler fit_scaler(const std::vector<const VideoRecord*>& videos, int dim) {
  VectorXd sum = VectorXd::Zero(dim);
  VectorXd sq = VectorXd::Zero(dim);
  double n = 0.0;
  for (const VideoRecord* v : videos) {
    for (const Event& e : v->events) {
      if (static_cast<int>(e.features.size()) != dim)
        throw InputError("video " + std::to_string(v->video_id) + " event " + std::to_string(e.event_id) +
                         " has " + std::to_string(e.features.size()) + " features, expected " +
                         std::to_string(dim));
      const VectorXd x = Eigen::Map<const VectorXd>(e.features.data(), dim);
      sum += x;
      sq += x.cwiseProduct(x);
      n += 1.0;
    }
  }
  FeatureScaler s = FeatureScaler::identity(dim);
  if (n == 0.0) return s;
  s.mean = sum / n;
  for (int k = 0; k < dim; ++k) {
    const double var = std::max(0.0, sq[k] / n - s.mean[k] * s.mean[k]);
    const double sd = std::sqrt(var);
    s.inv_std[k] = sd > 1e-9 ? 1.0 / sd : 1.0;
  }
  return s;
}

std::vector<PreparedVideo> prepare_videos(const std::vector<const VideoRecord*>& videos,
                                          const FeatureScaler& scaler, const PremiseOptions& premise) {
  std::vector<PreparedVideo> out;
  out.reserve(videos.size());
  for (const VideoRecord* v : videos) {
    PreparedVideo pv;
    pv.video_id = v->video_id;
    pv.data.graph = make_graph_input(v->events, scaler, premise);
    const GraphInput& g = pv.data.graph;
    for (int id : g.event_ids) {
      auto it = std::find_if(v->events.begin(), v->events.end(), [&](const Event& e) { return e.event_id == id; });
      pv.events.push_back(*it);
    }
    for (const auto& pair : v->pairs) {
      LabeledTarget t;
      t.target = g.position_of(pair.target_event_id);
      if (t.target < 1)
        throw InputError("video " + std::to_string(v->video_id) + ": target " +
                         std::to_string(pair.target_event_id) + " has no premise events");
      for (int trig : pair.trigger_event_ids) {
        const int pos = g.position_of(trig);
        if (pos < 0 || pos >= t.target)
          throw InputError("video " + std::to_string(v->video_id) + ": trigger " + std::to_string(trig) +
                           " does not precede target " + std::to_string(pair.target_event_id));
        t.triggers.push_back(pos);
      }
      std::sort(t.triggers.begin(), t.triggers.end());
      t.triggers.erase(std::unique(t.triggers.begin(), t.triggers.end()), t.triggers.end());
      if (t.triggers.empty()) continue;
      pv.data.targets.push_back(std::move(t));
    }
    std::sort(pv.data.targets.begin(), pv.data.targets.end(),
              [](const LabeledTarget& a, const LabeledTarget& b) { return a.target < b.target; });
    out.push_back(std::move(pv));
  }
  return out;
}

std::vector<PreparedVideo> prepare_split(const Dataset& dataset, Split split, const FeatureScaler& scaler,
                                         const PremiseOptions& premise) {
  return prepare_videos(dataset.videos_in(split), scaler, premise);
}

double mean_edge_gap(const std::vector<PreparedVideo>& videos) {
  double sum = 0.0;
  double n = 0.0;
  for (const auto& v : videos) {
    const GraphInput& g = v.data.graph;
    for (int t = 0; t < g.size(); ++t)
      for (int u : g.in_neighbors[t]) {
        sum += interval_gap(g.times[u], g.times[t]);
        n += 1.0;
      }
  }
  return n > 0.0 ? sum / n : 1.0;
}

void TrainConfig::validate() const {
  model.validate();
  if (epochs < 0) throw InputError("epochs must be non-negative");
  if (batch_size < 1) throw InputError("batch size must be positive");
  if (!(learning_rate > 0.0)) throw InputError("learning rate must be positive");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw InputError("learning-rate decay must lie in (0, 1]");
  if (patience < 1) throw InputError("patience must be positive");
  if (!(positive_weight > 0.0)) throw InputError("positive weight must be positive");
}

namespace {

struct Adam {
  VectorXd m, v;
  long t = 0;
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  explicit Adam(Eigen::Index n) : m(VectorXd::Zero(n)), v(VectorXd::Zero(n)) {}

  void step(VectorXd& x, const VectorXd& g, double lr) {
    ++t;
    m = kBeta1 * m + (1.0 - kBeta1) * g;
    v = kBeta2 * v + (1.0 - kBeta2) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t));
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + kEps);
  }
};

// Whole videos in shuffled order, cut once a batch holds batch_size targets.
std::vector<std::vector<BatchItem>> make_batches(const std::vector<PreparedVideo>& videos, int batch_size,
                                                 Rng& rng) {
  std::vector<int> order(videos.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::vector<std::vector<BatchItem>> batches;
  std::vector<BatchItem> current;
  int count = 0;
  for (int idx : order) {
    const auto& v = videos[idx];
    if (v.data.targets.empty()) continue;
    BatchItem item;
    item.video = &v.data;
    item.target_indices.resize(v.data.targets.size());
    std::iota(item.target_indices.begin(), item.target_indices.end(), 0);
    count += static_cast<int>(v.data.targets.size());
    current.push_back(std::move(item));
    if (count >= batch_size) {
      batches.push_back(std::move(current));
      current.clear();
      count = 0;
    }
  }
  if (!current.empty()) batches.push_back(std::move(current));
  return batches;
}

double val_accuracy(const std::vector<PreparedVideo>& val, const ModelParams& params, const ModelOptions& opt) {
  if (val.empty()) return 0.0;
  CernScorer scorer(params, opt);
  return evaluate(scorer, val, "val").accuracy;
}

}  // namespace

TrainResult train(const std::vector<PreparedVideo>& train_set, const std::vector<PreparedVideo>& val_set,
                  ModelParams init, const TrainConfig& config) {
  config.validate();
  if (init.layer_count() != config.model.layers)
    throw InputError("initial parameters have " + std::to_string(init.layer_count()) + " layers, options request " +
                     std::to_string(config.model.layers));

  TrainResult result;
  result.options = config.model;
  result.params = init;
  result.best_val_accuracy = val_accuracy(val_set, init, config.model);
  result.best_epoch = 0;
  if (config.epochs == 0) return result;

  ModelParams params = std::move(init);
  VectorXd flat = params.flatten();
  Adam adam(flat.size());
  double lr = config.learning_rate;
  int stale = 0;
  int step = 0;
  ModelParams grad;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    const auto batches = make_batches(train_set, config.batch_size, rng);
    double loss_sum = 0.0;
    for (const auto& batch : batches) {
      ++step;
      const double loss = loss_and_gradient(batch, params, config.model, &grad, config.exec, config.positive_weight);
      if (!std::isfinite(loss)) throw TrainingDivergedError(epoch, step);
      loss_sum += loss;
      adam.step(flat, grad.flatten(), lr);
      if (!flat.allFinite()) throw TrainingDivergedError(epoch, step);
      params.unflatten(flat);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = batches.empty() ? 0.0 : loss_sum / static_cast<double>(batches.size());
    rec.learning_rate = lr;
    rec.val_accuracy = val_accuracy(val_set, params, config.model);
    result.curve.push_back(rec);

    if (val_set.empty() || rec.val_accuracy > result.best_val_accuracy) {
      result.best_val_accuracy = rec.val_accuracy;
      result.best_epoch = epoch;
      result.params = params;
      stale = 0;
    } else if (++stale >= config.patience) {
      break;
    }
    lr *= config.lr_decay;
  }
  return result;
}

TrainResult train_on_dataset(const Dataset& dataset, const TrainConfig& config) {
  config.validate();
  const auto train_records = dataset.videos_in(Split::kTrain);
  const FeatureScaler scaler = fit_scaler(train_records, dataset.feature_dim);
  const auto train_set = prepare_videos(train_records, scaler, config.model.premise);
  const auto val_set = prepare_split(dataset, Split::kVal, scaler, config.model.premise);
  ModelParams init = ModelParams::initialize(dataset.feature_dim, config.model.layers,
                                             mix_seed(config.seed, 0x1417), mean_edge_gap(train_set));
  init.scaler = scaler;
  return train(train_set, val_set, std::move(init), config);
}

std::string loss_curve_csv(const std::vector<EpochRecord>& curve) {
  std::ostringstream os;
  os << "epoch,train_loss,val_accuracy,learning_rate\n" << std::setprecision(17);
  for (const auto& r : curve) os << r.epoch << ',' << r.train_loss << ',' << r.val_accuracy << ',' << r.learning_rate << '\n';
  return os.str();
}

}  // namespace abduct
