#include "abduct/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <nlohmann/json.hpp>

#include "abduct/errors.hpp"
#include "abduct/rng.hpp"

namespace abduct {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr int kCheckpointVersion = 1;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

VectorXd relu(const VectorXd& v) { return v.cwiseMax(0.0); }

// Derivative convention at 0 is 0.
VectorXd relu_mask(const VectorXd& pre) { return (pre.array() > 0.0).cast<double>().matrix(); }

void xavier(Eigen::Ref<MatrixXd> m, Rng& rng, double fan_in, double fan_out) {
  const double s = std::sqrt(6.0 / (fan_in + fan_out));
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-s, s);
}

}  // namespace

void ModelOptions::validate() const {
  if (layers < 1) throw InputError("model needs at least one layer");
  if (temporal_only && semantic_only) throw InputError("temporal_only and semantic_only are exclusive");
  if (temporal_only && !distance_penalty)
    throw InputError("distance penalty ablation has no effect with temporal_only");
  if (premise.window && !(*premise.window > 0.0)) throw InputError("premise window must be positive");
}

LayerParams::LayerParams(int d)
    : W1(MatrixXd::Zero(d, d)), W2(MatrixXd::Zero(d, d)), W3(MatrixXd::Zero(d, 2 * d)), W4(MatrixXd::Zero(d, d)) {}

FeatureScaler FeatureScaler::identity(int d) { return {VectorXd::Zero(d), VectorXd::Ones(d)}; }

VectorXd FeatureScaler::apply(const std::vector<double>& raw) const {
  if (static_cast<Eigen::Index>(raw.size()) != mean.size())
    throw InputError("feature vector has " + std::to_string(raw.size()) + " values, expected " +
                     std::to_string(mean.size()));
  const Eigen::Map<const VectorXd> v(raw.data(), static_cast<Eigen::Index>(raw.size()));
  return (v - mean).cwiseProduct(inv_std);
}

ModelParams::ModelParams(int d, int layer_count)
    : relation(d),
      target_W(MatrixXd::Zero(d, d)),
      target_b(VectorXd::Zero(d)),
      classifier(VectorXd::Zero(2 * d)),
      scaler(FeatureScaler::identity(d)) {
  for (int l = 0; l < layer_count; ++l) layers.emplace_back(d);
}

ModelParams ModelParams::initialize(int d, int layer_count, std::uint64_t seed, double mean_gap) {
  ModelParams p(d, layer_count);
  Rng rng(seed);
  // Each slice feeds one output from d*d bilinear terms.
  xavier(p.relation.bilinear, rng, static_cast<double>(d) * d, 1.0);
  xavier(p.relation.temporal_w, rng, 4.0, 1.0);
  p.relation.raw_decay = mean_gap > 0.0 ? -std::log(mean_gap) : 0.0;
  for (auto& layer : p.layers) {
    xavier(layer.W1, rng, d, d);
    xavier(layer.W2, rng, d, d);
    xavier(layer.W3, rng, 2.0 * d, d);
    xavier(layer.W4, rng, d, d);
  }
  xavier(p.target_W, rng, d, d);
  xavier(p.classifier, rng, 2.0 * d, 1.0);
  return p;
}

void ModelParams::for_each_block(const std::function<void(Eigen::Ref<MatrixXd>)>& f) {
  f(relation.bilinear);
  f(relation.bias);
  Eigen::Map<MatrixXd> decay(&relation.raw_decay, 1, 1);
  f(decay);
  f(relation.temporal_w);
  Eigen::Map<MatrixXd> tb(&relation.temporal_b, 1, 1);
  f(tb);
  for (auto& layer : layers) {
    f(layer.W1);
    f(layer.W2);
    f(layer.W3);
    f(layer.W4);
  }
  f(target_W);
  f(target_b);
  f(classifier);
  Eigen::Map<MatrixXd> cb(&classifier_b, 1, 1);
  f(cb);
}

std::size_t ModelParams::scalar_count() const {
  std::size_t n = 0;
  const_cast<ModelParams*>(this)->for_each_block([&](Eigen::Ref<MatrixXd> m) { n += m.size(); });
  return n;
}

VectorXd ModelParams::flatten() const {
  VectorXd out(static_cast<Eigen::Index>(scalar_count()));
  Eigen::Index at = 0;
  const_cast<ModelParams*>(this)->for_each_block([&](Eigen::Ref<MatrixXd> m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) out[at++] = m(i, j);
  });
  return out;
}

void ModelParams::unflatten(const VectorXd& flat) {
  if (flat.size() != static_cast<Eigen::Index>(scalar_count())) throw InputError("flat parameter size mismatch");
  Eigen::Index at = 0;
  for_each_block([&](Eigen::Ref<MatrixXd> m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = flat[at++];
  });
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z(dim(), layer_count());
  z.scaler = scaler;
  return z;
}

int GraphInput::position_of(int event_id) const {
  const auto it = std::find(event_ids.begin(), event_ids.end(), event_id);
  return it == event_ids.end() ? -1 : static_cast<int>(it - event_ids.begin());
}

GraphInput make_graph_input(const std::vector<Event>& events, const FeatureScaler& scaler,
                            const PremiseOptions& premise) {
  std::vector<const Event*> order;
  for (const auto& e : events) order.push_back(&e);
  std::sort(order.begin(), order.end(), [](const Event* l, const Event* r) { return precedes(l->timed(), r->timed()); });
  GraphInput g;
  const auto d = scaler.mean.size();
  g.features.resize(d, static_cast<Eigen::Index>(order.size()));
  for (std::size_t k = 0; k < order.size(); ++k) {
    g.features.col(static_cast<Eigen::Index>(k)) = scaler.apply(order[k]->features);
    g.times.push_back(order[k]->timed());
    g.event_ids.push_back(order[k]->event_id);
  }
  g.in_neighbors = premise_in_neighbors(g.times, premise);
  return g;
}

namespace {

struct EdgeCache {
  Eigen::Vector4d dist;
  double gap = 0.0;
  double gamma = 1.0;
  VectorXd tanh_pre;  // empty when temporal_only
  EdgeFeature feature;
};

// Per-layer intermediates kept for the backward pass.
struct LayerCache {
  MatrixXd pre;                          // h_prev (+) W4 F before the rectifier
  MatrixXd F;                            // aggregated messages per node
  MatrixXd msg_sum;                      // sum of rectified messages
  MatrixXd skip_sum;                     // sum of (h_j + r_ji)
  std::vector<std::vector<VectorXd>> q;  // message pre-activations per edge
};

std::vector<std::vector<EdgeCache>> compute_edges(const GraphInput& g, const ModelParams& params,
                                                  const ModelOptions& opt) {
  const int n = g.size();
  const int d = params.dim();
  if (g.features.rows() != d)
    throw InputError("graph feature dimension " + std::to_string(g.features.rows()) + " does not match model " +
                     std::to_string(d));
  const RelationParams& rel = params.relation;
  const double decay = rel.decay();
  std::vector<std::vector<EdgeCache>> out(n);
  VectorXd stacked(static_cast<Eigen::Index>(d) * d);
  for (int v = 0; v < n; ++v) {
    const auto& in = g.in_neighbors[v];
    if (in.empty()) continue;
    if (!opt.temporal_only) stacked.noalias() = rel.bilinear * g.features.col(v);
    const Eigen::Map<const MatrixXd> projected(stacked.data(), d, d);
    out[v].resize(in.size());
    for (std::size_t k = 0; k < in.size(); ++k) {
      const int u = in[k];
      EdgeCache& c = out[v][k];
      const auto td = temporal_distance(g.times[u], g.times[v]);
      c.dist = Eigen::Vector4d(td.v[0], td.v[1], td.v[2], td.v[3]);
      c.gap = interval_gap(g.times[u], g.times[v]);
      if (opt.temporal_only) {
        c.feature.r_sem = VectorXd::Ones(d);
      } else {
        c.gamma = opt.distance_penalty ? distance_penalty(decay, c.gap) : 1.0;
        c.tanh_pre = (projected.transpose() * g.features.col(u) + rel.bias).array().tanh().matrix();
        c.feature.r_sem = c.gamma * c.tanh_pre;
      }
      c.feature.r_temp = opt.semantic_only ? 1.0 : sigmoid(rel.temporal_w.dot(c.dist) + rel.temporal_b);
      c.feature.r = c.feature.r_temp * c.feature.r_sem;
    }
  }
  return out;
}

MatrixXd layer_forward(const GraphInput& g, const MatrixXd& h_prev,
                       const std::vector<std::vector<EdgeCache>>& edges, const LayerParams& layer,
                       const ModelOptions& opt, LayerCache* cache) {
  const int n = g.size();
  const auto d = h_prev.rows();
  MatrixXd h(d, n);
  if (cache) {
    cache->pre.setZero(d, n);
    cache->F.setZero(d, n);
    cache->msg_sum.setZero(d, n);
    cache->skip_sum.setZero(d, n);
    cache->q.assign(n, {});
  }
  const auto W3h = layer.W3.leftCols(d);
  const auto W3r = layer.W3.rightCols(d);
  const MatrixXd from_h = W3h * h_prev;  // W3's h-part for every node
  VectorXd msg_sum(d), skip_sum(d), q(d);
  for (int v = 0; v < n; ++v) {
    const auto& in = g.in_neighbors[v];
    VectorXd pre = opt.layer_skip ? VectorXd(h_prev.col(v)) : VectorXd::Zero(d);
    if (!in.empty()) {
      msg_sum.setZero();
      skip_sum.setZero();
      if (cache) cache->q[v].resize(in.size());
      // Ascending neighbour order fixes the summation order.
      for (std::size_t k = 0; k < in.size(); ++k) {
        const int u = in[k];
        const VectorXd& r = edges[v][k].feature.r;
        q.noalias() = from_h.col(u) + W3r * r;
        msg_sum += q.cwiseMax(0.0);
        if (opt.message_skip) skip_sum += h_prev.col(u) + r;
        if (cache) cache->q[v][k] = q;
      }
      const double inv_n = 1.0 / static_cast<double>(in.size());
      VectorXd F = (layer.W1 * msg_sum) * inv_n;
      if (opt.message_skip) F += (layer.W2 * skip_sum) * inv_n;
      pre += layer.W4 * F;
      if (cache) {
        cache->F.col(v) = F;
        cache->msg_sum.col(v) = msg_sum;
        cache->skip_sum.col(v) = skip_sum;
      }
    }
    if (cache) cache->pre.col(v) = pre;
    h.col(v) = relu(pre);
  }
  return h;
}

struct ForwardPass {
  std::vector<std::vector<EdgeCache>> edges;
  std::vector<LayerCache> layers;
  NodeEmbeddings emb;
};

ForwardPass run_forward(const GraphInput& g, const ModelParams& params, const ModelOptions& opt, bool keep_cache) {
  if (opt.layers != params.layer_count())
    throw InputError("options request " + std::to_string(opt.layers) + " layers, parameters have " +
                     std::to_string(params.layer_count()));
  ForwardPass fp;
  fp.edges = compute_edges(g, params, opt);
  fp.emb.h.push_back(g.features);
  if (keep_cache) fp.layers.resize(params.layer_count());
  for (int l = 0; l < params.layer_count(); ++l)
    fp.emb.h.push_back(layer_forward(g, fp.emb.h.back(), fp.edges, params.layers[l], opt,
                                     keep_cache ? &fp.layers[l] : nullptr));
  return fp;
}

void add_scaled(ModelParams& into, const ModelParams& from) {
  into.relation.bilinear += from.relation.bilinear;
  into.relation.bias += from.relation.bias;
  into.relation.raw_decay += from.relation.raw_decay;
  into.relation.temporal_w += from.relation.temporal_w;
  into.relation.temporal_b += from.relation.temporal_b;
  for (std::size_t l = 0; l < into.layers.size(); ++l) {
    into.layers[l].W1 += from.layers[l].W1;
    into.layers[l].W2 += from.layers[l].W2;
    into.layers[l].W3 += from.layers[l].W3;
    into.layers[l].W4 += from.layers[l].W4;
  }
  into.target_W += from.target_W;
  into.target_b += from.target_b;
  into.classifier += from.classifier;
  into.classifier_b += from.classifier_b;
}

double label_loss(double logit, double y, double weight, double* dlogit) {
  const double p = sigmoid(logit);
  const double pc = std::clamp(p, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
  *dlogit = (pc == p) ? weight * (p - y) : 0.0;
  return -weight * (y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc));
}

// Sum of label losses of one video scaled by `scale`; gradient accumulated into grad.
double video_loss_and_gradient(const BatchItem& item, const ModelParams& params, const ModelOptions& opt,
                               double scale, double positive_weight, ModelParams& grad) {
  const GraphInput& g = item.video->graph;
  const int n = g.size();
  const int d = params.dim();
  const int L = params.layer_count();
  ForwardPass fp = run_forward(g, params, opt, true);
  const MatrixXd& top = fp.emb.h.back();
  const auto w_h = params.classifier.head(d);
  const auto w_z = params.classifier.tail(d);

  double loss = 0.0;
  MatrixXd dh = MatrixXd::Zero(d, n);
  for (int ti : item.target_indices) {
    const LabeledTarget& t = item.video->targets[ti];
    const VectorXd z = params.target_W * g.features.col(t.target) + params.target_b;
    const double z_part = w_z.dot(z) + params.classifier_b;
    double dz_sum = 0.0;
    for (int i = 0; i < t.target; ++i) {
      const double y = std::binary_search(t.triggers.begin(), t.triggers.end(), i) ? 1.0 : 0.0;
      double dlogit = 0.0;
      loss += label_loss(w_h.dot(top.col(i)) + z_part, y, y > 0.0 ? positive_weight : 1.0, &dlogit);
      dlogit *= scale;
      grad.classifier.head(d) += dlogit * top.col(i);
      dh.col(i) += dlogit * w_h;
      dz_sum += dlogit;
    }
    grad.classifier.tail(d) += dz_sum * z;
    grad.classifier_b += dz_sum;
    const VectorXd dz = dz_sum * w_z;
    grad.target_W += dz * g.features.col(t.target).transpose();
    grad.target_b += dz;
  }

  // Layers, top down. Edge-feature gradients accumulate across layers.
  std::vector<std::vector<VectorXd>> dr(n);
  for (int v = 0; v < n; ++v) dr[v].assign(g.in_neighbors[v].size(), VectorXd::Zero(d));
  for (int l = L - 1; l >= 0; --l) {
    const LayerParams& layer = params.layers[l];
    LayerParams& lg = grad.layers[l];
    const LayerCache& c = fp.layers[l];
    const MatrixXd& h_prev = fp.emb.h[l];
    MatrixXd dh_prev = MatrixXd::Zero(d, n);
    const auto W3h = layer.W3.leftCols(d);
    const auto W3r = layer.W3.rightCols(d);
    MatrixXd dW3h = MatrixXd::Zero(d, d);
    MatrixXd dW3r = MatrixXd::Zero(d, d);
    MatrixXd dfrom_h = MatrixXd::Zero(d, n);  // gradient w.r.t. W3h * h_prev columns
    for (int v = 0; v < n; ++v) {
      const VectorXd dpre = dh.col(v).cwiseProduct(relu_mask(c.pre.col(v)));
      if (opt.layer_skip) dh_prev.col(v) += dpre;
      const auto& in = g.in_neighbors[v];
      if (in.empty()) continue;
      const double inv_n = 1.0 / static_cast<double>(in.size());
      lg.W4 += dpre * c.F.col(v).transpose();
      const VectorXd dF = layer.W4.transpose() * dpre;
      lg.W1 += (dF * c.msg_sum.col(v).transpose()) * inv_n;
      const VectorXd dmsg = (layer.W1.transpose() * dF) * inv_n;
      VectorXd dskip;
      if (opt.message_skip) {
        lg.W2 += (dF * c.skip_sum.col(v).transpose()) * inv_n;
        dskip = (layer.W2.transpose() * dF) * inv_n;
      }
      for (std::size_t k = 0; k < in.size(); ++k) {
        const int u = in[k];
        const VectorXd& r = fp.edges[v][k].feature.r;
        const VectorXd dq = dmsg.cwiseProduct(relu_mask(c.q[v][k]));
        dfrom_h.col(u) += dq;
        dW3r += dq * r.transpose();
        dr[v][k] += W3r.transpose() * dq;
        if (opt.message_skip) {
          dh_prev.col(u) += dskip;
          dr[v][k] += dskip;
        }
      }
    }
    dW3h += dfrom_h * h_prev.transpose();
    dh_prev += W3h.transpose() * dfrom_h;
    lg.W3.leftCols(d) += dW3h;
    lg.W3.rightCols(d) += dW3r;
    dh = std::move(dh_prev);
  }

  // Edge features back to relation parameters.
  RelationParams& rg = grad.relation;
  const double decay = params.relation.decay();
  MatrixXd Q(d, d);
  for (int v = 0; v < n; ++v) {
    const auto& in = g.in_neighbors[v];
    if (in.empty()) continue;
    Q.setZero();
    bool any = false;
    for (std::size_t k = 0; k < in.size(); ++k) {
      const EdgeCache& e = fp.edges[v][k];
      const VectorXd& grad_r = dr[v][k];
      if (!opt.semantic_only) {
        const double dtemp = grad_r.dot(e.feature.r_sem);
        const double dlin = dtemp * e.feature.r_temp * (1.0 - e.feature.r_temp);
        rg.temporal_w += dlin * e.dist;
        rg.temporal_b += dlin;
      }
      if (opt.temporal_only) continue;
      const VectorXd dsem = e.feature.r_temp * grad_r;
      if (opt.distance_penalty) {
        const double dgamma = dsem.dot(e.tanh_pre);
        rg.raw_decay += dgamma * e.gamma * (-e.gap) * decay;
      }
      const VectorXd da = (e.gamma * dsem).cwiseProduct((1.0 - e.tanh_pre.array().square()).matrix());
      rg.bias += da;
      Q.noalias() += g.features.col(in[k]) * da.transpose();
      any = true;
    }
    if (any) {
      const Eigen::Map<const VectorXd> vecQ(Q.data(), static_cast<Eigen::Index>(d) * d);
      rg.bilinear.noalias() += vecQ * g.features.col(v).transpose();
    }
  }
  return loss * scale;
}

}  // namespace

std::vector<std::vector<EdgeFeature>> edge_features(const GraphInput& g, const ModelParams& params,
                                                    const ModelOptions& options) {
  const auto cache = compute_edges(g, params, options);
  std::vector<std::vector<EdgeFeature>> out(cache.size());
  for (std::size_t v = 0; v < cache.size(); ++v)
    for (const auto& e : cache[v]) out[v].push_back(e.feature);
  return out;
}

MatrixXd forward_layer(const GraphInput& g, const MatrixXd& h_prev,
                       const std::vector<std::vector<EdgeFeature>>& edges, const LayerParams& layer,
                       const ModelOptions& options) {
  const auto d = h_prev.rows();
  if (layer.W1.rows() != d || layer.W3.cols() != 2 * d || h_prev.cols() != g.size())
    throw InputError("layer dimensions do not match the embeddings");
  std::vector<std::vector<EdgeCache>> wrapped(edges.size());
  for (std::size_t v = 0; v < edges.size(); ++v)
    for (const auto& f : edges[v]) {
      if (f.r.size() != d) throw InputError("edge feature dimension mismatch");
      wrapped[v].push_back({Eigen::Vector4d::Zero(), 0.0, 1.0, {}, f});
    }
  return layer_forward(g, h_prev, wrapped, layer, options, nullptr);
}

NodeEmbeddings forward(const GraphInput& g, const ModelParams& params, const ModelOptions& options) {
  return run_forward(g, params, options, false).emb;
}

VectorXd target_embedding(const VectorXd& e_target, const ModelParams& params) {
  return params.target_W * e_target + params.target_b;
}

double classify(const VectorXd& h_i, const VectorXd& z_t, const ModelParams& params) {
  const int d = params.dim();
  return sigmoid(params.classifier.head(d).dot(h_i) + params.classifier.tail(d).dot(z_t) + params.classifier_b);
}

double bce_loss(const std::vector<double>& predictions, const std::vector<double>& labels) {
  if (predictions.size() != labels.size()) throw InputError("predictions and labels differ in length");
  if (predictions.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double p = std::clamp(predictions[i], kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
    sum -= labels[i] * std::log(p) + (1.0 - labels[i]) * std::log(1.0 - p);
  }
  return sum / static_cast<double>(predictions.size());
}

double loss_and_gradient(const std::vector<BatchItem>& batch, const ModelParams& params,
                         const ModelOptions& options, ModelParams* gradient, Execution exec,
                         double positive_weight) {
  options.validate();
  std::size_t labels = 0;
  for (const auto& item : batch)
    for (int ti : item.target_indices) labels += static_cast<std::size_t>(item.video->targets[ti].target);
  *gradient = params.zeros_like();
  if (labels == 0) return 0.0;
  const double scale = 1.0 / static_cast<double>(labels);

  const int m = static_cast<int>(batch.size());
  std::vector<ModelParams> parts(m);
  std::vector<double> losses(m, 0.0);
  auto one = [&](int i) {
    parts[i] = params.zeros_like();
    losses[i] = video_loss_and_gradient(batch[i], params, options, scale, positive_weight, parts[i]);
  };
  if (exec == Execution::kParallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (int i = 0; i < m; ++i) one(i);
  } else {
    for (int i = 0; i < m; ++i) one(i);
  }
  double loss = 0.0;
  for (int i = 0; i < m; ++i) {
    loss += losses[i];
    add_scaled(*gradient, parts[i]);
  }
  return loss;
}

std::vector<double> premise_scores(const GraphInput& g, const NodeEmbeddings& emb, int target,
                                   const ModelParams& params) {
  if (target < 0 || target >= g.size()) throw InputError("target position out of range");
  const VectorXd z = target_embedding(g.features.col(target), params);
  const MatrixXd& top = emb.h.back();
  std::vector<double> out;
  out.reserve(target);
  for (int i = 0; i < target; ++i) out.push_back(classify(top.col(i), z, params));
  return out;
}

namespace {

nlohmann::json matrix_json(const MatrixXd& m) {
  nlohmann::json values = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) values.push_back(m(i, j));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"values", std::move(values)}};
}

MatrixXd matrix_from(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols, const std::string& name) {
  if (j.at("rows").get<Eigen::Index>() != rows || j.at("cols").get<Eigen::Index>() != cols)
    throw InputError("checkpoint block '" + name + "' has shape " + std::to_string(j.at("rows").get<long>()) + "x" +
                     std::to_string(j.at("cols").get<long>()) + ", expected " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  const auto& values = j.at("values");
  if (static_cast<Eigen::Index>(values.size()) != rows * cols)
    throw InputError("checkpoint block '" + name + "' has the wrong number of values");
  MatrixXd m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = values[k++].get<double>();
  return m;
}

}  // namespace

std::string params_to_json(const ModelParams& p, const ModelOptions& o) {
  nlohmann::json j;
  j["format_version"] = kCheckpointVersion;
  j["kind"] = "cern_checkpoint";
  j["d"] = p.dim();
  j["layers"] = p.layer_count();
  j["options"] = {{"layers", o.layers},
                  {"temporal_only", o.temporal_only},
                  {"semantic_only", o.semantic_only},
                  {"message_skip", o.message_skip},
                  {"layer_skip", o.layer_skip},
                  {"distance_penalty", o.distance_penalty},
                  {"premise_window", o.premise.window ? nlohmann::json(*o.premise.window) : nlohmann::json()}};
  j["relation"] = {{"bilinear", matrix_json(p.relation.bilinear)},
                   {"bias", matrix_json(p.relation.bias)},
                   {"raw_decay", p.relation.raw_decay},
                   {"temporal_w", matrix_json(p.relation.temporal_w)},
                   {"temporal_b", p.relation.temporal_b}};
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : p.layers)
    layers.push_back({{"W1", matrix_json(l.W1)}, {"W2", matrix_json(l.W2)}, {"W3", matrix_json(l.W3)},
                      {"W4", matrix_json(l.W4)}});
  j["layer_params"] = std::move(layers);
  j["target_W"] = matrix_json(p.target_W);
  j["target_b"] = matrix_json(p.target_b);
  j["classifier"] = matrix_json(p.classifier);
  j["classifier_b"] = p.classifier_b;
  j["scaler"] = {{"mean", matrix_json(p.scaler.mean)}, {"inv_std", matrix_json(p.scaler.inv_std)}};
  return j.dump(1) + "\n";
}

std::pair<ModelParams, ModelOptions> params_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format_version").get<int>() != kCheckpointVersion)
      throw InputError("unsupported checkpoint format_version " + j.at("format_version").dump());
    const int d = j.at("d").get<int>();
    const int L = j.at("layers").get<int>();
    if (d <= 0 || L <= 0) throw InputError("checkpoint dimensions must be positive");
    ModelParams p(d, L);
    ModelOptions o;
    const auto& jo = j.at("options");
    o.layers = jo.at("layers").get<int>();
    o.temporal_only = jo.at("temporal_only").get<bool>();
    o.semantic_only = jo.at("semantic_only").get<bool>();
    o.message_skip = jo.at("message_skip").get<bool>();
    o.layer_skip = jo.at("layer_skip").get<bool>();
    o.distance_penalty = jo.at("distance_penalty").get<bool>();
    if (!jo.at("premise_window").is_null()) o.premise.window = jo.at("premise_window").get<double>();
    if (o.layers != L) throw InputError("checkpoint options disagree with layer count");
    const auto& r = j.at("relation");
    p.relation.bilinear = matrix_from(r.at("bilinear"), static_cast<Eigen::Index>(d) * d, d, "bilinear");
    p.relation.bias = matrix_from(r.at("bias"), d, 1, "bias");
    p.relation.raw_decay = r.at("raw_decay").get<double>();
    p.relation.temporal_w = matrix_from(r.at("temporal_w"), 4, 1, "temporal_w");
    p.relation.temporal_b = r.at("temporal_b").get<double>();
    const auto& jl = j.at("layer_params");
    if (static_cast<int>(jl.size()) != L) throw InputError("checkpoint layer list length mismatch");
    for (int l = 0; l < L; ++l) {
      p.layers[l].W1 = matrix_from(jl[l].at("W1"), d, d, "W1");
      p.layers[l].W2 = matrix_from(jl[l].at("W2"), d, d, "W2");
      p.layers[l].W3 = matrix_from(jl[l].at("W3"), d, 2 * d, "W3");
      p.layers[l].W4 = matrix_from(jl[l].at("W4"), d, d, "W4");
    }
    p.target_W = matrix_from(j.at("target_W"), d, d, "target_W");
    p.target_b = matrix_from(j.at("target_b"), d, 1, "target_b");
    p.classifier = matrix_from(j.at("classifier"), 2 * d, 1, "classifier");
    p.classifier_b = j.at("classifier_b").get<double>();
    p.scaler.mean = matrix_from(j.at("scaler").at("mean"), d, 1, "scaler.mean");
    p.scaler.inv_std = matrix_from(j.at("scaler").at("inv_std"), d, 1, "scaler.inv_std");
    o.validate();
    return {std::move(p), o};
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace abduct
