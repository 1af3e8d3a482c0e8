#include <gtest/gtest.h>

#include <cmath>

#include "abduct/errors.hpp"
#include "abduct/model.hpp"
#include "abduct/rng.hpp"

using namespace abduct;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd random_vector(Rng& rng, int n, double scale = 1.0) {
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.uniform(-scale, scale);
  return v;
}

// Small complete-DAG graph with random features and intervals.
GraphInput random_graph(Rng& rng, int n, int d) {
  std::vector<Event> events;
  double t = 0.0;
  for (int i = 0; i < n; ++i) {
    Event e;
    e.event_id = i;
    e.ts = t;
    e.te = t + rng.uniform(0.5, 2.0);
    t += rng.uniform(0.2, 1.0);
    e.features.resize(d);
    for (auto& x : e.features) x = rng.uniform(-1.0, 1.0);
    events.push_back(e);
  }
  return make_graph_input(events, FeatureScaler::identity(d), {});
}

TrainingVideo random_video(Rng& rng, int n, int d) {
  TrainingVideo v;
  v.graph = random_graph(rng, n, d);
  for (int t = 1; t < n; ++t) {
    LabeledTarget lt;
    lt.target = t;
    lt.triggers.push_back(static_cast<int>(rng.below(t)));
    if (t > 2) lt.triggers.push_back(t - 1);
    std::sort(lt.triggers.begin(), lt.triggers.end());
    lt.triggers.erase(std::unique(lt.triggers.begin(), lt.triggers.end()), lt.triggers.end());
    v.targets.push_back(lt);
  }
  return v;
}

std::vector<BatchItem> whole(const std::vector<TrainingVideo>& videos) {
  std::vector<BatchItem> batch;
  for (const auto& v : videos) {
    BatchItem item{&v, {}};
    for (std::size_t i = 0; i < v.targets.size(); ++i) item.target_indices.push_back(static_cast<int>(i));
    batch.push_back(item);
  }
  return batch;
}

double batch_loss(const std::vector<BatchItem>& batch, const ModelParams& p, const ModelOptions& o) {
  ModelParams g;
  return loss_and_gradient(batch, p, o, &g, Execution::kSerial);
}

// Scripted slice-by-slice bilinear form.
VectorXd bilinear_oracle(const VectorXd& a, const VectorXd& b, const RelationParams& p) {
  const int d = p.dim();
  VectorXd out(d);
  for (int s = 0; s < d; ++s) {
    double acc = p.bias[s];
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) acc += a[r] * p.bilinear(s * d + r, c) * b[c];
    out[s] = acc;
  }
  return out;
}

}  // namespace

TEST(Relations, PenaltyIsOneAtZeroGapAndDecreasing) {
  EXPECT_EQ(distance_penalty(0.7, 0.0), 1.0);
  double prev = 1.0;
  for (double gap = 0.1; gap < 5.0; gap += 0.1) {
    const double g = distance_penalty(0.7, gap);
    EXPECT_LT(g, prev);
    EXPECT_GT(g, 0.0);
    prev = g;
  }
  EXPECT_DOUBLE_EQ(interval_gap({0, 1, 0}, {3, 5, 1}), 5.0);
}

TEST(Relations, ZeroTensorGivesZeroSemantics) {
  RelationParams p(3);
  const VectorXd a = VectorXd::Constant(3, 2.0), b = VectorXd::Constant(3, -1.0);
  EXPECT_EQ(semantic_relation(a, {0, 1, 0}, b, {2, 3, 1}, p), VectorXd::Zero(3));
}

TEST(Relations, SemanticMatchesScriptedBilinear) {
  RelationParams p(2);
  p.bilinear << 0.5, -0.2, 0.1, 0.3, -0.4, 0.25, 0.6, -0.15;
  p.bias << 0.05, -0.1;
  p.raw_decay = std::log(0.3);
  const VectorXd a = (VectorXd(2) << 1.5, -0.5).finished();
  const VectorXd b = (VectorXd(2) << 0.2, 0.8).finished();
  const TimedEvent ta{0.0, 1.0, 0}, tb{1.0, 3.0, 1};
  const double gamma = std::exp(-0.3 * std::sqrt(1.0 + 4.0));
  const VectorXd expected = gamma * bilinear_oracle(a, b, p).array().tanh().matrix();
  EXPECT_LT((semantic_relation(a, ta, b, tb, p) - expected).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_THROW(semantic_relation(VectorXd::Zero(3), ta, b, tb, p), InputError);
}

TEST(Relations, SemanticComponentsBoundedByPenalty) {
  Rng rng(9);
  RelationParams p(4);
  for (int k = 0; k < p.bilinear.size(); ++k) p.bilinear.data()[k] = rng.uniform(-2, 2);
  for (int trial = 0; trial < 100; ++trial) {
    const TimedEvent ta{rng.uniform(0, 3), rng.uniform(3, 5), 0}, tb{rng.uniform(0, 5), rng.uniform(5, 9), 1};
    const VectorXd r = semantic_relation(random_vector(rng, 4, 3), ta, random_vector(rng, 4, 3), tb, p);
    const double gamma = distance_penalty(p.decay(), interval_gap(ta, tb));
    EXPECT_LE(r.cwiseAbs().maxCoeff(), gamma);
  }
}

TEST(Relations, CombineArithmetic) {
  RelationParams p(2);
  const VectorXd sem = (VectorXd(2) << 0.4, -0.2).finished();
  const auto d = temporal_distance({0, 1, 0}, {2, 4, 1});
  const auto half = combine_relation(d, sem, p);
  EXPECT_EQ(half.r_temp, 0.5);
  EXPECT_EQ(half.r, 0.5 * sem);
  EXPECT_EQ(combine_relation(d, VectorXd::Zero(2), p).r, VectorXd::Zero(2));

  p.temporal_w << 0.1, -0.2, 0.3, 0.05;
  p.temporal_b = -0.4;
  const double lin = 0.1 * 2 - 0.2 * 3 + 0.3 * 1 + 0.05 * 4 - 0.4;
  const double rt = 1.0 / (1.0 + std::exp(-lin));
  const auto f = combine_relation(d, sem, p);
  EXPECT_NEAR(f.r_temp, rt, 1e-12);
  EXPECT_NEAR(f.r[0], rt * 0.4, 1e-12);
  EXPECT_NEAR(f.r[1], rt * -0.2, 1e-12);
}

TEST(PremiseGraph, CompleteAndWindowed) {
  auto ev = [](int id, double ts) {
    Event e;
    e.event_id = id;
    e.ts = ts;
    e.te = ts + 0.2;
    return e;
  };
  const std::vector<Event> events = {ev(0, 0.0), ev(1, 0.5), ev(2, 3.0), ev(3, 4.0)};
  EXPECT_EQ(build_premise_graph(events, 3).edge_count(), 3u);
  const auto windowed = build_premise_graph(events, 3, {1.0});
  EXPECT_EQ(windowed.edge_count(), 1u);
  EXPECT_EQ(windowed.in_neighbors[1], std::vector<int>{0});
  const auto single = build_premise_graph(events, 1);
  EXPECT_EQ(single.event_ids.size(), 1u);
  EXPECT_EQ(single.edge_count(), 0u);
  EXPECT_THROW(build_premise_graph(events, 0), InputError);
  EXPECT_THROW(build_premise_graph(events, 5), InputError);
}

TEST(PremiseGraph, EdgesRespectTemporalOrder) {
  Rng rng(4);
  const GraphInput g = random_graph(rng, 12, 3);
  for (int v = 0; v < g.size(); ++v)
    for (int u : g.in_neighbors[v]) EXPECT_TRUE(precedes(g.times[u], g.times[v]));
}

TEST(ForwardLayer, EdgelessNonNegativeIsIdentity) {
  Rng rng(1);
  GraphInput g = random_graph(rng, 4, 3);
  for (auto& in : g.in_neighbors) in.clear();
  const MatrixXd h = random_vector(rng, 12, 1.0).cwiseAbs().reshaped(3, 4);
  LayerParams layer(3);
  layer.W4.setConstant(5.0);
  const std::vector<std::vector<EdgeFeature>> none(4);
  EXPECT_EQ(forward_layer(g, h, none, layer, {}), h);
}

TEST(ForwardLayer, TwoNodesMatchScriptedEvaluation) {
  const int d = 2;
  GraphInput g;
  g.features = MatrixXd::Zero(d, 2);
  g.times = {{0, 1, 0}, {1, 2, 1}};
  g.event_ids = {0, 1};
  g.in_neighbors = {{}, {0}};
  MatrixXd h(d, 2);
  h << 0.5, -0.3, 1.0, 0.2;
  LayerParams L(d);
  L.W1 << 0.2, -0.1, 0.4, 0.3;
  L.W2 << -0.5, 0.2, 0.1, 0.6;
  L.W3 << 0.3, 0.1, -0.2, 0.5, 0.7, -0.4, 0.2, 0.1;
  L.W4 << 1.1, -0.3, 0.2, 0.9;
  EdgeFeature e;
  e.r = (VectorXd(2) << 0.25, -0.6).finished();
  const std::vector<std::vector<EdgeFeature>> edges = {{}, {e}};

  const MatrixXd out = forward_layer(g, h, edges, L, {});
  // Node 0 is isolated.
  EXPECT_EQ(out(0, 0), 0.5);
  EXPECT_EQ(out(1, 0), 1.0);
  // Node 1 by hand.
  const double h0 = 0.5, h1 = 1.0, r0 = 0.25, r1 = -0.6;
  const double q0 = 0.3 * h0 + 0.1 * h1 - 0.2 * r0 + 0.5 * r1;
  const double q1 = 0.7 * h0 - 0.4 * h1 + 0.2 * r0 + 0.1 * r1;
  const double m0 = std::max(q0, 0.0), m1 = std::max(q1, 0.0);
  const double s0 = h0 + r0, s1 = h1 + r1;
  const double F0 = (0.2 * m0 - 0.1 * m1) + (-0.5 * s0 + 0.2 * s1);
  const double F1 = (0.4 * m0 + 0.3 * m1) + (0.1 * s0 + 0.6 * s1);
  EXPECT_NEAR(out(0, 1), std::max(-0.3 + 1.1 * F0 - 0.3 * F1, 0.0), 1e-10);
  EXPECT_NEAR(out(1, 1), std::max(0.2 + 0.2 * F0 + 0.9 * F1, 0.0), 1e-10);
}

TEST(ForwardLayer, NeighbourStorageOrderDoesNotMatter) {
  Rng rng(8);
  const int d = 4;
  GraphInput g = random_graph(rng, 3, d);
  const ModelParams p = ModelParams::initialize(d, 1, 3, 1.0);
  const ModelOptions o{.layers = 1};
  const auto edges = edge_features(g, p, o);
  const MatrixXd a = forward_layer(g, g.features, edges, p.layers[0], o);
  GraphInput swapped = g;
  std::reverse(swapped.in_neighbors[2].begin(), swapped.in_neighbors[2].end());
  auto swapped_edges = edges;
  std::reverse(swapped_edges[2].begin(), swapped_edges[2].end());
  const MatrixXd b = forward_layer(swapped, g.features, swapped_edges, p.layers[0], o);
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Forward, SingleLayerEqualsForwardLayer) {
  Rng rng(2);
  const GraphInput g = random_graph(rng, 5, 4);
  const ModelParams p = ModelParams::initialize(4, 1, 1, 1.0);
  const ModelOptions o{.layers = 1};
  const auto emb = forward(g, p, o);
  EXPECT_EQ(emb.h[1], forward_layer(g, g.features, edge_features(g, p, o), p.layers[0], o));
  for (int i = 0; i < emb.h[1].size(); ++i) EXPECT_GE(emb.h[1].data()[i], 0.0);
  EXPECT_THROW(forward(g, p, ModelOptions{.layers = 2}), InputError);
}

TEST(Forward, FourLayersCarryInformationAlongAPath) {
  Rng rng(6);
  GraphInput g = random_graph(rng, 5, 4);
  for (int v = 0; v < 5; ++v) g.in_neighbors[v] = v == 0 ? std::vector<int>{} : std::vector<int>{v - 1};
  ModelParams p = ModelParams::initialize(4, 4, 2, 1.0);
  const ModelOptions o;
  const auto base = forward(g, p, o);
  GraphInput perturbed = g;
  perturbed.features.col(0).array() += 0.5;
  const auto moved = forward(perturbed, p, o);
  EXPECT_GT((base.h[4].col(4) - moved.h[4].col(4)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Forward, LaterEventsNeverInfluenceEarlierNodes) {
  Rng rng(12);
  const GraphInput g = random_graph(rng, 7, 5);
  const ModelParams p = ModelParams::initialize(5, 3, 4, 1.0);
  const ModelOptions o{.layers = 3};
  const auto base = forward(g, p, o);
  for (int later = 1; later < g.size(); ++later) {
    GraphInput perturbed = g;
    perturbed.features.col(later).array() += 1.0;
    const auto moved = forward(perturbed, p, o);
    for (int l = 1; l <= 3; ++l) EXPECT_EQ(base.h[l].leftCols(later), moved.h[l].leftCols(later));
  }
}

TEST(Forward, NonNegativeInputsAndParametersStayNonNegative) {
  Rng rng(13);
  GraphInput g = random_graph(rng, 6, 3);
  g.features = g.features.cwiseAbs();
  ModelParams p = ModelParams::initialize(3, 2, 5, 1.0);
  p.for_each_block([](Eigen::Ref<MatrixXd> m) { m = m.cwiseAbs(); });
  const auto emb = forward(g, p, ModelOptions{.layers = 2});
  EXPECT_GE(emb.h[2].minCoeff(), 0.0);
}

TEST(Classifier, ZeroAndScripted) {
  ModelParams p(3, 1);
  const VectorXd h = VectorXd::Constant(3, 0.7), z = VectorXd::Constant(3, -0.2);
  EXPECT_EQ(classify(h, z, p), 0.5);
  p.classifier << 0.1, 0.2, 0.3, -0.4, 0.5, 0.6;
  p.classifier_b = 0.05;
  const double logit = 0.7 * 0.6 + (-0.2) * 0.7 + 0.05;
  EXPECT_NEAR(classify(h, z, p), 1.0 / (1.0 + std::exp(-logit)), 1e-12);
  p.classifier_b = 0.5;
  EXPECT_GT(classify(h, z, p), 1.0 / (1.0 + std::exp(-logit)));
  ModelParams q(3, 1);
  EXPECT_EQ(target_embedding(z, q), VectorXd::Zero(3));
}

TEST(Loss, BinaryCrossEntropy) {
  EXPECT_LE(bce_loss({0.0, 1.0, 1.0}, {0.0, 1.0, 1.0}), 1e-6);
  EXPECT_NEAR(bce_loss({0.5, 0.5}, {1.0, 0.0}), std::log(2.0), 1e-15);
  const std::vector<double> p = {0.2, 0.9, 0.6}, y = {0.0, 1.0, 0.0};
  const double expected = -(std::log(0.8) + std::log(0.9) + std::log(0.4)) / 3.0;
  EXPECT_NEAR(bce_loss(p, y), expected, 1e-12);
  EXPECT_THROW(bce_loss({0.5}, {}), InputError);
}

class GradientCheck : public ::testing::TestWithParam<ModelOptions> {};

TEST_P(GradientCheck, MatchesCentralDifferences) {
  const ModelOptions opt = GetParam();
  const int d = 8;
  Rng rng(77);
  std::vector<TrainingVideo> videos = {random_video(rng, 5, d), random_video(rng, 4, d)};
  const auto batch = whole(videos);
  ModelParams p = ModelParams::initialize(d, opt.layers, 21, 1.0);
  // Larger weights so every block carries non-trivial gradient.
  p.for_each_block([](Eigen::Ref<MatrixXd> m) { m *= 1.5; });
  p.relation.bias.setConstant(0.1);
  p.relation.temporal_b = 0.2;

  ModelParams grad;
  loss_and_gradient(batch, p, opt, &grad, Execution::kSerial);
  const VectorXd analytic = grad.flatten();
  VectorXd theta = p.flatten();
  const double h = 1e-4;
  double worst = 0.0;
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    const double saved = theta[k];
    theta[k] = saved + h;
    p.unflatten(theta);
    const double up = batch_loss(batch, p, opt);
    theta[k] = saved - h;
    p.unflatten(theta);
    const double down = batch_loss(batch, p, opt);
    theta[k] = saved;
    const double numeric = (up - down) / (2 * h);
    // Relative error with a floor for coordinates whose gradient is ~0.
    const double rel = std::abs(numeric - analytic[k]) / std::max({std::abs(numeric), std::abs(analytic[k]), 1e-6});
    worst = std::max(worst, rel);
    EXPECT_LT(rel, 1e-4) << "coordinate " << k << " analytic " << analytic[k] << " numeric " << numeric;
  }
  p.unflatten(theta);
  RecordProperty("worst_relative_error", std::to_string(worst));
}

INSTANTIATE_TEST_SUITE_P(
    Variants, GradientCheck,
    ::testing::Values(ModelOptions{.layers = 2}, ModelOptions{.layers = 2, .temporal_only = true},
                      ModelOptions{.layers = 2, .semantic_only = true},
                      ModelOptions{.layers = 2, .message_skip = false},
                      ModelOptions{.layers = 2, .layer_skip = false},
                      ModelOptions{.layers = 2, .distance_penalty = false}, ModelOptions{.layers = 1}));

TEST(Gradient, UnusedParametersGetExactlyZero) {
  Rng rng(5);
  std::vector<TrainingVideo> videos = {random_video(rng, 5, 4)};
  const auto batch = whole(videos);
  const ModelParams p = ModelParams::initialize(4, 2, 1, 1.0);
  ModelParams g;
  loss_and_gradient(batch, p, ModelOptions{.layers = 2, .temporal_only = true}, &g, Execution::kSerial);
  EXPECT_EQ(g.relation.bilinear.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(g.relation.bias.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(g.relation.raw_decay, 0.0);
  loss_and_gradient(batch, p, ModelOptions{.layers = 2, .message_skip = false}, &g, Execution::kSerial);
  EXPECT_EQ(g.layers[0].W2.cwiseAbs().maxCoeff(), 0.0);
  loss_and_gradient(batch, p, ModelOptions{.layers = 2, .distance_penalty = false}, &g, Execution::kSerial);
  EXPECT_EQ(g.relation.raw_decay, 0.0);
}

TEST(Gradient, DuplicatedBatchHasSameMeanGradient) {
  Rng rng(15);
  std::vector<TrainingVideo> videos = {random_video(rng, 6, 4), random_video(rng, 5, 4)};
  auto batch = whole(videos);
  const ModelParams p = ModelParams::initialize(4, 2, 9, 1.0);
  const ModelOptions o{.layers = 2};
  ModelParams g1, g2;
  const double l1 = loss_and_gradient(batch, p, o, &g1, Execution::kSerial);
  auto doubled = batch;
  doubled.insert(doubled.end(), batch.begin(), batch.end());
  const double l2 = loss_and_gradient(doubled, p, o, &g2, Execution::kSerial);
  EXPECT_NEAR(l1, l2, 1e-14);
  EXPECT_LT((g1.flatten() - g2.flatten()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Gradient, SerialAndParallelAgreeBitwise) {
  Rng rng(16);
  std::vector<TrainingVideo> videos;
  for (int i = 0; i < 6; ++i) videos.push_back(random_video(rng, 4 + i, 6));
  const auto batch = whole(videos);
  const ModelParams p = ModelParams::initialize(6, 3, 2, 1.0);
  const ModelOptions o{.layers = 3};
  ModelParams gs, gp;
  const double ls = loss_and_gradient(batch, p, o, &gs, Execution::kSerial);
  const double lp = loss_and_gradient(batch, p, o, &gp, Execution::kParallel);
  EXPECT_EQ(ls, lp);
  EXPECT_EQ(gs.flatten(), gp.flatten());
}

TEST(Options, ContradictionsRejected) {
  EXPECT_THROW((ModelOptions{.temporal_only = true, .semantic_only = true}.validate()), InputError);
  EXPECT_THROW((ModelOptions{.temporal_only = true, .distance_penalty = false}.validate()), InputError);
  EXPECT_THROW((ModelOptions{.layers = 0}.validate()), InputError);
  EXPECT_NO_THROW((ModelOptions{.message_skip = false, .layer_skip = false}.validate()));
}

TEST(Checkpoint, RoundTripIsByteStable) {
  ModelParams p = ModelParams::initialize(5, 2, 3, 2.5);
  p.scaler.mean.setConstant(0.1234567890123);
  p.scaler.inv_std.setConstant(3.0);
  const ModelOptions o{.layers = 2, .message_skip = false, .premise = {1.5}};
  const std::string text = params_to_json(p, o);
  const auto [q, qo] = params_from_json(text);
  EXPECT_EQ(params_to_json(q, qo), text);
  EXPECT_EQ(q.flatten(), p.flatten());
  EXPECT_EQ(qo, o);
}

TEST(Checkpoint, RejectsBadShapesAndVersions) {
  const ModelParams p = ModelParams::initialize(3, 1, 3, 1.0);
  std::string text = params_to_json(p, ModelOptions{.layers = 1});
  auto wrong_version = text;
  wrong_version.replace(wrong_version.find("\"format_version\": 1"), 19, "\"format_version\": 9");
  EXPECT_THROW(params_from_json(wrong_version), InputError);
  auto wrong_d = text;
  wrong_d.replace(wrong_d.find("\"d\": 3"), 6, "\"d\": 4");
  EXPECT_THROW(params_from_json(wrong_d), InputError);
  EXPECT_THROW(params_from_json("{not json"), InputError);
}
