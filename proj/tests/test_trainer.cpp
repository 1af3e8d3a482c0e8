#include <gtest/gtest.h>

#include <cmath>

#include "abduct/errors.hpp"
#include "abduct/trainer.hpp"

using namespace abduct;

namespace {

const Dataset& toy_dataset() {
  static const Dataset ds = [] {
    DatasetConfig c;
    c.n_videos = 20;
    c.seed = 3;
    return build_dataset(c);
  }();
  return ds;
}

struct Prepared {
  ModelParams init;
  std::vector<PreparedVideo> train, val;
};

Prepared toy_prepared(int layers) {
  const Dataset& ds = toy_dataset();
  const auto records = ds.videos_in(Split::kTrain);
  Prepared p;
  const FeatureScaler scaler = fit_scaler(records, ds.feature_dim);
  p.train = prepare_videos(records, scaler, {});
  p.val = prepare_split(ds, Split::kVal, scaler, {});
  p.init = ModelParams::initialize(ds.feature_dim, layers, 17, mean_edge_gap(p.train));
  p.init.scaler = scaler;
  return p;
}

double full_loss(const std::vector<PreparedVideo>& videos, const ModelParams& params, const ModelOptions& opt) {
  std::vector<BatchItem> batch;
  for (const auto& v : videos) {
    BatchItem item{&v.data, {}};
    for (std::size_t i = 0; i < v.data.targets.size(); ++i) item.target_indices.push_back(static_cast<int>(i));
    batch.push_back(item);
  }
  ModelParams g;
  return loss_and_gradient(batch, params, opt, &g, Execution::kSerial);
}

// Videos with hand-set targets; only ids, order and labels matter to the metric.
PreparedVideo synthetic_video(int video_id, int n, const std::vector<LabeledTarget>& targets, int d = 2) {
  PreparedVideo v;
  v.video_id = video_id;
  v.data.graph.features = Eigen::MatrixXd::Zero(d, n);
  for (int i = 0; i < n; ++i) {
    v.data.graph.event_ids.push_back(100 * video_id + i);
    v.data.graph.times.push_back({static_cast<double>(i), i + 0.5, 100 * video_id + i});
    Event e;
    e.event_id = 100 * video_id + i;
    e.ts = i;
    e.te = i + 0.5;
    e.type = InteractionType::kSlide;
    v.events.push_back(e);
  }
  v.data.graph.in_neighbors = premise_in_neighbors(v.data.graph.times, {});
  v.data.targets = targets;
  return v;
}

class FixedScorer : public Scorer {
 public:
  explicit FixedScorer(std::function<std::vector<double>(const PreparedVideo&, int)> f) : f_(std::move(f)) {}
  std::string name() const override { return "fixed"; }
  std::vector<double> score(const PreparedVideo& v, int t) override { return f_(v, t); }

 private:
  std::function<std::vector<double>(const PreparedVideo&, int)> f_;
};

const LabeledTarget* find_target(const PreparedVideo& v, int t) {
  for (const auto& x : v.data.targets)
    if (x.target == t) return &x;
  return nullptr;
}

}  // namespace

TEST(Scaler, StandardizesTrainingFeatures) {
  const Dataset& ds = toy_dataset();
  const auto records = ds.videos_in(Split::kTrain);
  const FeatureScaler s = fit_scaler(records, ds.feature_dim);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(ds.feature_dim), sq = sum;
  double n = 0;
  for (const auto* v : records)
    for (const auto& e : v->events) {
      const Eigen::VectorXd z = s.apply(e.features);
      sum += z;
      sq += z.cwiseProduct(z);
      n += 1;
    }
  for (int k = 0; k < ds.feature_dim; ++k) {
    EXPECT_NEAR(sum[k] / n, 0.0, 1e-9);
    const double var = sq[k] / n;
    EXPECT_TRUE(std::abs(var - 1.0) < 1e-6 || var < 1e-12) << "channel " << k;
  }
}

TEST(Prepare, TriggersPrecedeTargetsAndOrderMatchesGraph) {
  const auto p = toy_prepared(1);
  for (const auto& v : p.train) {
    ASSERT_EQ(static_cast<int>(v.events.size()), v.data.graph.size());
    for (int i = 0; i < v.data.graph.size(); ++i) EXPECT_EQ(v.events[i].event_id, v.data.graph.event_ids[i]);
    for (const auto& t : v.data.targets) {
      EXPECT_GE(t.target, 1);
      EXPECT_FALSE(t.triggers.empty());
      for (int trig : t.triggers) EXPECT_LT(trig, t.target);
    }
  }
}

TEST(Train, ZeroEpochsReturnsInitialParameters) {
  auto p = toy_prepared(2);
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.model.layers = 2;
  const TrainResult r = train(p.train, p.val, p.init, cfg);
  EXPECT_TRUE(r.curve.empty());
  EXPECT_EQ(r.best_epoch, 0);
  EXPECT_EQ(r.params.flatten(), p.init.flatten());
}

TEST(Train, OneEpochReducesLoss) {
  auto p = toy_prepared(2);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.learning_rate = 1e-3;
  cfg.batch_size = 32;
  cfg.model.layers = 2;
  cfg.patience = 1;
  const double before = full_loss(p.train, p.init, cfg.model);
  const TrainResult r = train(p.train, {}, p.init, cfg);
  ASSERT_EQ(r.curve.size(), 1u);
  EXPECT_EQ(r.best_epoch, 1);
  EXPECT_LT(full_loss(p.train, r.params, cfg.model), before);
}

TEST(Train, CurvesRepeatExactlyAndIgnoreExecution) {
  auto p = toy_prepared(2);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.learning_rate = 1e-3;
  cfg.batch_size = 32;
  cfg.model.layers = 2;
  cfg.exec = Execution::kParallel;
  const TrainResult a = train(p.train, p.val, p.init, cfg);
  const TrainResult b = train(p.train, p.val, p.init, cfg);
  cfg.exec = Execution::kSerial;
  const TrainResult c = train(p.train, p.val, p.init, cfg);
  ASSERT_EQ(a.curve.size(), b.curve.size());
  ASSERT_EQ(a.curve.size(), c.curve.size());
  for (std::size_t i = 0; i < a.curve.size(); ++i) {
    EXPECT_EQ(a.curve[i].train_loss, b.curve[i].train_loss);
    EXPECT_EQ(a.curve[i].val_accuracy, b.curve[i].val_accuracy);
    EXPECT_EQ(a.curve[i].train_loss, c.curve[i].train_loss);
  }
  EXPECT_EQ(a.params.flatten(), c.params.flatten());
  EXPECT_EQ(loss_curve_csv(a.curve), loss_curve_csv(b.curve));
}

TEST(Train, NoSkipAblationStillLearns) {
  auto p = toy_prepared(2);
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.learning_rate = 1e-3;
  cfg.batch_size = 32;
  cfg.model = ablation_options("no_skip", cfg.model);
  cfg.model.layers = 2;
  const double before = full_loss(p.train, p.init, cfg.model);
  const TrainResult r = train(p.train, {}, p.init, cfg);
  ASSERT_FALSE(r.curve.empty());
  for (const auto& e : r.curve) EXPECT_TRUE(std::isfinite(e.train_loss));
  EXPECT_LT(r.curve.back().train_loss, before);
}

TEST(Train, RejectsBadConfig) {
  auto p = toy_prepared(2);
  TrainConfig cfg;
  cfg.model.layers = 3;  // parameters have 2
  EXPECT_THROW(train(p.train, p.val, p.init, cfg), InputError);
  cfg.model.layers = 2;
  cfg.learning_rate = 0.0;
  EXPECT_THROW(train(p.train, p.val, p.init, cfg), InputError);
  cfg.learning_rate = 1e-4;
  cfg.lr_decay = 1.5;
  EXPECT_THROW(cfg.validate(), InputError);
}

TEST(Train, NonFiniteLossIsReported) {
  auto p = toy_prepared(1);
  p.init.classifier_b = std::numeric_limits<double>::quiet_NaN();
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.model.layers = 1;
  try {
    train(p.train, {}, p.init, cfg);
    FAIL() << "expected TrainingDivergedError";
  } catch (const TrainingDivergedError& e) {
    EXPECT_EQ(e.epoch, 1);
    EXPECT_EQ(e.step, 1);
  }
}

TEST(Loss, PositiveWeightIsLinearInWeight) {
  auto p = toy_prepared(1);
  ModelOptions opt;
  opt.layers = 1;
  std::vector<BatchItem> batch;
  for (const auto& v : p.train) {
    BatchItem item{&v.data, {}};
    for (std::size_t i = 0; i < v.data.targets.size(); ++i) item.target_indices.push_back(static_cast<int>(i));
    batch.push_back(item);
  }
  ModelParams g1, g2, g3;
  const double l1 = loss_and_gradient(batch, p.init, opt, &g1, Execution::kSerial, 1.0);
  const double l2 = loss_and_gradient(batch, p.init, opt, &g2, Execution::kSerial, 2.0);
  const double l3 = loss_and_gradient(batch, p.init, opt, &g3, Execution::kSerial, 3.0);
  EXPECT_NEAR(l3 - l1, 2.0 * (l2 - l1), 1e-9);
  EXPECT_GT(l2, l1);
  const Eigen::VectorXd f1 = g1.flatten(), f2 = g2.flatten(), f3 = g3.flatten();
  EXPECT_LT(((f3 - f1) - 2.0 * (f2 - f1)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Metric, TieBreakPicksEarliest) {
  EXPECT_EQ(pick_top({0.2, 0.9, 0.9, 0.1}, TieBreak::kEarliest, nullptr), 1);
  EXPECT_EQ(pick_top({0.5}, TieBreak::kEarliest, nullptr), 0);
  EXPECT_THROW(pick_top({}, TieBreak::kEarliest, nullptr), InputError);
}

TEST(Metric, RandomTieBreakIsUniformOverMaxima) {
  Rng rng(3);
  int counts[4] = {0, 0, 0, 0};
  for (int i = 0; i < 9000; ++i) ++counts[pick_top({0.9, 0.1, 0.9, 0.9}, TieBreak::kRandom, &rng)];
  EXPECT_EQ(counts[1], 0);
  for (int k : {0, 2, 3}) EXPECT_NEAR(counts[k], 3000, 200);
}

TEST(Metric, OracleScorerIsPerfect) {
  const auto p = toy_prepared(1);
  FixedScorer oracle([](const PreparedVideo& v, int t) {
    std::vector<double> s(t, 0.0);
    for (int i : find_target(v, t)->triggers) s[i] = 1.0;
    return s;
  });
  const EvalReport r = evaluate(oracle, p.train, "train");
  EXPECT_GT(r.instances, 0);
  EXPECT_DOUBLE_EQ(r.accuracy, 100.0);
  EXPECT_DOUBLE_EQ(r.all_hit_accuracy, 100.0);
  int per_video = 0;
  for (const auto& vb : r.per_video) {
    EXPECT_EQ(vb.correct, vb.instances);
    per_video += vb.instances;
  }
  EXPECT_EQ(per_video, r.instances);
}

TEST(Metric, AntiOracleScoresZero) {
  const auto p = toy_prepared(1);
  FixedScorer anti([](const PreparedVideo& v, int t) {
    std::vector<double> s(t, 1.0);
    for (int i : find_target(v, t)->triggers) s[i] = 0.0;
    return s;
  });
  const EvalReport r = evaluate(anti, p.train, "train");
  // Targets whose whole premise is triggers cannot be missed.
  int forced = 0;
  for (const auto& v : p.train)
    for (const auto& t : v.data.targets) forced += static_cast<int>(t.triggers.size()) == t.target;
  EXPECT_NEAR(r.accuracy, 100.0 * forced / r.instances, 1e-9);
}

TEST(Metric, AllHitNeedsEveryTriggerAboveEveryOther) {
  std::vector<PreparedVideo> vids = {synthetic_video(1, 4, {{3, {0, 2}}})};
  FixedScorer one_high([](const PreparedVideo&, int) { return std::vector<double>{0.9, 0.5, 0.1}; });
  const EvalReport r = evaluate(one_high, vids, "x");
  EXPECT_DOUBLE_EQ(r.accuracy, 100.0);
  EXPECT_DOUBLE_EQ(r.all_hit_accuracy, 0.0);
  FixedScorer both_high([](const PreparedVideo&, int) { return std::vector<double>{0.9, 0.5, 0.6}; });
  EXPECT_DOUBLE_EQ(evaluate(both_high, vids, "x").all_hit_accuracy, 100.0);
}

TEST(Metric, RandomBaselineMatchesAnalyticExpectation) {
  Rng rng(99);
  std::vector<PreparedVideo> vids;
  int instances = 0;
  for (int vid = 0; instances < 12000; ++vid) {
    const int n = rng.range(3, 30);
    std::vector<LabeledTarget> targets;
    for (int t = 1; t < n; ++t) {
      LabeledTarget lt{t, {}};
      const int k = rng.range(1, std::min(t, 3));
      for (int j = 0; j < t && static_cast<int>(lt.triggers.size()) < k; ++j)
        if (rng.uniform() < 0.5 || t - j == k - static_cast<int>(lt.triggers.size())) lt.triggers.push_back(j);
      targets.push_back(lt);
      ++instances;
    }
    vids.push_back(synthetic_video(vid, n, targets));
  }
  RandomScorer random(5);
  const EvalReport r = evaluate(random, vids, "synthetic");
  EXPECT_GE(r.instances, 10000);
  EXPECT_NEAR(r.accuracy, analytic_random_accuracy(vids), 2.0);
  EXPECT_DOUBLE_EQ(r.random_expectation, analytic_random_accuracy(vids));
}

TEST(Baselines, FirstCollisionFallsBackToEarliest) {
  PreparedVideo v = synthetic_video(1, 5, {});
  FirstCollisionScorer fc;
  EXPECT_EQ(pick_top(fc.score(v, 4), TieBreak::kEarliest, nullptr), 0);
  v.events[2].type = InteractionType::kCollision;
  v.events[3].type = InteractionType::kCollision;
  EXPECT_EQ(pick_top(fc.score(v, 4), TieBreak::kEarliest, nullptr), 2);
  EXPECT_EQ(pick_top(fc.score(v, 2), TieBreak::kEarliest, nullptr), 0);
}

TEST(Baselines, NodeEmbeddingsLearnAPlantedFeature) {
  // Channel 0 marks triggers; channel 1 is noise.
  Rng rng(8);
  auto make = [&](int first_id, int count) {
    std::vector<PreparedVideo> out;
    for (int v = 0; v < count; ++v) {
      const int n = 12;
      std::vector<bool> is_trigger(n);
      for (int i = 0; i < n; ++i) is_trigger[i] = rng.uniform() < 0.3;
      is_trigger[0] = false;
      std::vector<LabeledTarget> targets;
      for (int t = 1; t < n; ++t) {
        LabeledTarget lt{t, {}};
        for (int i = 0; i < t; ++i)
          if (is_trigger[i]) lt.triggers.push_back(i);
        if (!lt.triggers.empty()) targets.push_back(lt);
      }
      PreparedVideo pv = synthetic_video(first_id + v, n, targets);
      for (int i = 0; i < n; ++i) {
        pv.data.graph.features(0, i) = is_trigger[i] ? 1.0 : -1.0;
        pv.data.graph.features(1, i) = rng.uniform(-1.0, 1.0);
      }
      out.push_back(std::move(pv));
    }
    return out;
  };
  const auto train_set = make(0, 40);
  const auto val_set = make(1000, 10);
  NodeEmbeddingScorer ne = train_node_embeddings(train_set, val_set, {});
  EXPECT_GT(evaluate(ne, val_set, "val").accuracy, 90.0);
  EXPECT_GT(ne.weights()[0], 0.0);
}

TEST(Ablations, NamesMapToOptions) {
  const ModelOptions base;
  for (const auto& name : ablation_names()) EXPECT_NO_THROW(ablation_options(name, base));
  EXPECT_TRUE(ablation_options("temporal_only", base).temporal_only);
  EXPECT_TRUE(ablation_options("semantic_only", base).semantic_only);
  EXPECT_EQ(ablation_options("two_layers", base).layers, 2);
  const ModelOptions ns = ablation_options("no_skip", base);
  EXPECT_FALSE(ns.message_skip);
  EXPECT_FALSE(ns.layer_skip);
  EXPECT_FALSE(ablation_options("no_distance_penalty", base).distance_penalty);
  EXPECT_EQ(ablation_options("full", base), base);
  EXPECT_THROW(ablation_options("bogus", base), InputError);
  ModelOptions t = base;
  t.temporal_only = true;
  EXPECT_THROW(ablation_options("no_distance_penalty", t), InputError);
}

TEST(Reports, JsonRoundTripAndVersionCheck) {
  const auto p = toy_prepared(1);
  FirstCollisionScorer fc;
  EvalReport r = evaluate(fc, p.val, "val");
  r.config_fingerprint = fingerprint("cfg");
  const std::string text = report_to_json(r);
  const EvalReport back = report_from_json(text);
  EXPECT_EQ(report_to_json(back), text);
  EXPECT_EQ(back.accuracy, r.accuracy);
  EXPECT_EQ(back.details.size(), r.details.size());
  std::string bad = text;
  bad.replace(bad.find("\"format_version\": 1"), 19, "\"format_version\": 9");
  EXPECT_THROW(report_from_json(bad), InputError);
  EXPECT_THROW(report_from_json("{"), InputError);
  const std::string csv = reports_csv({r, back});
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

TEST(Reports, FingerprintIsFnv1a) {
  EXPECT_EQ(fingerprint(""), "cbf29ce484222325");
  EXPECT_EQ(fingerprint("a"), "af63dc4c8601ec8c");
  EXPECT_EQ(fingerprint("foobar"), "85944171f73967e8");
}
