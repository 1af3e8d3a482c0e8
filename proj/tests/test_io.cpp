#include <gtest/gtest.h>

#include <filesystem>

#include "abduct/errors.hpp"
#include "abduct/io.hpp"

using namespace abduct;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("abduct_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

PipelineConfig small_config(int n, std::uint64_t seed) {
  PipelineConfig c;
  c.dataset.n_videos = n;
  c.dataset.seed = seed;
  c.dataset.min_usable_videos = 1;
  return c;
}

const Dataset& shared_dataset() {
  static const Dataset ds = build_dataset(small_config(10, 2).dataset);
  return ds;
}

const char* kFiles[] = {"scenes.jsonl", "events.jsonl", "pairs.jsonl", "manifest.json"};

}  // namespace

TEST(Config, DefaultsRoundTrip) {
  const PipelineConfig c;
  const auto j = config_to_json(c);
  EXPECT_EQ(config_to_json(config_from_json(j)), j);
  EXPECT_EQ(config_to_json(config_from_json(nlohmann::json::object())), j);
}

TEST(Config, PartialOverridesKeepOtherDefaults) {
  const auto j = nlohmann::json::parse(R"({"dataset": {"n_videos": 7}, "model": {"premise_window": 2.5},
                                           "train": {"epochs": 3}})");
  const PipelineConfig c = config_from_json(j);
  EXPECT_EQ(c.dataset.n_videos, 7);
  EXPECT_EQ(c.train.epochs, 3);
  ASSERT_TRUE(c.train.model.premise.window.has_value());
  EXPECT_DOUBLE_EQ(*c.train.model.premise.window, 2.5);
  EXPECT_EQ(c.train.batch_size, TrainConfig{}.batch_size);
  EXPECT_EQ(c.dataset.label.world, WorldConfig{});
  EXPECT_EQ(config_to_json(config_from_json(config_to_json(c))), config_to_json(c));
}

TEST(Config, RejectsUnknownKeysBadValuesAndLayouts) {
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"dataset": {"n_video": 3}})")), InputError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"train": {"epochs": "many"}})")), InputError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"dataset": {"layouts": [3, 21]}})")), InputError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"format_version": 2})")), InputError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"model": {"temporal_only": true, "semantic_only": true}})")),
               InputError);
}

TEST(Config, InvalidLayoutFailsBeforeSimulating) {
  DatasetConfig c;
  c.n_videos = 100000;  // would take hours if anything were simulated
  c.layouts = {0};
  EXPECT_THROW(build_dataset(c), InputError);
}

TEST(Config, FingerprintTracksEveryField) {
  PipelineConfig a, b;
  EXPECT_EQ(config_fingerprint(a), config_fingerprint(b));
  b.dataset.label.thresholds.slide_min_steps += 1;
  EXPECT_NE(config_fingerprint(a), config_fingerprint(b));
}

TEST(DatasetFiles, RoundTripIsByteIdentical) {
  const Dataset& ds = shared_dataset();
  const PipelineConfig cfg = small_config(10, 2);
  const fs::path a = scratch("rt_a"), b = scratch("rt_b");
  write_dataset(ds, cfg, a);
  const Dataset back = read_dataset(a);
  const auto manifest = nlohmann::json::parse(read_text(a / "manifest.json"));
  write_dataset(back, config_from_json(manifest.at("config")), b);
  for (const char* f : kFiles) EXPECT_EQ(read_text(a / f), read_text(b / f)) << f;

  ASSERT_EQ(back.videos.size(), ds.videos.size());
  EXPECT_EQ(back.splits, ds.splits);
  EXPECT_EQ(back.stats, ds.stats);
  for (std::size_t i = 0; i < ds.videos.size(); ++i) {
    EXPECT_TRUE(back.videos[i].scene == ds.videos[i].scene);
    EXPECT_EQ(back.videos[i].events, ds.videos[i].events);
    EXPECT_EQ(back.videos[i].pairs, ds.videos[i].pairs);
  }
}

TEST(DatasetFiles, RegenerationIsByteIdentical) {
  const PipelineConfig cfg = small_config(10, 31);
  const fs::path a = scratch("gen_a"), b = scratch("gen_b");
  write_dataset(build_dataset(cfg.dataset, Execution::kParallel), cfg, a);
  write_dataset(build_dataset(cfg.dataset, Execution::kSerial), cfg, b);
  for (const char* f : kFiles) EXPECT_EQ(read_text(a / f), read_text(b / f)) << f;
}

TEST(DatasetFiles, RejectUnknownVersions) {
  const fs::path dir = scratch("versions");
  write_dataset(shared_dataset(), small_config(10, 2), dir);
  for (const char* f : kFiles) {
    const fs::path copy = scratch(std::string("versions_") + f);
    for (const char* g : kFiles) fs::copy_file(dir / g, copy / g);
    std::string text = read_text(copy / f);
    const auto pos = text.find("\"format_version\":1");
    // The manifest's own version follows the embedded config's.
    const auto pos_pretty = text.rfind("\"format_version\": 1");
    if (pos != std::string::npos)
      text.replace(pos, 18, "\"format_version\":7");
    else
      text.replace(pos_pretty, 19, "\"format_version\": 7");
    write_text(copy / f, text);
    EXPECT_THROW(read_dataset(copy), InputError) << f;
  }
}

TEST(EventFiles, DimensionMismatchCitesLine) {
  const std::string text =
      "{\"format_version\":1,\"kind\":\"events\",\"feature_dim\":3}\n"
      "{\"video_id\":0,\"event_id\":0,\"ts\":0.0,\"te\":1.0,\"features\":[1,2,3]}\n"
      "{\"video_id\":0,\"event_id\":1,\"ts\":0.5,\"te\":1.0,\"features\":[1,2]}\n";
  try {
    parse_events_jsonl(text, "ext.jsonl");
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("ext.jsonl:3:"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_events_jsonl("{\"format_version\":1,\"kind\":\"events\"}\n", "x"), InputError);
  EXPECT_THROW(parse_events_jsonl("", "x"), InputError);
}

TEST(EventFiles, OptionalFieldsAndLabelsSurvive) {
  const std::string text =
      "{\"format_version\":1,\"kind\":\"events\",\"feature_dim\":2}\n"
      "{\"video_id\":4,\"event_id\":9,\"ts\":0.25,\"te\":1.5,\"features\":[0.5,-1],\"label\":\"open drawer\"}\n";
  const ParsedEvents p = parse_events_jsonl(text, "x");
  ASSERT_EQ(p.videos.size(), 1u);
  const Event& e = p.videos[0].second.front();
  EXPECT_EQ(e.label, "open drawer");
  EXPECT_EQ(e.features, (std::vector<double>{0.5, -1.0}));
  EXPECT_TRUE(event_to_json(4, e).contains("label"));
}

TEST(Ingest, ExportedDatasetGivesIdenticalReports) {
  const Dataset& ds = shared_dataset();
  const fs::path dir = scratch("ingest_rt");
  write_dataset(ds, small_config(10, 2), dir);
  const Dataset ing = ingest_external(dir / "events.jsonl", dir / "pairs.jsonl", 2);
  EXPECT_EQ(ing.splits, ds.splits);

  const FeatureScaler s1 = fit_scaler(ds.videos_in(Split::kTrain), ds.feature_dim);
  const FeatureScaler s2 = fit_scaler(ing.videos_in(Split::kTrain), ing.feature_dim);
  const auto v1 = prepare_split(ds, Split::kVal, s1, {});
  const auto v2 = prepare_split(ing, Split::kVal, s2, {});
  ModelParams params = ModelParams::initialize(ds.feature_dim, 2, 5, 1.0);
  ModelOptions opt;
  opt.layers = 2;
  CernScorer c1(params, opt), c2(params, opt);
  EXPECT_EQ(report_to_json(evaluate(c1, v1, "val")), report_to_json(evaluate(c2, v2, "val")));
  FirstCollisionScorer f;
  EXPECT_EQ(report_to_json(evaluate(f, v1, "val")), report_to_json(evaluate(f, v2, "val")));
}

TEST(Ingest, MissingOrDanglingPairsAreRejected) {
  const fs::path dir = scratch("ingest_bad");
  write_dataset(shared_dataset(), small_config(10, 2), dir);
  EXPECT_THROW(ingest_external(dir / "events.jsonl", dir / "nope.jsonl", 0), InputError);
  write_text(dir / "bad_pairs.jsonl",
             "{\"format_version\":1,\"kind\":\"pairs\"}\n"
             "{\"video_id\":99999,\"target_event_id\":1,\"trigger_event_ids\":[0]}\n");
  EXPECT_THROW(ingest_external(dir / "events.jsonl", dir / "bad_pairs.jsonl", 0), InputError);
}

TEST(Ingest, PlantedSignalIsLearnedByNodeEmbeddings) {
  // d = 6; channel 2 is +1 on triggers and -1 elsewhere, the rest is noise.
  Rng rng(12);
  std::string events = "{\"feature_dim\":6,\"format_version\":1,\"kind\":\"events\"}\n";
  std::string pairs = "{\"format_version\":1,\"kind\":\"pairs\"}\n";
  for (int video = 0; video < 60; ++video) {
    const int n = 15;
    std::vector<bool> trig(n);
    for (int i = 0; i < n; ++i) trig[i] = rng.uniform() < 0.25;
    for (int i = 0; i < n; ++i) {
      nlohmann::json e = {{"video_id", video}, {"event_id", i}, {"ts", 0.5 * i}, {"te", 0.5 * i + 0.2}};
      std::vector<double> f(6);
      for (double& x : f) x = rng.uniform(-1.0, 1.0);
      f[2] = trig[i] ? 1.0 : -1.0;
      e["features"] = f;
      events += e.dump() + "\n";
    }
    for (int t = 1; t < n; ++t) {
      std::vector<int> ids;
      for (int i = 0; i < t; ++i)
        if (trig[i]) ids.push_back(i);
      if (ids.empty()) continue;
      pairs += nlohmann::json{{"video_id", video}, {"target_event_id", t}, {"trigger_event_ids", ids}}.dump() + "\n";
    }
  }
  const fs::path dir = scratch("planted");
  write_text(dir / "events.jsonl", events);
  write_text(dir / "pairs.jsonl", pairs);
  const Dataset ds = ingest_external(dir / "events.jsonl", dir / "pairs.jsonl", 1);
  EXPECT_EQ(ds.feature_dim, 6);
  const FeatureScaler scaler = fit_scaler(ds.videos_in(Split::kTrain), 6);
  const auto train_set = prepare_split(ds, Split::kTrain, scaler, {});
  const auto val_set = prepare_split(ds, Split::kVal, scaler, {});
  const auto test_set = prepare_split(ds, Split::kTest, scaler, {});
  NodeEmbeddingScorer ne = train_node_embeddings(train_set, val_set, {});
  EXPECT_GT(evaluate(ne, test_set, "test").accuracy, 90.0);
}

TEST(Report, HistogramCountsEveryTrigger) {
  const Dataset& ds = shared_dataset();
  const PositionHistogram h = position_histogram(ds);
  long triggers = 0, targets = 0, expected_triggers = 0, expected_targets = 0;
  for (int c : h.triggers) triggers += c;
  for (int c : h.targets) targets += c;
  for (const auto& v : ds.videos)
    for (const auto& p : v.pairs) {
      expected_targets += 1;
      expected_triggers += static_cast<long>(p.trigger_event_ids.size());
    }
  EXPECT_EQ(triggers, expected_triggers);
  EXPECT_EQ(targets, expected_targets);
  EXPECT_EQ(h.targets.empty() ? 0 : h.targets[0], 0);  // a target always has a premise
  const std::string csv = histogram_csv(h);
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), h.triggers.size() + 1);
  EXPECT_NE(histogram_svg(h).find("<svg"), std::string::npos);
}

TEST(Report, CsvHasOneRowPerReportAndCurvesParse) {
  EvalReport r;
  r.model = "m";
  r.split = "val";
  r.accuracy = 12.5;
  EXPECT_EQ(reports_csv({r}), "model,split,accuracy,all_hit_accuracy,random_expectation,instances,config_fingerprint\n"
                              "m,val,12.5000,0.0000,0.0000,0,\n");
  std::vector<EpochRecord> curve = {{1, 0.5, 20.0, 1e-4}, {2, 0.25, 30.0, 9.5e-5}};
  const auto back = parse_loss_curve_csv(loss_curve_csv(curve), "c");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].train_loss, 0.25);
  EXPECT_EQ(loss_curve_csv(back), loss_curve_csv(curve));
  EXPECT_NE(loss_curve_svg(curve).find("polyline"), std::string::npos);
  EXPECT_NE(accuracy_svg({r}).find("m/val"), std::string::npos);
  EXPECT_THROW(parse_loss_curve_csv("x,y\n", "c"), InputError);
}
