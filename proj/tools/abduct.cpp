// Command-line driver: generate, extract, label, train, eval, ablate, ingest, report.

#include <omp.h>

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "abduct/errors.hpp"
#include "abduct/io.hpp"

namespace fs = std::filesystem;
using namespace abduct;

namespace {

struct Common {
  std::string config_path;
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
};

PipelineConfig resolve_config(const Common& common, const std::optional<fs::path>& dataset_dir) {
  PipelineConfig cfg;
  if (!common.config_path.empty()) {
    cfg = load_config(common.config_path);
  } else if (dataset_dir && fs::exists(*dataset_dir / "manifest.json")) {
    const auto manifest = nlohmann::json::parse(read_text(*dataset_dir / "manifest.json"));
    if (manifest.contains("config")) cfg = config_from_json(manifest.at("config"));
  }
  if (const char* env = std::getenv("ABDUCT_OUTPUT_DIR"); env && *env) cfg.output_dir = env;
  if (const char* env = std::getenv("ABDUCT_THREADS"); env && *env) cfg.threads = std::atoi(env);
  if (common.threads) cfg.threads = *common.threads;
  if (common.seed) {
    cfg.dataset.seed = *common.seed;
    cfg.train.seed = *common.seed;
  }
  cfg.validate();
  if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
  return cfg;
}

fs::path out_dir(const std::string& flag, const PipelineConfig& cfg) {
  return flag.empty() ? fs::path(cfg.output_dir) : fs::path(flag);
}

std::vector<PreparedVideo> split_videos_for(const Dataset& ds, Split s, const FeatureScaler& scaler,
                                            const ModelOptions& opt) {
  return prepare_split(ds, s, scaler, opt.premise);
}

void say(const std::string& msg) { std::cerr << msg << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Counterfactual trigger-event dataset generation, training and evaluation"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--config", common.config_path, "pipeline config JSON")->check(CLI::ExistingFile);
  app.add_option("--threads", common.threads, "OpenMP threads (also ABDUCT_THREADS)");
  app.add_option("--seed", common.seed, "overrides dataset.seed and train.seed");

  // generate
  auto* gen = app.add_subcommand("generate", "simulate, extract and label a full dataset");
  std::string gen_out;
  std::optional<int> gen_n;
  bool gen_traj = false;
  gen->add_option("--out", gen_out, "dataset directory (default: output_dir)");
  gen->add_option("--n-videos", gen_n);
  gen->add_flag("--trajectories", gen_traj, "also write trajectories.jsonl");

  // extract / label
  auto* ext = app.add_subcommand("extract", "re-derive events.jsonl from scenes.jsonl");
  std::string ext_dir;
  ext->add_option("--dataset", ext_dir)->required();
  auto* lab = app.add_subcommand("label", "re-derive pairs.jsonl and the manifest from scenes.jsonl");
  std::string lab_dir;
  lab->add_option("--dataset", lab_dir)->required();

  // train
  auto* trn = app.add_subcommand("train", "train the relational model");
  std::string trn_dir, trn_out, trn_ablation = "full";
  std::optional<int> trn_epochs, trn_layers, trn_batch;
  std::optional<double> trn_lr;
  trn->add_option("--dataset", trn_dir)->required();
  trn->add_option("--out", trn_out);
  trn->add_option("--ablation", trn_ablation, "one of the ablation names");
  trn->add_option("--epochs", trn_epochs);
  trn->add_option("--layers", trn_layers);
  trn->add_option("--batch-size", trn_batch);
  trn->add_option("--learning-rate", trn_lr);

  // eval
  auto* evl = app.add_subcommand("eval", "score models on a split");
  std::string evl_dir, evl_out, evl_ckpt, evl_split = "val";
  std::vector<std::string> evl_models{"cern", "node_embeddings", "first_collision", "random"};
  bool evl_random_ties = false;
  evl->add_option("--dataset", evl_dir)->required();
  evl->add_option("--checkpoint", evl_ckpt, "required for the cern model");
  evl->add_option("--split", evl_split)->check(CLI::IsMember({"train", "val", "test"}));
  evl->add_option("--models", evl_models)->check(CLI::IsMember({"cern", "node_embeddings", "first_collision", "random"}));
  evl->add_flag("--random-ties", evl_random_ties, "break score ties uniformly at random");
  evl->add_option("--out", evl_out);

  // ablate
  auto* abl = app.add_subcommand("ablate", "train and evaluate ablated variants");
  std::string abl_dir, abl_out;
  std::vector<std::string> abl_names{"full", "temporal_only", "semantic_only", "no_skip"};
  std::optional<int> abl_epochs;
  abl->add_option("--dataset", abl_dir)->required();
  abl->add_option("--names", abl_names)->check(CLI::IsMember(ablation_names()));
  abl->add_option("--epochs", abl_epochs);
  abl->add_option("--out", abl_out);

  // ingest
  auto* ing = app.add_subcommand("ingest", "turn external events and pairs into a dataset directory");
  std::string ing_events, ing_pairs, ing_out;
  std::uint64_t ing_seed = 0;
  ing->add_option("--events", ing_events)->required()->check(CLI::ExistingFile);
  ing->add_option("--pairs", ing_pairs)->required();
  ing->add_option("--split-seed", ing_seed);
  ing->add_option("--out", ing_out);

  // report
  auto* rep = app.add_subcommand("report", "tables and plots from evaluation reports");
  std::vector<std::string> rep_reports, rep_curves;
  std::string rep_dataset, rep_out;
  bool rep_no_plots = false;
  rep->add_option("--reports", rep_reports)->required()->check(CLI::ExistingFile);
  rep->add_option("--curves", rep_curves)->check(CLI::ExistingFile);
  rep->add_option("--dataset", rep_dataset, "adds the trigger/target position histogram");
  rep->add_flag("--no-plots", rep_no_plots);
  rep->add_option("--out", rep_out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      PipelineConfig cfg = resolve_config(common, std::nullopt);
      if (gen_n) cfg.dataset.n_videos = *gen_n;
      if (gen_traj) cfg.write_trajectories = true;
      cfg.validate();
      const fs::path dir = out_dir(gen_out, cfg);
      const Dataset ds = build_dataset(cfg.dataset);
      write_dataset(ds, cfg, dir);
      if (cfg.write_trajectories) {
        std::string text = "{\"format_version\":1,\"kind\":\"trajectories\"}\n";
        for (const auto& v : ds.videos) text += trajectories_jsonl(v.video_id, simulate(v.scene, cfg.dataset.label.world));
        write_text(dir / "trajectories.jsonl", text);
      }
      say("wrote " + std::to_string(ds.videos.size()) + " videos (" + std::to_string(ds.pair_count(Split::kTrain) +
          ds.pair_count(Split::kVal) + ds.pair_count(Split::kTest)) + " pairs) to " + dir.string());
    } else if (ext->parsed()) {
      const fs::path dir = ext_dir;
      const PipelineConfig cfg = resolve_config(common, dir);
      Dataset ds = read_dataset(dir);
      for (auto& v : ds.videos) {
        if (v.scene.dynamic_objects.empty()) throw InputError("video " + std::to_string(v.video_id) + " has no scene");
        v.events = simulate_and_extract(v.scene, cfg.dataset.label);
      }
      write_text(dir / "events.jsonl", events_jsonl(ds));
      say("re-extracted events for " + std::to_string(ds.videos.size()) + " videos");
    } else if (lab->parsed()) {
      const fs::path dir = lab_dir;
      const PipelineConfig cfg = resolve_config(common, dir);
      const auto scenes = parse_scenes_jsonl(read_text(dir / "scenes.jsonl"), (dir / "scenes.jsonl").string());
      const ParsedEvents events = parse_events_jsonl(read_text(dir / "events.jsonl"), (dir / "events.jsonl").string());
      std::map<int, std::vector<Event>> by_video(events.videos.begin(), events.videos.end());
      Dataset ds;
      ds.feature_dim = events.feature_dim;
      ds.stats.attempted = static_cast<int>(scenes.size());
      std::vector<int> usable;
      for (const auto& [id, scene] : scenes) {
        VideoRecord rec = label_video(id, scene, cfg.dataset.label);
        if (by_video[id] != rec.events)
          throw InputError("events.jsonl is stale for video " + std::to_string(id) + "; run extract first");
        if (rec.pairs.empty()) {
          ++ds.stats.discarded_no_pairs;
          continue;
        }
        for (const auto& p : rec.pairs) ds.stats.path_cap_hits += p.path_cap_hit;
        usable.push_back(id);
        ds.videos.push_back(std::move(rec));
      }
      ds.stats.usable = static_cast<int>(usable.size());
      ds.splits = split_videos(usable, cfg.dataset.seed);
      write_dataset(ds, cfg, dir);
      say("labeled " + std::to_string(ds.videos.size()) + " videos");
    } else if (trn->parsed()) {
      const fs::path dir = trn_dir;
      PipelineConfig cfg = resolve_config(common, dir);
      if (trn_epochs) cfg.train.epochs = *trn_epochs;
      if (trn_layers) cfg.train.model.layers = *trn_layers;
      if (trn_batch) cfg.train.batch_size = *trn_batch;
      if (trn_lr) cfg.train.learning_rate = *trn_lr;
      cfg.train.model = ablation_options(trn_ablation, cfg.train.model);
      cfg.validate();
      const Dataset ds = read_dataset(dir);
      const TrainResult r = train_on_dataset(ds, cfg.train);
      const fs::path out = out_dir(trn_out, cfg);
      write_text(out / "checkpoint.json", params_to_json(r.params, r.options));
      write_text(out / "loss_curve.csv", loss_curve_csv(r.curve));
      say("best epoch " + std::to_string(r.best_epoch) + ", val accuracy " + std::to_string(r.best_val_accuracy));
    } else if (evl->parsed()) {
      const fs::path dir = evl_dir;
      const PipelineConfig cfg = resolve_config(common, dir);
      const Dataset ds = read_dataset(dir);
      const Split split = split_from_string(evl_split);
      const fs::path out = out_dir(evl_out, cfg);
      const std::string fp = config_fingerprint(cfg);
      std::optional<std::pair<ModelParams, ModelOptions>> ckpt;
      if (!evl_ckpt.empty()) ckpt = params_from_json(read_text(evl_ckpt));
      // Baselines share the checkpoint's scaler when one is given, else one fitted on train.
      const FeatureScaler scaler =
          ckpt ? ckpt->first.scaler : fit_scaler(ds.videos_in(Split::kTrain), ds.feature_dim);
      const ModelOptions opt = ckpt ? ckpt->second : cfg.train.model;
      const auto videos = split_videos_for(ds, split, scaler, opt);
      std::vector<EvalReport> reports;
      for (const auto& name : evl_models) {
        std::unique_ptr<Scorer> scorer;
        if (name == "cern") {
          if (!ckpt) throw InputError("the cern model needs --checkpoint");
          scorer = std::make_unique<CernScorer>(ckpt->first, ckpt->second);
        } else if (name == "random") {
          scorer = std::make_unique<RandomScorer>(cfg.train.seed);
        } else if (name == "first_collision") {
          scorer = std::make_unique<FirstCollisionScorer>();
        } else {
          const auto train_set = split_videos_for(ds, Split::kTrain, scaler, opt);
          const auto val_set = split_videos_for(ds, Split::kVal, scaler, opt);
          scorer = std::make_unique<NodeEmbeddingScorer>(train_node_embeddings(train_set, val_set, cfg.linear));
        }
        EvalReport r = evaluate(*scorer, videos, evl_split, evl_random_ties ? TieBreak::kRandom : TieBreak::kEarliest,
                                cfg.train.seed);
        r.config_fingerprint = fp;
        write_text(out / ("eval_" + name + "_" + evl_split + ".json"), report_to_json(r));
        std::printf("%-16s %-5s top-1 %6.2f%%  all-hit %6.2f%%  (uniform guess %.2f%%, %d instances)\n", name.c_str(),
                    evl_split.c_str(), r.accuracy, r.all_hit_accuracy, r.random_expectation, r.instances);
        reports.push_back(std::move(r));
      }
      write_text(out / ("eval_" + evl_split + ".csv"), reports_csv(reports));
    } else if (abl->parsed()) {
      const fs::path dir = abl_dir;
      PipelineConfig cfg = resolve_config(common, dir);
      if (abl_epochs) cfg.train.epochs = *abl_epochs;
      cfg.validate();
      const Dataset ds = read_dataset(dir);
      const fs::path out = out_dir(abl_out, cfg);
      std::vector<EvalReport> reports;
      for (const auto& name : abl_names) {
        AblationResult r = run_ablation(name, ds, cfg.train);
        r.val.config_fingerprint = r.test.config_fingerprint = config_fingerprint(cfg);
        write_text(out / ("ablation_" + name + "_val.json"), report_to_json(r.val));
        write_text(out / ("ablation_" + name + "_test.json"), report_to_json(r.test));
        write_text(out / ("loss_curve_" + name + ".csv"), loss_curve_csv(r.training.curve));
        std::printf("%-20s val %6.2f%%  test %6.2f%%\n", name.c_str(), r.val.accuracy, r.test.accuracy);
        reports.push_back(r.val);
        reports.push_back(r.test);
      }
      write_text(out / "ablations.csv", reports_csv(reports));
    } else if (ing->parsed()) {
      PipelineConfig cfg = resolve_config(common, std::nullopt);
      const Dataset ds = ingest_external(ing_events, ing_pairs, ing_seed);
      cfg.dataset.seed = ing_seed;
      cfg.dataset.n_videos = ds.stats.attempted;
      const fs::path out = out_dir(ing_out, cfg);
      write_dataset(ds, cfg, out);
      say("ingested " + std::to_string(ds.videos.size()) + " videos with d = " + std::to_string(ds.feature_dim));
    } else if (rep->parsed()) {
      const PipelineConfig cfg = resolve_config(common, std::nullopt);
      const fs::path out = out_dir(rep_out, cfg);
      std::vector<EvalReport> reports;
      for (const auto& path : rep_reports) reports.push_back(report_from_json(read_text(path)));
      write_text(out / "results.csv", reports_csv(reports));
      if (!rep_dataset.empty()) {
        const PositionHistogram h = position_histogram(read_dataset(rep_dataset));
        write_text(out / "trigger_positions.csv", histogram_csv(h));
        if (!rep_no_plots) write_text(out / "trigger_positions.svg", histogram_svg(h));
        std::printf("triggers at %d distinct positions, %.1f%% at index 0\n", h.distinct_trigger_positions(),
                    100.0 * h.trigger_share_at(0));
      }
      if (!rep_no_plots) {
        write_text(out / "accuracy.svg", accuracy_svg(reports));
        for (std::size_t i = 0; i < rep_curves.size(); ++i)
          write_text(out / ("loss_curve_" + std::to_string(i) + ".svg"),
                     loss_curve_svg(parse_loss_curve_csv(read_text(rep_curves[i]), rep_curves[i])));
      }
      say("wrote report to " + out.string());
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
