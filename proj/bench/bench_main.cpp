// Serial reference paths against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include "abduct/trainer.hpp"

using namespace abduct;

namespace {

DatasetConfig bench_config(int n) {
  DatasetConfig c;
  c.n_videos = n;
  c.seed = 42;
  c.min_usable_videos = 1;
  return c;
}

const Dataset& bench_dataset() {
  static const Dataset ds = build_dataset(bench_config(24));
  return ds;
}

void BM_BuildDataset(benchmark::State& state) {
  const Execution exec = state.range(0) ? Execution::kParallel : Execution::kSerial;
  for (auto _ : state) benchmark::DoNotOptimize(build_dataset(bench_config(8), exec));
  state.SetLabel(state.range(0) ? "parallel" : "serial");
}
BENCHMARK(BM_BuildDataset)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_BatchGradient(benchmark::State& state) {
  const Dataset& ds = bench_dataset();
  const auto records = ds.videos_in(Split::kTrain);
  const FeatureScaler scaler = fit_scaler(records, ds.feature_dim);
  const auto videos = prepare_videos(records, scaler, {});
  ModelOptions opt;
  ModelParams params = ModelParams::initialize(ds.feature_dim, opt.layers, 1, mean_edge_gap(videos));
  std::vector<BatchItem> batch;
  for (const auto& v : videos) {
    BatchItem item{&v.data, {}};
    for (std::size_t i = 0; i < v.data.targets.size(); ++i) item.target_indices.push_back(static_cast<int>(i));
    batch.push_back(std::move(item));
  }
  const Execution exec = state.range(0) ? Execution::kParallel : Execution::kSerial;
  ModelParams grad;
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_gradient(batch, params, opt, &grad, exec));
  state.SetLabel(state.range(0) ? "parallel" : "serial");
}
BENCHMARK(BM_BatchGradient)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_LabelVideo(benchmark::State& state) {
  const DatasetConfig c = bench_config(1);
  const SceneSpec scene = scene_for_video(c, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(label_video(0, scene, c.label));
}
BENCHMARK(BM_LabelVideo)->Arg(3)->Arg(11)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
