#include "abduct/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <optional>
#include <string>

#include "abduct/errors.hpp"
#include "abduct/rng.hpp"

namespace abduct {

namespace {

constexpr std::uint64_t kSplitStream = 0x5b117;

struct Slot {
  std::optional<VideoRecord> record;
  bool diverged = false;
  int retries = 0;
  std::exception_ptr error;
};

Slot label_slot(const DatasetConfig& config, int index) {
  Slot slot;
  try {
    const SceneSpec scene = scene_for_video(config, index, &slot.retries);
    slot.record = label_video(index, scene, config.label);
  } catch (const SimulationDivergedError&) {
    slot.diverged = true;
  } catch (const CounterfactualSimulationError&) {
    slot.diverged = true;
  } catch (...) {
    slot.error = std::current_exception();
  }
  return slot;
}

}  // namespace

std::string_view to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

Split split_from_string(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw InputError("unknown split '" + std::string(s) + "'");
}

const std::vector<int>& SplitIds::of(Split s) const {
  switch (s) {
    case Split::kTrain: return train;
    case Split::kVal: return val;
    case Split::kTest: return test;
  }
  return train;
}

const VideoRecord& Dataset::video(int video_id) const {
  const auto it = std::lower_bound(videos.begin(), videos.end(), video_id,
                                   [](const VideoRecord& v, int id) { return v.video_id < id; });
  if (it == videos.end() || it->video_id != video_id)
    throw InputError("video " + std::to_string(video_id) + " not in dataset");
  return *it;
}

std::vector<const VideoRecord*> Dataset::videos_in(Split s) const {
  std::vector<const VideoRecord*> out;
  for (int id : splits.of(s)) out.push_back(&video(id));
  return out;
}

std::size_t Dataset::pair_count(Split s) const {
  std::size_t n = 0;
  for (const auto* v : videos_in(s)) n += v->pairs.size();
  return n;
}

std::vector<int> all_layouts() {
  std::vector<int> ids(kNumLayouts);
  for (int i = 0; i < kNumLayouts; ++i) ids[i] = i + 1;
  return ids;
}

void DatasetConfig::validate() const {
  if (n_videos <= 0) throw InputError("n_videos must be positive");
  if (placement_retries < 0) throw InputError("placement_retries must be non-negative");
  if (layouts.empty()) throw InputError("at least one layout is required");
  for (int id : layouts)
    if (id < 1 || id > kNumLayouts) throw InputError("layout id " + std::to_string(id) + " outside 1.." + std::to_string(kNumLayouts));
  if (label.max_paths < 1) throw InputError("max_paths must be positive");
  if (label.tolerances.time < 0.0 || label.tolerances.space < 0.0) throw InputError("match tolerances must be non-negative");
  label.world.validate();
}

SceneSpec scene_for_video(const DatasetConfig& config, int video_index, int* retries_used) {
  if (config.layouts.empty()) throw InputError("at least one layout is required");
  const int layout = config.layouts[static_cast<std::size_t>(video_index) % config.layouts.size()];
  const std::uint64_t base = mix_seed(config.seed, static_cast<std::uint64_t>(video_index));
  for (int attempt = 0; attempt <= config.placement_retries; ++attempt) {
    const std::uint64_t seed = attempt == 0 ? base : mix_seed(base, static_cast<std::uint64_t>(attempt));
    try {
      SceneSpec scene = build_scene(layout, seed);
      if (retries_used) *retries_used = attempt;
      return scene;
    } catch (const UnplaceableSceneError&) {
      if (attempt == config.placement_retries) throw;
    }
  }
  throw UnplaceableSceneError(layout, base);
}

SplitIds split_videos(std::vector<int> video_ids, std::uint64_t seed) {
  std::sort(video_ids.begin(), video_ids.end());
  Rng rng(mix_seed(seed, kSplitStream));
  rng.shuffle(video_ids);
  const std::size_t n = video_ids.size();
  const auto n_train = static_cast<std::size_t>(std::llround(0.6 * static_cast<double>(n)));
  const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(n))));
  SplitIds s;
  s.train.assign(video_ids.begin(), video_ids.begin() + n_train);
  s.val.assign(video_ids.begin() + n_train, video_ids.begin() + n_train + n_val);
  s.test.assign(video_ids.begin() + n_train + n_val, video_ids.end());
  for (auto* v : {&s.train, &s.val, &s.test}) std::sort(v->begin(), v->end());
  return s;
}

Dataset build_dataset(const DatasetConfig& config, Execution exec) {
  config.validate();
  const int n = config.n_videos;
  std::vector<Slot> slots(n);
  if (exec == Execution::kParallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (int i = 0; i < n; ++i) slots[i] = label_slot(config, i);
  } else {
    for (int i = 0; i < n; ++i) slots[i] = label_slot(config, i);
  }

  Dataset ds;
  ds.stats.attempted = n;
  std::vector<int> usable;
  for (auto& slot : slots) {
    if (slot.error) std::rethrow_exception(slot.error);
    ds.stats.placement_retries += slot.retries;
    if (slot.diverged) {
      ++ds.stats.discarded_diverged;
      continue;
    }
    if (slot.record->pairs.empty()) {
      ++ds.stats.discarded_no_pairs;
      continue;
    }
    for (const auto& p : slot.record->pairs) ds.stats.path_cap_hits += p.path_cap_hit;
    usable.push_back(slot.record->video_id);
    ds.videos.push_back(std::move(*slot.record));
  }
  ds.stats.usable = static_cast<int>(usable.size());
  if (ds.stats.usable < config.min_usable_videos)
    throw InputError("only " + std::to_string(ds.stats.usable) + " usable videos (need " +
                     std::to_string(config.min_usable_videos) + ")");
  ds.splits = split_videos(std::move(usable), config.seed);
  return ds;
}

}  // namespace abduct
