#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "abduct/execution.hpp"
#include "abduct/labeler.hpp"

namespace abduct {

enum class Split { kTrain, kVal, kTest };
std::string_view to_string(Split s);
Split split_from_string(std::string_view s);

std::vector<int> all_layouts();

struct DatasetConfig {
  int n_videos = 1000;
  std::uint64_t seed = 0;
  /// Video i uses layouts[i mod size]. Ids must lie in 1..20.
  std::vector<int> layouts = all_layouts();
  /// Fresh seeds tried for a video whose scene cannot be placed.
  int placement_retries = 10;
  /// Fewer usable videos than this is an error.
  int min_usable_videos = 5;
  LabelConfig label;

  /// Throws InputError for bad counts, layouts or world settings.
  void validate() const;
};

struct SplitIds {
  std::vector<int> train;
  std::vector<int> val;
  std::vector<int> test;

  const std::vector<int>& of(Split s) const;
  bool operator==(const SplitIds&) const = default;
};

struct DatasetStats {
  int attempted = 0;
  int usable = 0;
  int discarded_no_pairs = 0;
  int discarded_diverged = 0;
  int placement_retries = 0;
  int path_cap_hits = 0;

  bool operator==(const DatasetStats&) const = default;
};

struct Dataset {
  int feature_dim = kEventFeatureDim;
  std::vector<VideoRecord> videos;  ///< ascending video_id
  SplitIds splits;
  DatasetStats stats;

  const VideoRecord& video(int video_id) const;
  std::vector<const VideoRecord*> videos_in(Split s) const;
  std::size_t pair_count(Split s) const;
};

/// Video i uses layouts[i mod size] and a seed derived from (seed, i).
SceneSpec scene_for_video(const DatasetConfig& config, int video_index, int* retries_used = nullptr);

/// Shuffles video ids with `seed` and cuts 60:20:20 (rounded, test takes the rest).
SplitIds split_videos(std::vector<int> video_ids, std::uint64_t seed);

/// Generates, labels and splits. Videos without pairs or with a diverging
/// simulation are discarded and counted. Serial and parallel execution give
/// identical datasets.
Dataset build_dataset(const DatasetConfig& config, Execution exec = Execution::kParallel);

}  // namespace abduct
