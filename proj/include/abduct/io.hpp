#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "abduct/dataset.hpp"
#include "abduct/trainer.hpp"

namespace abduct {

inline constexpr int kFormatVersion = 1;

/// Everything one run needs, loadable from a single JSON file. Missing keys
/// keep their defaults; unknown keys are rejected.
struct PipelineConfig {
  DatasetConfig dataset;
  TrainConfig train;
  LinearConfig linear;
  std::string output_dir = "out";
  int threads = 0;  ///< 0 leaves the OpenMP default
  bool write_trajectories = false;

  void validate() const;
};

nlohmann::json config_to_json(const PipelineConfig& config);
PipelineConfig config_from_json(const nlohmann::json& j);
PipelineConfig load_config(const std::filesystem::path& path);
/// Digest of the canonical config JSON.
std::string config_fingerprint(const PipelineConfig& config);

// ---- records ------------------------------------------------------------

nlohmann::json scene_to_json(const SceneSpec& scene);
SceneSpec scene_from_json(const nlohmann::json& j);
nlohmann::json event_to_json(int video_id, const Event& e);
nlohmann::json pair_to_json(const TriggerTargetPair& p);
TriggerTargetPair pair_from_json(const nlohmann::json& j);

/// JSON-Lines files: a header object with format_version and kind, then one record per line.
std::string scenes_jsonl(const Dataset& dataset);
std::string events_jsonl(const Dataset& dataset);
std::string pairs_jsonl(const Dataset& dataset);
std::string trajectories_jsonl(int video_id, const SimulationResult& sim);
std::string manifest_json(const Dataset& dataset, const PipelineConfig& config);

struct ParsedEvents {
  int feature_dim = 0;
  std::vector<std::pair<int, std::vector<Event>>> videos;  ///< ascending video id, events in file order
};

/// Errors name `source` and the 1-based line.
std::vector<std::pair<int, SceneSpec>> parse_scenes_jsonl(const std::string& text, const std::string& source);
ParsedEvents parse_events_jsonl(const std::string& text, const std::string& source);
std::vector<TriggerTargetPair> parse_pairs_jsonl(const std::string& text, const std::string& source);

// ---- directories --------------------------------------------------------

/// Writes scenes.jsonl, events.jsonl, pairs.jsonl and manifest.json.
void write_dataset(const Dataset& dataset, const PipelineConfig& config, const std::filesystem::path& dir);

/// Reads a directory written by write_dataset or ingest (scenes optional).
Dataset read_dataset(const std::filesystem::path& dir);

/// External events plus pairs. Videos without pairs are dropped and
/// counted; splits are drawn with `split_seed`.
Dataset ingest_external(const std::filesystem::path& events_path, const std::filesystem::path& pairs_path,
                        std::uint64_t split_seed);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

// ---- reports ------------------------------------------------------------

struct PositionHistogram {
  std::vector<int> triggers;  ///< count per premise index
  std::vector<int> targets;   ///< count per event index

  int distinct_trigger_positions() const;
  double trigger_share_at(int index) const;
};

/// Positions in temporal order within each video.
PositionHistogram position_histogram(const Dataset& dataset);
std::string histogram_csv(const PositionHistogram& h);
std::string histogram_svg(const PositionHistogram& h);
std::string accuracy_svg(const std::vector<EvalReport>& reports);
std::string loss_curve_svg(const std::vector<EpochRecord>& curve);
std::vector<EpochRecord> parse_loss_curve_csv(const std::string& text, const std::string& source);

}  // namespace abduct
