#pragma once

#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <string_view>

#include "rtpc/correction.hpp"
#include "rtpc/ingest.hpp"
#include "rtpc/phantom.hpp"
#include "rtpc/resp.hpp"
#include "rtpc/segmentation.hpp"

namespace rtpc::app {

/// Contents of config/defaults.json, compiled in.
std::string_view defaults_json();
const nlohmann::json& defaults();

/// Overlays `patch` on `base`: objects merge key by key, anything else
/// replaces. Unknown keys are rejected with ConfigInvalid.
nlohmann::json merge_config(const nlohmann::json& base, const nlohmann::json& patch, const std::string& where = "");

enum class SegMethod { Grow, Frequency };
enum class FlowUnit { MlPerMin, MlPerSec };
enum class NoStationaryPolicy { Fallback, Abort };

struct SegmentationConfig {
  SegMethod method = SegMethod::Frequency;
  std::optional<PixelIndex> seed;
  seg::GrowParams grow;
  seg::FreqSegParams frequency;
};

struct CorrectionConfig {
  bool unalias = true;
  bool background = true;
  correction::StationaryParams stationary;
  correction::BackgroundOrder order = correction::BackgroundOrder::Plane;
  NoStationaryPolicy on_no_stationary = NoStationaryPolicy::Fallback;
  correction::DenoiseMode denoise;
};

struct RespConfig {
  bool enabled = true;
  std::optional<std::filesystem::path> resp_file;
  std::optional<double> grid_step_s;
  std::size_t min_cycles = 3;
  std::optional<double> slope_epsilon;
  resp::Statistic statistic = resp::Statistic::Mean;
  resp::Selection selection = resp::Selection::SignedMax;
  std::size_t average_points = 32;
};

struct PipelineConfig {
  std::filesystem::path input;
  std::filesystem::path output_dir = "rtpc_out";
  std::size_t jobs = 1;
  ingest::IngestConfig ingest;
  SegmentationConfig segmentation;
  CorrectionConfig correction;
  FlowUnit flow_unit = FlowUnit::MlPerMin;
  RespConfig resp;
  bool write_masks = true;
  bool write_plots = true;
  /// The merged JSON the struct was built from, for hashing and the manifest.
  nlohmann::json source;
};

/// Builds a config from defaults overlaid with `user`. Relative input and
/// resp paths resolve against `base_dir`. Throws ConfigInvalid.
PipelineConfig pipeline_config_from_json(const nlohmann::json& user, const std::filesystem::path& base_dir = {});
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

phantom::PhantomConfig phantom_config_from_json(const nlohmann::json& user);
phantom::PhantomConfig load_phantom_config(const std::filesystem::path& path);
nlohmann::json phantom_config_to_json(const phantom::PhantomConfig& config);

/// Reads a JSON file. Throws FileNotFound or ConfigInvalid.
nlohmann::json read_json_file(const std::filesystem::path& path);

/// FNV-1a 64 of the canonical dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& j);

/// config_hash of the settings that can change results: output_dir and
/// jobs are left out.
std::string results_hash(const PipelineConfig& config);

}  // namespace rtpc::app
