#include "rtpc/app/config.hpp"

#include <cstdio>
#include <fstream>

#include "rtpc/error.hpp"

namespace rtpc::app {

namespace fs = std::filesystem;
using nlohmann::json;

const json& defaults() {
  static const json parsed = json::parse(defaults_json());
  return parsed;
}

json merge_config(const json& base, const json& patch, const std::string& where) {
  if (!patch.is_object()) fail(ErrorCode::ConfigInvalid, (where.empty() ? "config" : where) + " must be an object");
  json out = base;
  for (const auto& [key, value] : patch.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!base.contains(key)) fail(ErrorCode::ConfigInvalid, "unknown config key '" + path + "'");
    if (base[key].is_object() && value.is_object()) {
      out[key] = merge_config(base[key], value, path);
    } else {
      out[key] = value;
    }
  }
  return out;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::FileNotFound, "file not found: " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigInvalid, path.string() + ": " + e.what());
  }
}

std::string config_hash(const json& j) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string results_hash(const PipelineConfig& config) {
  json j = config.source;
  if (j.is_object()) {
    j.erase("output_dir");
    j.erase("jobs");
  }
  return config_hash(j);
}

namespace {

// Typed access with the dotted path in the error message.
template <typename T>
T get(const json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorCode::ConfigInvalid, "config key '" + where + key + "' has the wrong type");
  }
}

template <typename T>
std::optional<T> get_opt(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return get<T>(j, key, where);
}

std::optional<PixelIndex> get_pixel(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  const auto v = get<std::vector<int>>(j, key, where);
  if (v.size() != 2) fail(ErrorCode::ConfigInvalid, "config key '" + where + key + "' must be [row, col]");
  return PixelIndex{v[0], v[1]};
}

std::pair<double, double> get_pair(const json& j, const char* key, const std::string& where) {
  const auto v = get<std::vector<double>>(j, key, where);
  if (v.size() != 2) fail(ErrorCode::ConfigInvalid, "config key '" + where + key + "' must have two entries");
  return {v[0], v[1]};
}

fs::path resolve(const fs::path& p, const fs::path& base) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

template <typename F>
auto rethrow_as_config(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigInvalid) throw;
    fail(ErrorCode::ConfigInvalid, e.what());
  }
}

}  // namespace

PipelineConfig pipeline_config_from_json(const json& user, const fs::path& base_dir) {
  const json j = merge_config(defaults(), user);
  PipelineConfig c;
  c.source = j;
  c.input = resolve(get<std::string>(j, "input", ""), base_dir);
  c.output_dir = resolve(get<std::string>(j, "output_dir", ""), base_dir);
  const int jobs = get<int>(j, "jobs", "");
  if (jobs < 1) fail(ErrorCode::ConfigInvalid, "jobs must be >= 1");
  c.jobs = static_cast<std::size_t>(jobs);

  const json& ing = j.at("ingest");
  c.ingest.venc_override_cm_s = get_opt<double>(ing, "venc_override_cm_s", "ingest.");
  c.ingest.frame_duration_override_ms = get_opt<double>(ing, "frame_duration_override_ms", "ingest.");
  c.ingest.vendor_convention =
      rethrow_as_config([&] { return parse_vendor_convention(get<std::string>(ing, "vendor_convention", "ingest.")); });
  c.ingest.phase_sign = get<int>(ing, "phase_sign", "ingest.");
  c.ingest.validate();

  const json& sg = j.at("segmentation");
  const auto method = get<std::string>(sg, "method", "segmentation.");
  if (method == "grow") {
    c.segmentation.method = SegMethod::Grow;
  } else if (method == "frequency") {
    c.segmentation.method = SegMethod::Frequency;
  } else {
    fail(ErrorCode::ConfigInvalid, "segmentation.method must be 'grow' or 'frequency'");
  }
  const json& gr = sg.at("grow");
  c.segmentation.seed = get_pixel(gr, "seed", "segmentation.grow.");
  if (c.segmentation.seed) c.segmentation.grow.seed = *c.segmentation.seed;
  c.segmentation.grow.magnitude_fraction = get<double>(gr, "magnitude_fraction", "segmentation.grow.");
  c.segmentation.grow.max_radius_mm = get<double>(gr, "max_radius_mm", "segmentation.grow.");
  c.segmentation.grow.contour_iters = get<std::size_t>(gr, "contour_iters", "segmentation.grow.");
  c.segmentation.grow.contour_alpha = get<double>(gr, "contour_alpha", "segmentation.grow.");
  c.segmentation.grow.contour_beta = get<double>(gr, "contour_beta", "segmentation.grow.");
  if (!(c.segmentation.grow.magnitude_fraction > 0.0 && c.segmentation.grow.magnitude_fraction <= 1.0) ||
      !(c.segmentation.grow.max_radius_mm > 0.0) || c.segmentation.grow.contour_alpha < 0.0 ||
      c.segmentation.grow.contour_beta < 0.0)
    fail(ErrorCode::ConfigInvalid, "segmentation.grow parameters out of range");
  const json& fq = sg.at("frequency");
  const auto band = get_pair(fq, "cardiac_band_hz", "segmentation.frequency.");
  c.segmentation.frequency.cardiac_band = {band.first, band.second};
  c.segmentation.frequency.coherence_threshold = get<double>(fq, "coherence_threshold", "segmentation.frequency.");
  c.segmentation.frequency.min_component_px = get<std::size_t>(fq, "min_component_px", "segmentation.frequency.");
  c.segmentation.frequency.hint = get_pixel(fq, "hint", "segmentation.frequency.");
  rethrow_as_config([&] {
    c.segmentation.frequency.validate();
    return 0;
  });

  const json& co = j.at("correction");
  c.correction.unalias = get<bool>(co, "unalias", "correction.");
  c.correction.background = get<bool>(co, "background", "correction.");
  c.correction.stationary.ring_mm = get<double>(co, "ring_mm", "correction.");
  c.correction.stationary.std_threshold_cm_s = get<double>(co, "std_threshold_cm_s", "correction.");
  c.correction.stationary.mag_percentile = get<double>(co, "mag_percentile", "correction.");
  if (!(c.correction.stationary.ring_mm > 0.0) || !(c.correction.stationary.std_threshold_cm_s > 0.0) ||
      !(c.correction.stationary.mag_percentile >= 0.0 && c.correction.stationary.mag_percentile <= 100.0))
    fail(ErrorCode::ConfigInvalid, "correction parameters out of range");
  c.correction.order = correction::parse_background_order(get<std::string>(co, "order", "correction."));
  const auto policy = get<std::string>(co, "on_no_stationary", "correction.");
  if (policy == "fallback") {
    c.correction.on_no_stationary = NoStationaryPolicy::Fallback;
  } else if (policy == "abort") {
    c.correction.on_no_stationary = NoStationaryPolicy::Abort;
  } else {
    fail(ErrorCode::ConfigInvalid, "correction.on_no_stationary must be 'fallback' or 'abort'");
  }
  const json& dn = co.at("denoise");
  const auto mode = get<std::string>(dn, "mode", "correction.denoise.");
  const double cutoff = get<double>(dn, "cutoff_hz", "correction.denoise.");
  if (mode == "none") {
    c.correction.denoise = correction::DenoiseMode::none();
  } else if (mode == "spatial_median3") {
    c.correction.denoise = correction::DenoiseMode::spatial_median3();
  } else if (mode == "temporal_lowpass") {
    c.correction.denoise = correction::DenoiseMode::temporal_lowpass(cutoff);
  } else {
    fail(ErrorCode::ConfigInvalid, "correction.denoise.mode must be none, spatial_median3 or temporal_lowpass");
  }

  const auto unit = get<std::string>(j.at("flow"), "unit", "flow.");
  if (unit == "ml_min") {
    c.flow_unit = FlowUnit::MlPerMin;
  } else if (unit == "ml_s") {
    c.flow_unit = FlowUnit::MlPerSec;
  } else {
    fail(ErrorCode::ConfigInvalid, "flow.unit must be 'ml_min' or 'ml_s'");
  }

  const json& rs = j.at("resp");
  c.resp.enabled = get<bool>(rs, "enabled", "resp.");
  if (auto f = get_opt<std::string>(rs, "resp_file", "resp.")) c.resp.resp_file = resolve(*f, base_dir);
  c.resp.grid_step_s = get_opt<double>(rs, "grid_step_s", "resp.");
  if (c.resp.grid_step_s && !(*c.resp.grid_step_s > 0.0)) fail(ErrorCode::ConfigInvalid, "resp.grid_step_s must be > 0");
  c.resp.min_cycles = get<std::size_t>(rs, "min_cycles", "resp.");
  if (c.resp.min_cycles < 1) fail(ErrorCode::ConfigInvalid, "resp.min_cycles must be >= 1");
  c.resp.slope_epsilon = get_opt<double>(rs, "slope_epsilon", "resp.");
  c.resp.statistic = resp::parse_statistic(get<std::string>(rs, "statistic", "resp."));
  c.resp.selection = resp::parse_selection(get<std::string>(rs, "selection", "resp."));
  c.resp.average_points = get<std::size_t>(rs, "average_points", "resp.");
  if (c.resp.average_points < 2) fail(ErrorCode::ConfigInvalid, "resp.average_points must be >= 2");

  c.write_masks = get<bool>(j.at("outputs"), "masks", "outputs.");
  c.write_plots = get<bool>(j.at("outputs"), "plots", "outputs.");
  return c;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  return pipeline_config_from_json(read_json_file(path), path.parent_path());
}

phantom::PhantomConfig phantom_config_from_json(const json& user) {
  const json& patch = user.contains("phantom") ? user.at("phantom") : user;
  const json j = merge_config(defaults().at("phantom"), patch, "phantom");
  phantom::PhantomConfig c;
  const std::string w = "phantom.";
  const json& g = j.at("geometry");
  c.rows = get<std::size_t>(g, "rows", w + "geometry.");
  c.cols = get<std::size_t>(g, "cols", w + "geometry.");
  const auto sp = get_pair(g, "pixel_spacing_mm", w + "geometry.");
  c.pixel_spacing_mm = {sp.first, sp.second};
  c.n_frames = get<std::size_t>(j, "n_frames", w);
  c.frame_duration_ms = get<double>(j, "frame_duration_ms", w);
  c.venc_cm_s = get<double>(j, "venc_cm_s", w);
  const json& v = j.at("vessel");
  if (v.contains("center") && !v.at("center").is_null()) {
    const auto ctr = get_pair(v, "center", w + "vessel.");
    c.center_row = ctr.first;
    c.center_col = ctr.second;
  }
  c.radius_mm = get<double>(v, "radius_mm", w + "vessel.");
  const auto drift = get_pair(v, "drift_px_per_frame", w + "vessel.");
  c.drift_row_px_per_frame = drift.first;
  c.drift_col_px_per_frame = drift.second;
  const json& cd = j.at("cardiac");
  c.hr_bpm = get<double>(cd, "hr_bpm", w + "cardiac.");
  c.harmonics.clear();
  for (const auto& hm : get<std::vector<std::vector<double>>>(cd, "harmonics", w + "cardiac.")) {
    if (hm.size() != 2) fail(ErrorCode::ConfigInvalid, "each cardiac harmonic must be [amplitude, phase_rad]");
    c.harmonics.push_back({hm[0], hm[1]});
  }
  c.waveform_baseline = get<double>(cd, "baseline", w + "cardiac.");
  c.cardiac_start_phase_rad = get<double>(cd, "start_phase_rad", w + "cardiac.");
  c.peak_velocity_cm_s = get<double>(j, "peak_velocity_cm_s", w);
  const json& r = j.at("resp");
  c.resp_period_s = get<double>(r, "period_s", w + "resp.");
  c.modulation = get<double>(r, "modulation", w + "resp.");
  c.delay_s = get<double>(r, "delay_s", w + "resp.");
  c.resp_sample_period_s = get<double>(r, "sample_period_s", w + "resp.");
  const json& b = j.at("background");
  c.background_a = get<double>(b, "a", w + "background.");
  c.background_b = get<double>(b, "b", w + "background.");
  c.background_c = get<double>(b, "c", w + "background.");
  c.noise_sigma_cm_s = get<double>(j, "noise_sigma_cm_s", w);
  c.magnitude_background = get<double>(j.at("magnitude"), "background", w + "magnitude.");
  c.magnitude_noise_sigma = get<double>(j.at("magnitude"), "noise_sigma", w + "magnitude.");
  c.alias_enabled = get<bool>(j, "alias_enabled", w);
  c.rng_seed = get<std::uint64_t>(j, "rng_seed", w);
  c.quantize_float32 = get<bool>(j, "quantize_float32", w);
  c.validate();
  return c;
}

phantom::PhantomConfig load_phantom_config(const fs::path& path) { return phantom_config_from_json(read_json_file(path)); }

json phantom_config_to_json(const phantom::PhantomConfig& c) {
  json harmonics = json::array();
  for (const auto& h : c.harmonics) harmonics.push_back({h.amplitude, h.phase_rad});
  return json{
      {"geometry", {{"rows", c.rows}, {"cols", c.cols}, {"pixel_spacing_mm", {c.pixel_spacing_mm.row_mm, c.pixel_spacing_mm.col_mm}}}},
      {"n_frames", c.n_frames},
      {"frame_duration_ms", c.frame_duration_ms},
      {"venc_cm_s", c.venc_cm_s},
      {"vessel",
       {{"center", c.center_row < 0.0 ? json(nullptr) : json{c.center_row, c.center_col}},
        {"radius_mm", c.radius_mm},
        {"drift_px_per_frame", {c.drift_row_px_per_frame, c.drift_col_px_per_frame}}}},
      {"cardiac",
       {{"hr_bpm", c.hr_bpm}, {"harmonics", harmonics}, {"baseline", c.waveform_baseline}, {"start_phase_rad", c.cardiac_start_phase_rad}}},
      {"peak_velocity_cm_s", c.peak_velocity_cm_s},
      {"resp", {{"period_s", c.resp_period_s}, {"modulation", c.modulation}, {"delay_s", c.delay_s}, {"sample_period_s", c.resp_sample_period_s}}},
      {"background", {{"a", c.background_a}, {"b", c.background_b}, {"c", c.background_c}}},
      {"noise_sigma_cm_s", c.noise_sigma_cm_s},
      {"magnitude", {{"background", c.magnitude_background}, {"noise_sigma", c.magnitude_noise_sigma}}},
      {"alias_enabled", c.alias_enabled},
      {"rng_seed", c.rng_seed},
      {"quantize_float32", c.quantize_float32}};
}

}  // namespace rtpc::app
