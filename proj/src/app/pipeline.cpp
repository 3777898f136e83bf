#include "rtpc/app/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <thread>

#include "rtpc/app/csv.hpp"
#include "rtpc/app/export.hpp"
#include "rtpc/app/fsutil.hpp"
#include "rtpc/app/svg.hpp"
#include "rtpc/portable.hpp"
#include "rtpc/segmentation.hpp"
#include "rtpc/version.hpp"

namespace rtpc::app {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* kExColor = "#d62728";
const char* kInColor = "#1f77b4";

resp::SweepOptions sweep_options(const RespConfig& c) {
  resp::SweepOptions o;
  o.grid_step_s = c.grid_step_s.value_or(0.0);
  o.min_cycles = c.min_cycles;
  o.slope_epsilon = c.slope_epsilon.value_or(-1.0);
  o.statistic = c.statistic;
  o.selection = c.selection;
  return o;
}

Roi segment(const ingest::SeriesPair& s, const SegmentationConfig& c) {
  if (c.method == SegMethod::Grow) {
    if (!c.seed) fail(ErrorCode::ConfigInvalid, "region growing needs segmentation.grow.seed");
    seg::GrowParams p = c.grow;
    p.seed = *c.seed;
    return seg::segment_region_growing(s.magnitude, s.velocity, p);
  }
  return seg::segment_cardiac_frequency(s.velocity, c.frequency);
}

ingest::SeriesPair ingest_input(const PipelineConfig& config) {
  if (config.input.empty()) fail(ErrorCode::ConfigInvalid, "no input path");
  if (!fs::exists(config.input)) fail(ErrorCode::FileNotFound, "file not found: " + config.input.string());
  if (config.input.extension() == ".rtp") return portable::read_portable(config.input);
  return ingest::load_series(config.input, config.ingest);
}

std::optional<fs::path> sibling_resp_file(const fs::path& input) {
  if (input.empty()) return std::nullopt;
  fs::path p = input;
  p.replace_filename(input.stem().string() + ".resp.csv");
  if (fs::exists(p)) return p;
  return std::nullopt;
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// Runs `body` as the named stage, recording its time. On failure the error
// is stored with the stage prefix and false is returned.
template <class F>
bool run_stage(DatasetResult& r, const std::string& stage, F&& body) {
  Stopwatch sw;
  try {
    body();
    r.timings.push_back({stage, sw.seconds()});
    log(LogLevel::Debug, r.dataset_id + ": " + stage + " done");
    return true;
  } catch (const Error& e) {
    r.error = StageError{stage, e.code(), stage + ": " + e.what()};
  } catch (const std::exception& e) {
    r.error = StageError{stage, ErrorCode::InvalidArgument, stage + ": " + e.what()};
  }
  r.timings.push_back({stage, sw.seconds()});
  log(LogLevel::Warn, r.dataset_id + ": " + r.error->message);
  return false;
}

void process(DatasetResult& r, const ingest::SeriesPair& series, std::optional<Signal1D> belt,
             const PipelineConfig& config) {
  r.header = series.velocity.header();
  r.magnitude = series.magnitude;
  if (!run_stage(r, "segment", [&] { r.roi = segment(series, config.segmentation); })) return;

  VelocitySeries vel = series.velocity;
  if (config.correction.unalias) {
    if (!run_stage(r, "unalias", [&] { vel = correction::unalias(vel, *r.roi, r.header->venc_cm_s); })) return;
  }

  if (config.correction.background) {
    const bool ok = run_stage(r, "background", [&] {
      const auto& cc = config.correction;
      try {
        const Mask stationary = correction::select_stationary_tissue(vel, series.magnitude, *r.roi, cc.stationary);
        r.background = correction::fit_background(vel, stationary, cc.order);
      } catch (const Error& e) {
        const bool recoverable = e.code() == ErrorCode::NoStationaryPixels || e.code() == ErrorCode::RankDeficient;
        if (!recoverable || cc.on_no_stationary == NoStationaryPolicy::Abort) throw;
        log(LogLevel::Info, r.dataset_id + ": background fallback after " + e.what());
        const Mask fallback = correction::low_std_pixels(vel, *r.roi, cc.stationary.std_threshold_cm_s);
        r.background = correction::fit_background(vel, fallback, correction::BackgroundOrder::Constant);
        r.background_fallback = true;
      }
      vel = correction::apply_background(vel, *r.background);
    });
    if (!ok) return;
  }

  if (config.correction.denoise.kind != correction::DenoiseMode::Kind::None) {
    if (!run_stage(r, "denoise", [&] { vel = correction::denoise(vel, config.correction.denoise); })) return;
  }

  if (!run_stage(r, "flow", [&] { r.flow = flow::compute_flow_curve(vel, *r.roi); })) return;

  if (!config.resp.enabled) {
    r.resp_skipped = "disabled in config";
    return;
  }
  run_stage(r, "resp", [&] {
    if (config.resp.resp_file) {
      belt = parse_resp_csv(read_text_file(*config.resp.resp_file));
    } else if (!belt) {
      if (auto sibling = sibling_resp_file(config.input)) belt = parse_resp_csv(read_text_file(*sibling));
    }
    if (!belt) {
      r.resp_skipped = "no respiratory recording";
      return;
    }
    r.belt = belt;
    auto outcome = analyze_respiration(*r.flow, *belt, config.resp, config.segmentation.frequency.cardiac_band);
    r.cardiac_hz = outcome.cardiac_hz;
    r.cycles = std::move(outcome.cycles);
    r.diffs = std::move(outcome.diffs);
  });
}

std::string mask_name(std::size_t t, std::size_t n) {
  if (n == 1) return "roi.pgm";
  char buf[32];
  std::snprintf(buf, sizeof buf, "roi_%04zu.pgm", t);
  return buf;
}

}  // namespace

RespOutcome analyze_respiration(const flow::FlowCurve& flow, const Signal1D& belt, const RespConfig& config,
                                signal::Band cardiac_band) {
  RespOutcome out;
  out.cardiac_hz = signal::estimate_fundamental_hz(flow.signal, cardiac_band);
  out.cycles = resp::segment_cycles(flow, out.cardiac_hz);
  const auto options = sweep_options(config);
  for (auto p : resp::kAllParameters)
    out.diffs.push_back(resp::sweep_delay(out.cycles, belt, flow.signal.sample_period_s(), p, options));
  return out;
}

std::string flow_plot_svg(const Signal1D& flow, FlowUnit unit) {
  PlotSeries s;
  s.label = "flow";
  const double scale = unit == FlowUnit::MlPerMin ? 1.0 : 1.0 / 60.0;
  for (std::size_t i = 0; i < flow.size(); ++i) {
    s.x.push_back(flow.time(i));
    s.y.push_back(flow[i] * scale);
  }
  return line_plot("Flow rate", "time (s)", unit == FlowUnit::MlPerMin ? "flow (mL/min)" : "flow (mL/s)", {s});
}

std::string ccfc_overlay_svg(const std::vector<resp::Ccfc>& cycles, const Signal1D& belt,
                             const std::vector<resp::DiffResult>& diffs, std::size_t n_points) {
  if (diffs.empty()) fail(ErrorCode::InvalidArgument, "no delay sweep results to label cycles with");
  const resp::DiffResult* ref = &diffs.front();
  for (const auto& d : diffs) {
    if (d.parameter == resp::Parameter::MeanFlow) ref = &d;
  }
  const auto labels = resp::label_cycles(cycles, belt, ref->delay_s, ref->slope_epsilon);
  std::vector<PlotSeries> series;
  for (auto [label, color] : {std::pair{resp::Label::Ex, kExColor}, std::pair{resp::Label::In, kInColor}}) {
    std::vector<const resp::Ccfc*> subset;
    for (std::size_t i = 0; i < cycles.size(); ++i) {
      if (labels[i] == label) subset.push_back(&cycles[i]);
    }
    if (subset.empty()) continue;
    PlotSeries s;
    s.label = std::string(resp::to_string(label)) + " (n=" + std::to_string(subset.size()) + ")";
    s.color = color;
    s.y = resp::average_ccfc(subset, n_points);
    for (std::size_t i = 0; i < s.y.size(); ++i) s.x.push_back(static_cast<double>(i) / static_cast<double>(s.y.size() - 1));
    series.push_back(std::move(s));
  }
  char title[96];
  std::snprintf(title, sizeof title, "Average cycle flow, delay %.3f s", ref->delay_s);
  return line_plot(title, "cycle phase", "flow (mL/min)", series);
}

std::string diff_plot_svg(const std::string& parameter, const std::vector<double>& delay_s,
                          const std::vector<double>& diff_percent) {
  PlotSeries s;
  s.label = parameter;
  s.x = delay_s;
  s.y = diff_percent;
  return line_plot("Diff Ex-In, " + parameter, "delay (s)", "Diff (%)", {s});
}

DatasetResult run_pipeline(const ingest::SeriesPair& series, const std::optional<Signal1D>& belt,
                           const PipelineConfig& config, const std::string& dataset_id) {
  DatasetResult r;
  r.dataset_id = dataset_id;
  r.input = config.input;
  process(r, series, belt, config);
  return r;
}

DatasetResult run_dataset(const PipelineConfig& config, const std::string& dataset_id) {
  DatasetResult r;
  r.dataset_id = dataset_id;
  r.input = config.input;
  std::optional<ingest::SeriesPair> series;
  if (!run_stage(r, "ingest", [&] { series = ingest_input(config); })) return r;
  process(r, *series, std::nullopt, config);
  return r;
}

void write_artifacts(const DatasetResult& r, const PipelineConfig& config, const fs::path& dir) {
  ensure_directory(dir);
  json artifacts = json::array();
  auto emit = [&](const fs::path& rel, const std::string& bytes) {
    write_file_atomic(dir / rel, bytes);
    artifacts.push_back(rel.generic_string());
  };

  ResultsTable table(results_hash(config));
  table.add(r, config.flow_unit);
  emit("results.tsv", table.to_tsv());

  if (r.flow) emit("flow.csv", flow_csv(*r.flow, config.flow_unit));
  if (!r.diffs.empty()) emit("diff_curves.csv", diff_curves_csv(r.diffs));

  if (config.write_masks && r.roi) {
    const auto& masks = r.roi->masks();
    for (std::size_t t = 0; t < masks.size(); ++t) emit(fs::path("masks") / mask_name(t, masks.size()), seg::to_pgm(masks[t]));
    if (r.background) emit("masks/stationary.pgm", seg::to_pgm(r.background->stationary_mask));
  }

  if (config.write_plots) {
    if (r.flow) emit("plots/flow.svg", flow_plot_svg(r.flow->signal, config.flow_unit));
    if (!r.diffs.empty() && r.belt) {
      emit("plots/ccfc_ex_in.svg", ccfc_overlay_svg(r.cycles, *r.belt, r.diffs, config.resp.average_points));
      for (const auto& d : r.diffs) {
        std::vector<double> x, y;
        for (const auto& p : d.curve) {
          if (!p.valid) continue;
          x.push_back(p.delay_s);
          y.push_back(p.diff.diff_percent);
        }
        const std::string name(resp::to_string(d.parameter));
        emit("plots/diff_" + name + ".svg", diff_plot_svg(name, x, y));
      }
    }
  }

  json manifest;
  manifest["software"] = "rtpc";
  manifest["version"] = kVersion;
  manifest["config_hash"] = results_hash(config);
  manifest["dataset"] = r.dataset_id;
  manifest["input"] = r.input.string();
  manifest["status"] = r.ok() ? "ok" : "error";
  if (r.error) {
    manifest["error"] = {{"stage", r.error->stage}, {"code", std::string(to_string(r.error->code))}, {"message", r.error->message}};
  }
  json stages = json::array();
  for (const auto& t : r.timings) stages.push_back({{"stage", t.stage}, {"seconds", t.seconds}});
  manifest["stages"] = stages;
  artifacts.push_back("manifest.json");
  manifest["artifacts"] = artifacts;
  manifest["config"] = config.source;
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

std::vector<fs::path> read_batch_list(const fs::path& list_file) {
  const std::string text = read_text_file(list_file);
  std::vector<fs::path> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t\r");
    fs::path p = line.substr(first, last - first + 1);
    if (p.is_relative()) p = list_file.parent_path() / p;
    out.push_back(p.lexically_normal());
  }
  return out;
}

std::vector<std::string> dataset_ids(const std::vector<fs::path>& inputs) {
  std::vector<std::string> ids;
  for (const auto& in : inputs) {
    std::string base = in.stem().string();
    if (base.empty()) base = in.filename().string();
    if (base.empty()) base = in.parent_path().filename().string();
    if (base.empty()) base = "dataset";
    std::string id = base;
    for (int k = 2; std::find(ids.begin(), ids.end(), id) != ids.end(); ++k) id = base + "_" + std::to_string(k);
    ids.push_back(id);
  }
  return ids;
}

std::vector<DatasetResult> run_batch(const PipelineConfig& config, const std::vector<fs::path>& inputs,
                                     bool dataset_artifacts) {
  const auto ids = dataset_ids(inputs);
  std::vector<DatasetResult> results(inputs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < inputs.size(); i = next++) {
      PipelineConfig c = config;
      c.input = inputs[i];
      results[i] = run_dataset(c, ids[i]);
      if (!dataset_artifacts) continue;
      try {
        write_artifacts(results[i], c, config.output_dir / ids[i]);
      } catch (const Error& e) {
        if (!results[i].error) results[i].error = StageError{"export", e.code(), std::string("export: ") + e.what()};
      }
    }
  };
  const std::size_t n_workers = std::max<std::size_t>(1, std::min(config.jobs, inputs.size()));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  ResultsTable table(results_hash(config));
  for (const auto& r : results) table.add(r, config.flow_unit);
  write_file_atomic(config.output_dir / "results.tsv", table.to_tsv());

  json manifest;
  manifest["software"] = "rtpc";
  manifest["version"] = kVersion;
  manifest["config_hash"] = results_hash(config);
  json datasets = json::array();
  for (const auto& r : results) {
    json d = {{"dataset", r.dataset_id}, {"input", r.input.string()}, {"status", r.ok() ? "ok" : "error"}};
    if (r.error) d["error"] = r.error->message;
    json stages = json::array();
    for (const auto& t : r.timings) stages.push_back({{"stage", t.stage}, {"seconds", t.seconds}});
    d["stages"] = stages;
    datasets.push_back(d);
  }
  manifest["datasets"] = datasets;
  manifest["jobs"] = n_workers;
  write_file_atomic(config.output_dir / "manifest.json", manifest.dump(2) + "\n");
  return results;
}

}  // namespace rtpc::app
