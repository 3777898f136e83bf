#include "rtpc/app/commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <ostream>

#include "rtpc/app/config.hpp"
#include "rtpc/app/csv.hpp"
#include "rtpc/app/export.hpp"
#include "rtpc/app/fsutil.hpp"
#include "rtpc/app/pipeline.hpp"
#include "rtpc/phantom.hpp"
#include "rtpc/portable.hpp"
#include "rtpc/segmentation.hpp"
#include "rtpc/version.hpp"

namespace rtpc::app {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOptions {
  std::string config;
  std::string input;
  std::string batch;
  std::string output;
  std::size_t jobs = 0;
  std::string seed_override;
};

PixelIndex parse_seed(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) fail(ErrorCode::ConfigInvalid, "--seed-override expects row,col");
  try {
    std::size_t used_r = 0;
    std::size_t used_c = 0;
    const std::string rs = text.substr(0, comma);
    const std::string cs = text.substr(comma + 1);
    const int r = std::stoi(rs, &used_r);
    const int c = std::stoi(cs, &used_c);
    if (used_r != rs.size() || used_c != cs.size()) throw std::invalid_argument(text);
    return {r, c};
  } catch (const std::logic_error&) {
    fail(ErrorCode::ConfigInvalid, "--seed-override expects row,col, got '" + text + "'");
  }
}

PipelineConfig build_config(const CommonOptions& o) {
  PipelineConfig c = o.config.empty() ? pipeline_config_from_json(json::object(), fs::current_path())
                                      : load_pipeline_config(o.config);
  if (!o.input.empty()) {
    c.input = o.input;
    c.source["input"] = o.input;
  }
  if (!o.output.empty()) c.output_dir = o.output;
  if (o.jobs > 0) c.jobs = o.jobs;
  if (!o.seed_override.empty()) {
    const PixelIndex p = parse_seed(o.seed_override);
    c.segmentation.seed = p;
    c.segmentation.grow.seed = p;
    c.segmentation.frequency.hint = p;
    c.source["segmentation"]["grow"]["seed"] = {p.row, p.col};
    c.source["segmentation"]["frequency"]["hint"] = {p.row, p.col};
  }
  return c;
}

void add_common(CLI::App* cmd, CommonOptions& o, bool with_batch) {
  cmd->add_option("--config", o.config, "pipeline config (JSON)");
  cmd->add_option("input,--input", o.input, ".rtp file, DICOM directory, DICOMDIR or DICOM file");
  cmd->add_option("--output", o.output, "output directory");
  cmd->add_option("--seed-override", o.seed_override, "segmentation seed / hint as row,col");
  if (with_batch) {
    cmd->add_option("--batch", o.batch, "file listing one input per line");
    cmd->add_option("--jobs", o.jobs, "concurrent datasets")->check(CLI::PositiveNumber);
  }
}

int report_batch(const std::vector<DatasetResult>& results, std::ostream& out, std::ostream& err) {
  std::size_t failed = 0;
  for (const auto& r : results) {
    if (r.ok()) {
      out << r.dataset_id << ": ok\n";
    } else {
      ++failed;
      err << r.dataset_id << ": " << r.error->message << '\n';
    }
  }
  out << results.size() - failed << " of " << results.size() << " datasets processed\n";
  return failed == 0 ? kExitOk : kExitFailure;
}

int cmd_run(const CommonOptions& o, bool table_only, std::ostream& out, std::ostream& err) {
  const PipelineConfig c = build_config(o);
  if (!o.batch.empty()) return report_batch(run_batch(c, read_batch_list(o.batch), !table_only), out, err);

  const std::string id = dataset_ids({c.input}).front();
  const DatasetResult r = run_dataset(c, id);
  if (table_only) {
    ResultsTable table(results_hash(c));
    table.add(r, c.flow_unit);
    write_file_atomic(c.output_dir / "results.tsv", table.to_tsv());
  } else {
    write_artifacts(r, c, c.output_dir);
  }
  if (!r.ok()) {
    err << r.error->message << '\n';
    return r.error->code == ErrorCode::ConfigInvalid ? kExitUsage : kExitFailure;
  }
  if (!r.resp_skipped.empty()) err << "resp analysis skipped: " << r.resp_skipped << '\n';
  out << "results written to " << c.output_dir.string() << '\n';
  return kExitOk;
}

int cmd_ingest(const CommonOptions& o, std::ostream& out) {
  const PipelineConfig c = build_config(o);
  if (c.input.empty()) fail(ErrorCode::ConfigInvalid, "ingest needs an input");
  const ingest::SeriesPair s =
      c.input.extension() == ".rtp" ? portable::read_portable(c.input) : ingest::load_series(c.input, c.ingest);
  fs::path target = c.output_dir;
  if (target.extension() != ".rtp") target /= c.input.stem().string() + ".rtp";
  portable::write_portable(s, target);
  const auto& h = s.velocity.header();
  const json summary = {{"output", target.string()},
                        {"n_frames", h.n_frames},
                        {"rows", h.rows},
                        {"cols", h.cols},
                        {"pixel_spacing_mm", {h.pixel_spacing_mm.row_mm, h.pixel_spacing_mm.col_mm}},
                        {"frame_duration_ms", h.frame_duration_ms},
                        {"venc_cm_s", h.venc_cm_s},
                        {"vendor_convention", std::string(to_string(h.vendor_convention))}};
  out << summary.dump(2) << '\n';
  return kExitOk;
}

std::string truth_flow_csv(const Signal1D& q) {
  std::string s = "time_s,flow_ml_min\n";
  for (std::size_t i = 0; i < q.size(); ++i) s += format_number(q.time(i)) + "," + format_number(q[i]) + "\n";
  return s;
}

int cmd_simulate(const std::string& config_path, const std::string& output, std::ostream& out) {
  const phantom::PhantomConfig pc =
      config_path.empty() ? phantom_config_from_json(json::object()) : load_phantom_config(config_path);
  const phantom::Phantom ph = phantom::generate(pc);
  const fs::path dir = output.empty() ? fs::path("rtpc_out") : fs::path(output);
  portable::write_portable(ph.series(), dir / "phantom.rtp");
  write_file_atomic(dir / "phantom.resp.csv", resp_csv(ph.resp));
  write_file_atomic(dir / "truth_flow.csv", truth_flow_csv(ph.truth.flow_ml_min));

  const auto& masks = ph.truth.masks;
  const bool moving = pc.drift_row_px_per_frame != 0.0 || pc.drift_col_px_per_frame != 0.0;
  if (moving) {
    for (std::size_t t = 0; t < masks.size(); ++t) {
      char name[32];
      std::snprintf(name, sizeof name, "truth_%04zu.pgm", t);
      write_file_atomic(dir / "masks" / name, seg::to_pgm(masks[t]));
    }
  } else {
    write_file_atomic(dir / "masks" / "truth.pgm", seg::to_pgm(masks.front()));
  }

  const auto q = ph.truth.flow_ml_min.samples();
  json truth = {{"config", phantom_config_to_json(pc)},
                {"cardiac_period_s", ph.truth.cardiac_period_s},
                {"modulation", ph.truth.modulation},
                {"delay_s", ph.truth.delay_s},
                {"resp_period_s", pc.resp_period_s},
                {"background", {{"a", pc.background_a}, {"b", pc.background_b}, {"c", pc.background_c}}},
                {"mean_flow_ml_min", pairwise_sum(q) / static_cast<double>(q.size())},
                {"vessel_pixels_frame0", masks.front().count()},
                {"moving_vessel", moving}};
  write_file_atomic(dir / "ground_truth.json", truth.dump(2) + "\n");
  out << "phantom written to " << dir.string() << '\n';
  return kExitOk;
}

int cmd_plot(const std::string& config_path, const std::string& flow_path, const std::string& resp_path,
             const std::string& diff_path, const std::string& output, std::ostream& out) {
  const PipelineConfig c = config_path.empty() ? pipeline_config_from_json(json::object(), fs::current_path())
                                               : load_pipeline_config(config_path);
  const fs::path dir = output.empty() ? c.output_dir / "plots" : fs::path(output);
  const FlowTable table = parse_flow_csv(read_text_file(flow_path));
  const Signal1D q = table.flow_ml_min();
  write_file_atomic(dir / "flow.svg", flow_plot_svg(q, table.unit));

  if (!resp_path.empty()) {
    const Signal1D belt = parse_resp_csv(read_text_file(resp_path));
    flow::FlowCurve curve{q, table.area_mm2, table.max_velocity_cm_s, table.max_velocity_cm_s, table.max_velocity_cm_s};
    const RespOutcome r = analyze_respiration(curve, belt, c.resp, c.segmentation.frequency.cardiac_band);
    write_file_atomic(dir / "ccfc_ex_in.svg", ccfc_overlay_svg(r.cycles, belt, r.diffs, c.resp.average_points));
  }

  if (!diff_path.empty()) {
    const auto rows = parse_diff_curves_csv(read_text_file(diff_path));
    std::vector<std::string> order;
    for (const auto& row : rows) {
      if (std::find(order.begin(), order.end(), row.parameter) == order.end()) order.push_back(row.parameter);
    }
    for (const auto& name : order) {
      std::vector<double> x, y;
      for (const auto& row : rows) {
        if (row.parameter != name) continue;
        x.push_back(row.delay_s);
        y.push_back(row.diff_percent);
      }
      write_file_atomic(dir / ("diff_" + name + ".svg"), diff_plot_svg(name, x, y));
    }
  }
  out << "plots written to " << dir.string() << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Real-time phase-contrast MRI flow and respiration analysis", "rtpc"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  CommonOptions run_opts;
  auto* run = app.add_subcommand("run", "ingest, segment, correct, quantify flow and analyze respiration");
  add_common(run, run_opts, true);

  CommonOptions export_opts;
  auto* exp = app.add_subcommand("export", "run the pipeline and write only results.tsv");
  add_common(exp, export_opts, true);

  CommonOptions ingest_opts;
  auto* ing = app.add_subcommand("ingest", "convert a DICOM series to .rtp");
  add_common(ing, ingest_opts, false);

  std::string sim_config, sim_output;
  auto* sim = app.add_subcommand("simulate", "write a synthetic phantom with its ground truth");
  sim->add_option("--config", sim_config, "phantom config (JSON)");
  sim->add_option("--output", sim_output, "output directory");

  std::string plot_config, plot_flow, plot_resp, plot_diff, plot_output;
  auto* plot = app.add_subcommand("plot", "render SVG plots from CSV outputs");
  plot->add_option("--config", plot_config, "pipeline config (JSON)");
  plot->add_option("flow,--flow", plot_flow, "flow.csv")->required();
  plot->add_option("--resp", plot_resp, "belt recording, time_s,belt");
  plot->add_option("--diff", plot_diff, "diff_curves.csv");
  plot->add_option("--output", plot_output, "output directory");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*run) return cmd_run(run_opts, false, out, err);
    if (*exp) return cmd_run(export_opts, true, out, err);
    if (*ing) return cmd_ingest(ingest_opts, out);
    if (*sim) return cmd_simulate(sim_config, sim_output, out);
    if (*plot) return cmd_plot(plot_config, plot_flow, plot_resp, plot_diff, plot_output, out);
  } catch (const Error& e) {
    err << "rtpc: " << e.what() << '\n';
    return e.code() == ErrorCode::ConfigInvalid ? kExitUsage : kExitFailure;
  } catch (const std::exception& e) {
    err << "rtpc: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace rtpc::app
