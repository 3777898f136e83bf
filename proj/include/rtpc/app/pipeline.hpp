#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rtpc/app/config.hpp"
#include "rtpc/correction.hpp"
#include "rtpc/error.hpp"
#include "rtpc/flow.hpp"
#include "rtpc/ingest.hpp"
#include "rtpc/resp.hpp"

namespace rtpc::app {

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct StageError {
  std::string stage;
  ErrorCode code = ErrorCode::InvalidArgument;
  std::string message;  // "<stage>: <detail>"
};

/// Everything one dataset produced. Stages that did not run leave their
/// fields empty; `error` names the stage that stopped the pipeline.
struct DatasetResult {
  std::string dataset_id;
  std::filesystem::path input;
  std::optional<SeriesHeader> header;
  std::optional<Roi> roi;
  std::optional<MagnitudeSeries> magnitude;
  std::optional<correction::BackgroundModel> background;
  bool background_fallback = false;
  std::optional<flow::FlowCurve> flow;
  double cardiac_hz = 0.0;
  std::vector<resp::Ccfc> cycles;
  std::vector<resp::DiffResult> diffs;
  std::optional<Signal1D> belt;
  std::string resp_skipped;  // reason, when resp analysis did not run
  std::optional<StageError> error;
  std::vector<StageTiming> timings;

  bool ok() const { return !error.has_value(); }
};

struct RespOutcome {
  double cardiac_hz = 0.0;
  std::vector<resp::Ccfc> cycles;
  std::vector<resp::DiffResult> diffs;  // one per parameter, in kAllParameters order
};

/// Cardiac frequency from the flow spectrum, cycle segmentation, then the
/// delay sweep for every parameter.
RespOutcome analyze_respiration(const flow::FlowCurve& flow, const Signal1D& belt, const RespConfig& config,
                                signal::Band cardiac_band);

/// Flow rate against time; one polyline point per sample.
std::string flow_plot_svg(const Signal1D& flow, FlowUnit unit);
/// Average Ex and In cycle curves, labeled at the MeanFlow delay (else the
/// first result's delay), over normalized cycle phase.
std::string ccfc_overlay_svg(const std::vector<resp::Ccfc>& cycles, const Signal1D& belt,
                             const std::vector<resp::DiffResult>& diffs, std::size_t n_points);
/// Diff against delay for one parameter.
std::string diff_plot_svg(const std::string& parameter, const std::vector<double>& delay_s,
                          const std::vector<double>& diff_percent);

/// Runs every stage on a series already in memory. `belt` is the belt
/// recording; without it the resp stage is skipped unless the config names
/// a resp file.
DatasetResult run_pipeline(const ingest::SeriesPair& series, const std::optional<Signal1D>& belt,
                           const PipelineConfig& config, const std::string& dataset_id = "dataset");

/// Ingests `config.input` (.rtp or DICOM) and runs every stage. The belt is
/// resp.resp_file, else `<input stem>.resp.csv` beside the input when present.
DatasetResult run_dataset(const PipelineConfig& config, const std::string& dataset_id);

/// Writes results.tsv, flow.csv, diff_curves.csv, masks/, plots/ and
/// manifest.json for whatever stages completed.
void write_artifacts(const DatasetResult& result, const PipelineConfig& config, const std::filesystem::path& dir);

/// Input paths from a batch list file: one per line, blank lines and
/// '#' comments ignored, relative paths resolved against the list's
/// directory. Throws FileNotFound.
std::vector<std::filesystem::path> read_batch_list(const std::filesystem::path& list_file);

/// Unique dataset ids from the input file stems, in input order.
std::vector<std::string> dataset_ids(const std::vector<std::filesystem::path>& inputs);

/// Processes each input with up to config.jobs workers. With
/// `dataset_artifacts` each dataset gets its own subdirectory of
/// config.output_dir; the combined results.tsv and manifest.json list the
/// datasets in input order. Returns results in input order.
std::vector<DatasetResult> run_batch(const PipelineConfig& config, const std::vector<std::filesystem::path>& inputs,
                                     bool dataset_artifacts = true);

}  // namespace rtpc::app
