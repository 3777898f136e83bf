#include "rtpc/app/export.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "rtpc/app/csv.hpp"
#include "rtpc/version.hpp"

namespace rtpc::app {

namespace {

std::string num(double v) { return format_number(v); }
std::string num(std::size_t v) { return std::to_string(v); }

std::string flow_unit_name(FlowUnit unit) { return unit == FlowUnit::MlPerMin ? "ml_min" : "ml_s"; }

double flow_scale(FlowUnit unit) { return unit == FlowUnit::MlPerMin ? 1.0 : 1.0 / 60.0; }

std::string parameter_unit(resp::Parameter p, FlowUnit unit) {
  switch (p) {
    case resp::Parameter::Amplitude:
    case resp::Parameter::MeanFlow: return flow_unit_name(unit);
    case resp::Parameter::StrokeVolume: return "ml";
    case resp::Parameter::CardiacPeriod: return "s";
  }
  return "";
}

double parameter_scale(resp::Parameter p, FlowUnit unit) {
  return (p == resp::Parameter::Amplitude || p == resp::Parameter::MeanFlow) ? flow_scale(unit) : 1.0;
}

// Tabs and newlines would break the row structure.
std::string clean(std::string s) {
  std::replace_if(s.begin(), s.end(), [](char c) { return c == '\t' || c == '\n' || c == '\r'; }, ' ');
  return s;
}

}  // namespace

ResultsTable::ResultsTable(std::string config_hash) : config_hash_(std::move(config_hash)) {}

void ResultsTable::add(const DatasetResult& r, FlowUnit unit) {
  ++groups_;
  auto row = [&](std::string record, std::string name, std::string value, std::string unit_name = "") {
    ResultRow out;
    out.dataset = r.dataset_id;
    out.record = std::move(record);
    out.name = std::move(name);
    out.value = std::move(value);
    out.unit = std::move(unit_name);
    rows_.push_back(std::move(out));
    return &rows_.back();  // valid until the next push
  };

  row("status", r.ok() ? "ok" : "error", r.ok() ? "0" : "1")->note = clean(r.input.filename().string());

  if (r.header) {
    const auto& h = *r.header;
    row("header", "n_frames", num(h.n_frames));
    row("header", "rows", num(h.rows));
    row("header", "cols", num(h.cols));
    row("header", "pixel_spacing_row", num(h.pixel_spacing_mm.row_mm), "mm");
    row("header", "pixel_spacing_col", num(h.pixel_spacing_mm.col_mm), "mm");
    row("header", "frame_duration", num(h.frame_duration_ms), "ms");
    row("header", "venc", num(h.venc_cm_s), "cm_s");
  }

  if (r.roi && r.header) {
    const double px = pixel_area_mm2(*r.header);
    std::vector<double> areas;
    for (std::size_t t = 0; t < r.header->n_frames; ++t)
      areas.push_back(static_cast<double>(r.roi->mask_for_frame(t).count()) * px);
    const auto [lo, hi] = std::minmax_element(areas.begin(), areas.end());
    row("roi", "kind", r.roi->kind() == RoiKind::Static ? "static" : "dynamic");
    row("roi", "area_mean", num(pairwise_sum(areas) / static_cast<double>(areas.size())), "mm2");
    row("roi", "area_min", num(*lo), "mm2");
    row("roi", "area_max", num(*hi), "mm2");
  }

  if (r.background) {
    const auto& b = *r.background;
    auto* order = row("background", "order", std::string(correction::to_string(b.order)));
    if (r.background_fallback) order->note = "fallback selection";
    row("background", "a", num(b.a), "cm_s");
    row("background", "b", num(b.b), "cm_s_per_px");
    row("background", "c", num(b.c), "cm_s_per_px");
    row("background", "residual_rms", num(b.residual_rms_cm_s), "cm_s");
    row("background", "stationary_px", num(b.stationary_mask.count()));
  }

  if (r.flow) {
    const auto q = r.flow->signal.samples();
    const double s = flow_scale(unit);
    const auto [lo, hi] = std::minmax_element(q.begin(), q.end());
    const auto& vmax = r.flow->max_velocity_cm_s;
    const auto& vpos = r.flow->max_signed_velocity_cm_s;
    const auto& vneg = r.flow->min_signed_velocity_cm_s;
    row("flow", "mean_flow", num(pairwise_sum(q) / static_cast<double>(q.size()) * s), flow_unit_name(unit));
    row("flow", "max_flow", num(*hi * s), flow_unit_name(unit));
    row("flow", "min_flow", num(*lo * s), flow_unit_name(unit));
    row("flow", "max_velocity", num(*std::max_element(vmax.begin(), vmax.end())), "cm_s");
    row("flow", "max_signed_velocity", num(*std::max_element(vpos.begin(), vpos.end())), "cm_s");
    row("flow", "min_signed_velocity", num(*std::min_element(vneg.begin(), vneg.end())), "cm_s");
    if (r.cardiac_hz > 0.0) row("flow", "cardiac_frequency", num(r.cardiac_hz), "hz");
  }

  if (!r.cycles.empty()) {
    row("cycles", "count", num(r.cycles.size()));
    for (auto p : resp::kAllParameters) {
      std::vector<double> v;
      for (const auto& c : r.cycles) v.push_back(resp::parameter_value(c, p) * parameter_scale(p, unit));
      const double mean = pairwise_sum(v) / static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
      const std::string name(resp::to_string(p));
      row("cycles", name + "_mean", num(mean), parameter_unit(p, unit));
      row("cycles", name + "_std", num(sd), parameter_unit(p, unit));
    }
  }

  for (const auto& d : r.diffs) {
    const std::string name(resp::to_string(d.parameter));
    auto* pct = row("diff", name, num(d.intensity_percent), "percent");
    pct->delay_s = num(d.delay_s);
    pct->n_ex = num(d.n_ex);
    pct->n_in = num(d.n_in);
    pct->note = "resp_period_s=" + num(d.resp_period_s);
    const ResultRow shared = *pct;
    auto* abs = row("diff_abs", name, num(d.absolute_difference * parameter_scale(d.parameter, unit)),
                    parameter_unit(d.parameter, unit));
    abs->delay_s = shared.delay_s;
    abs->n_ex = shared.n_ex;
    abs->n_in = shared.n_in;
  }

  if (!r.resp_skipped.empty()) row("resp", "skipped", "")->note = clean(r.resp_skipped);

  if (r.error) {
    auto* e = row("error", r.error->stage, std::string(to_string(r.error->code)));
    e->note = clean(r.error->message);
  }
}

std::string ResultsTable::to_tsv() const {
  std::ostringstream out;
  out << "# rtpc results\n";
  out << "# version: " << kVersion << '\n';
  out << "# config_hash: " << config_hash_ << '\n';
  out << "# datasets: " << groups_ << '\n';
  out << kResultsColumns << '\n';
  for (const auto& r : rows_) {
    out << r.dataset << '\t' << r.record << '\t' << r.name << '\t' << r.value << '\t' << r.unit << '\t' << r.delay_s
        << '\t' << r.n_ex << '\t' << r.n_in << '\t' << r.note << '\n';
  }
  return out.str();
}

}  // namespace rtpc::app
