#include "rtpc/resp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rtpc/error.hpp"
#include "rtpc/signal.hpp"

namespace rtpc::resp {

std::string_view to_string(Parameter p) {
  switch (p) {
    case Parameter::Amplitude: return "Amplitude";
    case Parameter::MeanFlow: return "MeanFlow";
    case Parameter::StrokeVolume: return "StrokeVolume";
    case Parameter::CardiacPeriod: return "CardiacPeriod";
  }
  return "?";
}

std::string_view to_string(Label l) {
  switch (l) {
    case Label::Ex: return "Ex";
    case Label::In: return "In";
    case Label::Unlabeled: return "Unlabeled";
  }
  return "?";
}

std::string_view to_string(Statistic s) { return s == Statistic::Mean ? "mean" : "median"; }

Statistic parse_statistic(std::string_view name) {
  if (name == "mean") return Statistic::Mean;
  if (name == "median") return Statistic::Median;
  fail(ErrorCode::ConfigInvalid, "statistic must be 'mean' or 'median', got '" + std::string(name) + "'");
}

std::string_view to_string(Selection s) { return s == Selection::SignedMax ? "signed_max" : "abs_max"; }

Selection parse_selection(std::string_view name) {
  if (name == "signed_max") return Selection::SignedMax;
  if (name == "abs_max") return Selection::AbsMax;
  fail(ErrorCode::ConfigInvalid, "selection must be 'signed_max' or 'abs_max', got '" + std::string(name) + "'");
}

double parameter_value(const Ccfc& c, Parameter p) {
  switch (p) {
    case Parameter::Amplitude: return c.params.amplitude;
    case Parameter::MeanFlow: return c.params.mean_flow;
    case Parameter::StrokeVolume: return c.params.stroke_volume;
    case Parameter::CardiacPeriod: return c.params.period;
  }
  return 0.0;
}

std::vector<Ccfc> segment_cycles(const flow::FlowCurve& flow, double cardiac_hz) {
  if (!(cardiac_hz > 0.0)) fail(ErrorCode::InvalidArgument, "cardiac frequency must be > 0");
  const Signal1D& q = flow.signal;
  const double dt = q.sample_period_s();
  const auto peaks = signal::detect_peaks(q, 0.6 / cardiac_hz, 0.3);
  if (peaks.size() < 4)
    fail(ErrorCode::TooFewCycles, "found " + std::to_string(peaks.size() < 2 ? 0 : peaks.size() - 1) +
                                      " complete cycles, need at least 3");
  const auto x = q.samples();
  std::vector<double> refined(peaks.size());
  for (std::size_t k = 0; k < peaks.size(); ++k) {
    const std::size_t i = peaks[k];
    const double offset = (i > 0 && i + 1 < x.size()) ? signal::parabolic_offset(x[i - 1], x[i], x[i + 1]) : 0.0;
    refined[k] = q.time(i) + offset * dt;
  }
  std::vector<Ccfc> cycles;
  cycles.reserve(peaks.size() - 1);
  for (std::size_t k = 0; k + 1 < peaks.size(); ++k) {
    Ccfc c;
    c.start_idx = peaks[k];
    c.end_idx = peaks[k + 1];
    c.frame_period_s = dt;
    c.t0_s = q.t0_s();
    c.start_time_s = refined[k];
    c.end_time_s = refined[k + 1];
    c.samples.assign(x.begin() + static_cast<long>(c.start_idx), x.begin() + static_cast<long>(c.end_idx) + 1);
    c.period_s = static_cast<double>(c.end_idx - c.start_idx) * dt;
    const auto [lo, hi] = std::minmax_element(c.samples.begin(), c.samples.end());
    c.params.amplitude = *hi - *lo;
    c.params.period = c.end_time_s - c.start_time_s;
    c.params.stroke_volume = flow::integrate_ml(q, c.start_time_s, c.end_time_s);
    c.params.mean_flow = c.params.stroke_volume * 60.0 / c.params.period;
    cycles.push_back(std::move(c));
  }
  return cycles;
}

Signal1D resample_resp(const Signal1D& belt, const flow::FlowCurve& flow) {
  const Signal1D& q = flow.signal;
  if (!belt.covers(q.t0_s()) || !belt.covers(q.end_time()))
    fail(ErrorCode::SpanMismatch, "respiratory signal does not cover the flow time span");
  std::vector<double> out(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) out[i] = belt.value_at(q.time(i));
  return Signal1D(std::move(out), q.sample_period_s(), q.t0_s());
}

double default_slope_epsilon(const Signal1D& belt) {
  const auto x = belt.samples();
  std::vector<double> sq(x.size() - 1);
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    const double d = (x[i + 1] - x[i]) / belt.sample_period_s();
    sq[i] = d * d;
  }
  return 0.05 * std::sqrt(pairwise_sum(sq) / static_cast<double>(sq.size()));
}

std::vector<Label> label_cycles(const std::vector<Ccfc>& cycles, const Signal1D& belt, double delay_s,
                                double slope_epsilon) {
  if (!(delay_s >= 0.0)) fail(ErrorCode::InvalidArgument, "delay must be >= 0");
  std::vector<Label> labels;
  labels.reserve(cycles.size());
  for (const Ccfc& c : cycles) {
    const std::size_t n = c.end_idx - c.start_idx + 1;
    bool covered = true;
    double t_mean = 0.0, y_mean = 0.0;
    std::vector<double> ts(n), ys(n);
    for (std::size_t j = 0; j < n; ++j) {
      ts[j] = c.frame_time(c.start_idx + j);
      const double shifted = ts[j] - delay_s;
      if (!belt.covers(shifted)) {
        covered = false;
        break;
      }
      ys[j] = belt.value_at(shifted);
      t_mean += ts[j];
      y_mean += ys[j];
    }
    if (!covered || n < 2) {
      labels.push_back(Label::Unlabeled);
      continue;
    }
    t_mean /= static_cast<double>(n);
    y_mean /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      sxy += (ts[j] - t_mean) * (ys[j] - y_mean);
      sxx += (ts[j] - t_mean) * (ts[j] - t_mean);
    }
    const double slope = sxy / sxx;
    labels.push_back(slope > slope_epsilon ? Label::In : (slope < -slope_epsilon ? Label::Ex : Label::Unlabeled));
  }
  return labels;
}

std::vector<double> average_ccfc(const std::vector<const Ccfc*>& subset, std::size_t n_points) {
  if (subset.empty()) fail(ErrorCode::EmptySubset, "no cycles to average");
  std::vector<std::vector<double>> resampled;
  resampled.reserve(subset.size());
  for (const Ccfc* c : subset) resampled.push_back(signal::resample_linear(c->samples, n_points));
  std::vector<double> out(n_points);
  std::vector<double> column(subset.size());
  for (std::size_t k = 0; k < n_points; ++k) {
    for (std::size_t i = 0; i < resampled.size(); ++i) column[i] = resampled[i][k];
    out[k] = pairwise_sum(column) / static_cast<double>(column.size());
  }
  return out;
}

std::vector<double> average_ccfc(const std::vector<Ccfc>& subset, std::size_t n_points) {
  std::vector<const Ccfc*> ptrs;
  ptrs.reserve(subset.size());
  for (const auto& c : subset) ptrs.push_back(&c);
  return average_ccfc(ptrs, n_points);
}

double relative_difference_percent(double ex, double in) {
  const double denom = std::abs(ex) + std::abs(in);
  if (denom == 0.0) return 0.0;
  return 200.0 * (ex - in) / denom;
}

namespace {

double summarize(std::vector<double> v, Statistic s) {
  if (s == Statistic::Mean) return pairwise_sum(v) / static_cast<double>(v.size());
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

}  // namespace

DiffPoint diff_from_labels(const std::vector<Ccfc>& cycles, const std::vector<Label>& labels, Parameter parameter,
                           std::size_t min_cycles, Statistic statistic) {
  if (labels.size() != cycles.size()) fail(ErrorCode::InvalidArgument, "one label per cycle required");
  std::vector<double> ex, in;
  for (std::size_t i = 0; i < cycles.size(); ++i) {
    if (labels[i] == Label::Ex) ex.push_back(parameter_value(cycles[i], parameter));
    if (labels[i] == Label::In) in.push_back(parameter_value(cycles[i], parameter));
  }
  if (ex.size() < min_cycles || in.size() < min_cycles || ex.empty() || in.empty())
    fail(ErrorCode::InsufficientCycles, std::to_string(ex.size()) + " Ex / " + std::to_string(in.size()) +
                                            " In cycles, need " + std::to_string(min_cycles) + " of each");
  DiffPoint d;
  d.n_ex = ex.size();
  d.n_in = in.size();
  d.ex_value = summarize(std::move(ex), statistic);
  d.in_value = summarize(std::move(in), statistic);
  d.absolute_difference = d.ex_value - d.in_value;
  d.diff_percent = relative_difference_percent(d.ex_value, d.in_value);
  return d;
}

DiffPoint diff_ex_in(const std::vector<Ccfc>& cycles, const Signal1D& belt, Parameter parameter, double delay_s,
                     double slope_epsilon, std::size_t min_cycles, Statistic statistic) {
  return diff_from_labels(cycles, label_cycles(cycles, belt, delay_s, slope_epsilon), parameter, min_cycles, statistic);
}

double estimate_resp_period_s(const Signal1D& belt) {
  const signal::Spectrum s = signal::fft_magnitude(belt);
  std::vector<double> in_band;
  for (std::size_t k = 0; k < s.bin_amplitudes.size(); ++k) {
    const double f = s.frequency(k);
    if (f >= signal::kRespiratoryBand.lo_hz && f <= signal::kRespiratoryBand.hi_hz) in_band.push_back(s.bin_amplitudes[k]);
  }
  if (in_band.empty()) fail(ErrorCode::NoRespPeak, "belt spectrum has no bin in the respiratory band");
  const double peak = *std::max_element(in_band.begin(), in_band.end());
  if (!(peak > 0.0)) fail(ErrorCode::NoRespPeak, "belt signal carries no respiratory component");
  const double f = signal::estimate_fundamental_hz(s, signal::kRespiratoryBand);
  if (!(f > 0.0)) fail(ErrorCode::NoRespPeak, "respiratory frequency estimate is not positive");
  return 1.0 / f;
}

double cycle_span_slope_epsilon(const std::vector<Ccfc>& cycles, const Signal1D& belt, double frame_period_s) {
  if (cycles.empty()) fail(ErrorCode::NoValidDelay, "no cycles");
  const double t_first = cycles.front().frame_time(cycles.front().start_idx);
  const double t_last = cycles.back().frame_time(cycles.back().end_idx);
  const auto n = static_cast<std::size_t>(std::floor((t_last - t_first) / frame_period_s + 1e-9)) + 1;
  std::vector<double> on_flow(n);
  for (std::size_t i = 0; i < n; ++i) on_flow[i] = belt.value_at(t_first + static_cast<double>(i) * frame_period_s);
  return default_slope_epsilon(Signal1D(std::move(on_flow), frame_period_s, t_first));
}

DiffResult sweep_delay(const std::vector<Ccfc>& cycles, const Signal1D& belt, double frame_period_s,
                       Parameter parameter, const SweepOptions& options) {
  const double step = options.grid_step_s > 0.0 ? options.grid_step_s : frame_period_s;
  if (!(step > 0.0)) fail(ErrorCode::InvalidArgument, "grid step must be > 0");
  if (!(options.grid_origin_s >= 0.0)) fail(ErrorCode::InvalidArgument, "grid origin must be >= 0");
  DiffResult result;
  result.parameter = parameter;
  result.resp_period_s = estimate_resp_period_s(belt);

  const double epsilon =
      options.slope_epsilon >= 0.0 ? options.slope_epsilon : cycle_span_slope_epsilon(cycles, belt, frame_period_s);
  result.slope_epsilon = epsilon;

  bool found = false;
  for (std::size_t k = 0; static_cast<double>(k) * step < result.resp_period_s - 1e-9 * step; ++k) {
    CurvePoint p;
    p.delay_s = options.grid_origin_s + static_cast<double>(k) * step;
    try {
      p.diff = diff_ex_in(cycles, belt, parameter, p.delay_s, epsilon, options.min_cycles, options.statistic);
      p.valid = true;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InsufficientCycles) throw;
    }
    if (p.valid) {
      const double score = options.selection == Selection::SignedMax ? p.diff.diff_percent : std::abs(p.diff.diff_percent);
      const double best = options.selection == Selection::SignedMax ? result.intensity_percent
                                                                   : std::abs(result.intensity_percent);
      if (!found || score > best) {
        found = true;
        result.intensity_percent = p.diff.diff_percent;
        result.delay_s = p.delay_s;
        result.absolute_difference = p.diff.absolute_difference;
        result.n_ex = p.diff.n_ex;
        result.n_in = p.diff.n_in;
      }
    }
    result.curve.push_back(p);
  }
  if (!found) fail(ErrorCode::NoValidDelay, "every delay on the grid had too few Ex or In cycles");
  return result;
}

}  // namespace rtpc::resp
