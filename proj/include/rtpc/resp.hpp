#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "rtpc/core.hpp"
#include "rtpc/flow.hpp"

namespace rtpc::resp {

struct CycleParams {
  double amplitude = 0.0;      // mL/min, max - min of the cycle samples
  double mean_flow = 0.0;      // mL/min
  double stroke_volume = 0.0;  // mL
  double period = 0.0;         // s
};

/// One cardiac cycle flow curve: frames [start_idx, end_idx] of the flow
/// curve, from one systolic peak to the next. `samples` includes both end
/// frames. The parameters use the peak times refined to sub-frame precision
/// (start_time_s, end_time_s), so `params.period` can differ slightly from
/// `period_s`, which counts whole frames.
struct Ccfc {
  std::size_t start_idx = 0;
  std::size_t end_idx = 0;
  double start_time_s = 0.0;
  double end_time_s = 0.0;
  double frame_period_s = 0.0;
  double t0_s = 0.0;
  std::vector<double> samples;
  double period_s = 0.0;
  CycleParams params;

  double frame_time(std::size_t idx) const { return t0_s + static_cast<double>(idx) * frame_period_s; }
};

enum class Parameter { Amplitude, MeanFlow, StrokeVolume, CardiacPeriod };
inline constexpr Parameter kAllParameters[] = {Parameter::Amplitude, Parameter::MeanFlow, Parameter::StrokeVolume,
                                               Parameter::CardiacPeriod};
std::string_view to_string(Parameter p);
double parameter_value(const Ccfc& c, Parameter p);

enum class Label { Ex, In, Unlabeled };
std::string_view to_string(Label l);

enum class Statistic { Mean, Median };
std::string_view to_string(Statistic s);
Statistic parse_statistic(std::string_view name);

/// Throws TooFewCycles (< 3 complete cycles).
std::vector<Ccfc> segment_cycles(const flow::FlowCurve& flow, double cardiac_hz);

/// Belt values at the flow frame times. Throws SpanMismatch.
Signal1D resample_resp(const Signal1D& belt, const flow::FlowCurve& flow);

/// 5% of the RMS time derivative of the belt on the given time base.
double default_slope_epsilon(const Signal1D& belt_on_flow_timebase);

/// Labels each cycle by the least-squares slope of belt(t - delay) over the
/// cycle's frame times: rising is In, falling is Ex, |slope| <= epsilon is
/// Unlabeled. The belt is shifted, not wrapped: a cycle whose shifted span
/// the belt does not cover is Unlabeled.
std::vector<Label> label_cycles(const std::vector<Ccfc>& cycles, const Signal1D& belt, double delay_s,
                                double slope_epsilon);

/// Pointwise mean of the cycles resampled to n_points. Throws EmptySubset.
std::vector<double> average_ccfc(const std::vector<const Ccfc*>& subset, std::size_t n_points = 32);
std::vector<double> average_ccfc(const std::vector<Ccfc>& subset, std::size_t n_points = 32);

/// 200 (ex - in) / (|ex| + |in|), or 0 when both are 0.
double relative_difference_percent(double ex, double in);

struct DiffPoint {
  double diff_percent = 0.0;
  double absolute_difference = 0.0;  // ex - in, in the parameter's unit
  double ex_value = 0.0;
  double in_value = 0.0;
  std::size_t n_ex = 0;
  std::size_t n_in = 0;
};

/// Diff from already labeled cycles. Throws InsufficientCycles.
DiffPoint diff_from_labels(const std::vector<Ccfc>& cycles, const std::vector<Label>& labels, Parameter parameter,
                           std::size_t min_cycles, Statistic statistic = Statistic::Mean);

DiffPoint diff_ex_in(const std::vector<Ccfc>& cycles, const Signal1D& belt, Parameter parameter, double delay_s,
                     double slope_epsilon, std::size_t min_cycles, Statistic statistic = Statistic::Mean);

enum class Selection { SignedMax, AbsMax };
std::string_view to_string(Selection s);
Selection parse_selection(std::string_view name);

struct SweepOptions {
  double grid_step_s = 0.0;  // 0 means one frame period
  double grid_origin_s = 0.0;
  std::size_t min_cycles = 3;
  double slope_epsilon = -1.0;  // negative means default_slope_epsilon
  Statistic statistic = Statistic::Mean;
  Selection selection = Selection::SignedMax;
};

struct CurvePoint {
  double delay_s = 0.0;
  bool valid = false;
  DiffPoint diff;
};

struct DiffResult {
  Parameter parameter = Parameter::MeanFlow;
  double intensity_percent = 0.0;
  double delay_s = 0.0;
  double absolute_difference = 0.0;
  std::size_t n_ex = 0;
  std::size_t n_in = 0;
  double resp_period_s = 0.0;
  double slope_epsilon = 0.0;
  std::vector<CurvePoint> curve;
};

/// Respiratory period from the belt spectrum over (0.1, 0.5) Hz. Throws NoRespPeak.
double estimate_resp_period_s(const Signal1D& belt);

/// default_slope_epsilon of the belt sampled at the frame times spanned by
/// the cycles. Throws NoValidDelay when there are no cycles.
double cycle_span_slope_epsilon(const std::vector<Ccfc>& cycles, const Signal1D& belt, double frame_period_s);

/// Evaluates Diff at origin + k * step for every k with k * step < T_r and
/// keeps the maximum (signed, or absolute with Selection::AbsMax). Ties go
/// to the smallest delay. Grid points with too few cycles are skipped.
/// Throws NoValidDelay and NoRespPeak.
DiffResult sweep_delay(const std::vector<Ccfc>& cycles, const Signal1D& belt, double frame_period_s,
                       Parameter parameter, const SweepOptions& options = {});

}  // namespace rtpc::resp
