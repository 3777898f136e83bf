#pragma once

#include <cstddef>
#include <vector>

#include "rtpc/core.hpp"

namespace rtpc::flow {

/// Flow through the ROI per frame, mL/min, with the matching ROI areas and
/// velocity extremes.
struct FlowCurve {
  Signal1D signal;
  std::vector<double> roi_area_mm2;
  std::vector<double> max_velocity_cm_s;  // max |v| over the mask
  std::vector<double> max_signed_velocity_cm_s;
  std::vector<double> min_signed_velocity_cm_s;

  std::size_t size() const { return signal.size(); }
};

/// mL/min per (cm/s * mm^2): 10 mm/s * mm^2 = 10 mm^3/s, times 60 s/min / 1000 mm^3/mL.
inline constexpr double kMlPerMinPerCmSMm2 = 0.6;

/// Throws EmptyRoiFrame(t) and GeometryMismatch.
FlowCurve compute_flow_curve(const VelocitySeries& vel, const Roi& roi);

/// Signed trapezoidal integral of Q over frames [start, end], in mL.
/// Throws BadRange unless start < end < length.
double stroke_volume(const FlowCurve& flow, std::size_t start_idx, std::size_t end_idx);

/// Exact integral, in mL, of the piecewise-linear flow between two times
/// inside the curve's span. Throws SpanMismatch.
double integrate_ml(const Signal1D& flow_ml_min, double t_begin_s, double t_end_s);

}  // namespace rtpc::flow
