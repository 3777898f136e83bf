#include "rtpc/flow.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rtpc/error.hpp"

namespace rtpc::flow {

FlowCurve compute_flow_curve(const VelocitySeries& vel, const Roi& roi) {
  const SeriesHeader& h = vel.header();
  roi.check_geometry(h);
  const double area = pixel_area_mm2(h);
  const std::size_t npix = h.frame_pixels();
  std::vector<double> q(h.n_frames);
  FlowCurve out{Signal1D(std::vector<double>(h.n_frames), h.frame_period_s()), {}, {}, {}, {}};
  out.roi_area_mm2.resize(h.n_frames);
  out.max_velocity_cm_s.resize(h.n_frames);
  out.max_signed_velocity_cm_s.resize(h.n_frames);
  out.min_signed_velocity_cm_s.resize(h.n_frames);
  std::vector<double> values;
  for (std::size_t t = 0; t < h.n_frames; ++t) {
    const Mask& m = roi.mask_for_frame(t);
    const auto f = vel.frame(t);
    values.clear();
    for (std::size_t i = 0; i < npix; ++i) {
      if (m[i]) values.push_back(f[i]);
    }
    if (values.empty()) fail(ErrorCode::EmptyRoiFrame, "frame " + std::to_string(t) + " has an empty ROI");
    q[t] = pairwise_sum(values) * area * kMlPerMinPerCmSMm2;
    out.roi_area_mm2[t] = static_cast<double>(values.size()) * area;
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    out.max_signed_velocity_cm_s[t] = *hi;
    out.min_signed_velocity_cm_s[t] = *lo;
    out.max_velocity_cm_s[t] = std::max(std::abs(*lo), std::abs(*hi));
  }
  out.signal = Signal1D(std::move(q), h.frame_period_s());
  return out;
}

double stroke_volume(const FlowCurve& flow, std::size_t start_idx, std::size_t end_idx) {
  if (!(start_idx < end_idx && end_idx < flow.size()))
    fail(ErrorCode::BadRange, "cycle [" + std::to_string(start_idx) + ", " + std::to_string(end_idx) +
                                  "] outside a curve of length " + std::to_string(flow.size()));
  const auto q = flow.signal.samples();
  double acc = 0.0;
  for (std::size_t i = start_idx; i < end_idx; ++i) acc += 0.5 * (q[i] + q[i + 1]);
  return acc * flow.signal.sample_period_s() / 60.0;
}

double integrate_ml(const Signal1D& flow_ml_min, double t_begin_s, double t_end_s) {
  if (!(t_begin_s <= t_end_s)) fail(ErrorCode::BadRange, "integration bounds out of order");
  if (!flow_ml_min.covers(t_begin_s) || !flow_ml_min.covers(t_end_s))
    fail(ErrorCode::SpanMismatch, "integration bounds outside the flow curve");
  const double dt = flow_ml_min.sample_period_s();
  const double t0 = flow_ml_min.t0_s();
  const std::size_t last = flow_ml_min.size() - 1;
  auto knot_after = [&](double t) {
    const double pos = (t - t0) / dt;
    return std::min(static_cast<std::size_t>(std::floor(std::max(pos, 0.0))) + 1, last);
  };
  double acc = 0.0;
  double a = t_begin_s;
  double va = flow_ml_min.value_at(a);
  std::size_t k = knot_after(a);
  while (a < t_end_s) {
    const double b = std::min(t_end_s, flow_ml_min.time(k));
    if (b > a) {
      const double vb = flow_ml_min.value_at(b);
      acc += 0.5 * (va + vb) * (b - a);
      a = b;
      va = vb;
    }
    if (k == last) {
      if (a < t_end_s) a = t_end_s;
      break;
    }
    ++k;
  }
  return acc / 60.0;
}

}  // namespace rtpc::flow
