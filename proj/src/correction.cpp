#include "rtpc/correction.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "rtpc/error.hpp"
#include "rtpc/signal.hpp"

namespace rtpc::correction {

std::string_view to_string(BackgroundOrder order) {
  return order == BackgroundOrder::Constant ? "Constant" : "Plane";
}

BackgroundOrder parse_background_order(std::string_view name) {
  if (name == "Constant" || name == "constant") return BackgroundOrder::Constant;
  if (name == "Plane" || name == "plane") return BackgroundOrder::Plane;
  fail(ErrorCode::ConfigInvalid, "unknown background order '" + std::string(name) + "'");
}

namespace {

struct PixelStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

PixelStats temporal_stats(std::span<const double> samples, std::size_t n_frames, std::size_t npix) {
  PixelStats s{std::vector<double>(npix), std::vector<double>(npix)};
  std::vector<double> trace(n_frames);
  for (std::size_t i = 0; i < npix; ++i) {
    for (std::size_t t = 0; t < n_frames; ++t) trace[t] = samples[t * npix + i];
    const double mean = pairwise_sum(trace) / static_cast<double>(n_frames);
    for (double& v : trace) v = (v - mean) * (v - mean);
    s.mean[i] = mean;
    s.stddev[i] = std::sqrt(pairwise_sum(trace) / static_cast<double>(n_frames));
  }
  return s;
}

double percentile(std::vector<double> v, double pct) {
  std::sort(v.begin(), v.end());
  const double pos = std::clamp(pct, 0.0, 100.0) / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

Mask dilate(const Mask& m, double radius_mm, const PixelSpacing& spacing) {
  const long reach_r = static_cast<long>(std::floor(radius_mm / spacing.row_mm));
  const long reach_c = static_cast<long>(std::floor(radius_mm / spacing.col_mm));
  std::vector<std::pair<long, long>> offsets;
  for (long dr = -reach_r; dr <= reach_r; ++dr) {
    for (long dc = -reach_c; dc <= reach_c; ++dc) {
      const double y = static_cast<double>(dr) * spacing.row_mm;
      const double x = static_cast<double>(dc) * spacing.col_mm;
      if (x * x + y * y <= radius_mm * radius_mm) offsets.emplace_back(dr, dc);
    }
  }
  Mask out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (!m.at(r, c)) continue;
      for (const auto& [dr, dc] : offsets) {
        const long rr = static_cast<long>(r) + dr;
        const long cc = static_cast<long>(c) + dc;
        if (out.in_bounds(rr, cc)) out.set(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc));
      }
    }
  }
  return out;
}

double median_inplace(std::vector<double>& v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<long>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<long>(mid)));
  return m;
}

}  // namespace

Mask select_stationary_tissue(const VelocitySeries& vel, const MagnitudeSeries& mag, const Roi& roi,
                              const StationaryParams& params) {
  const SeriesHeader& h = vel.header();
  roi.check_geometry(h);
  if (!h.same_geometry(mag.header())) fail(ErrorCode::GeometryMismatch, "magnitude and velocity differ in geometry");
  if (!(params.ring_mm > 0.0)) fail(ErrorCode::InvalidArgument, "ring_mm must be > 0");

  const Mask target = roi.union_mask();
  const Mask band = dilate(target, params.ring_mm, h.pixel_spacing_mm).minus(target);
  if (band.empty()) fail(ErrorCode::NoStationaryPixels, "the ring around the ROI is empty");

  const std::size_t npix = h.frame_pixels();
  const PixelStats v = temporal_stats(vel.samples(), h.n_frames, npix);
  const PixelStats m = temporal_stats(mag.samples(), h.n_frames, npix);
  std::vector<double> band_magnitudes;
  for (std::size_t i = 0; i < npix; ++i) {
    if (band[i]) band_magnitudes.push_back(m.mean[i]);
  }
  const double mag_floor = percentile(band_magnitudes, params.mag_percentile);

  Mask out(h.rows, h.cols);
  for (std::size_t i = 0; i < npix; ++i) {
    if (band[i] && v.stddev[i] < params.std_threshold_cm_s && m.mean[i] >= mag_floor) out.set_index(i);
  }
  if (out.empty()) fail(ErrorCode::NoStationaryPixels, "no band pixel passes the phase and amplitude criteria");
  return out;
}

Mask low_std_pixels(const VelocitySeries& vel, const Roi& roi, double std_threshold_cm_s) {
  const SeriesHeader& h = vel.header();
  roi.check_geometry(h);
  const Mask target = roi.union_mask();
  const PixelStats v = temporal_stats(vel.samples(), h.n_frames, h.frame_pixels());
  Mask out(h.rows, h.cols);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!target[i] && v.stddev[i] < std_threshold_cm_s) out.set_index(i);
  }
  if (out.empty()) fail(ErrorCode::NoStationaryPixels, "no low-variance pixel outside the ROI");
  return out;
}

BackgroundModel fit_background(const VelocitySeries& vel, const Mask& stationary, BackgroundOrder order) {
  const SeriesHeader& h = vel.header();
  if (stationary.rows() != h.rows || stationary.cols() != h.cols)
    fail(ErrorCode::GeometryMismatch, "stationary mask does not match the series");
  const std::size_t n = stationary.count();
  if (n == 0) fail(ErrorCode::NoStationaryPixels, "empty stationary mask");
  if (order == BackgroundOrder::Plane && n < 3) fail(ErrorCode::RankDeficient, "a plane needs at least 3 pixels");

  const std::size_t npix = h.frame_pixels();
  const PixelStats stats = temporal_stats(vel.samples(), h.n_frames, npix);
  std::vector<double> y, xs, ys;
  y.reserve(n);
  for (std::size_t i = 0; i < npix; ++i) {
    if (!stationary[i]) continue;
    y.push_back(stats.mean[i]);
    xs.push_back(static_cast<double>(i % h.cols));
    ys.push_back(static_cast<double>(i / h.cols));
  }

  BackgroundModel model;
  model.order = order;
  model.stationary_mask = stationary;
  if (order == BackgroundOrder::Constant) {
    model.a = pairwise_sum(y) / static_cast<double>(n);
  } else {
    const double x0 = pairwise_sum(xs) / static_cast<double>(n);
    const double y0 = pairwise_sum(ys) / static_cast<double>(n);
    Eigen::MatrixXd A(static_cast<Eigen::Index>(n), 3);
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) {
      const auto row = static_cast<Eigen::Index>(k);
      A(row, 0) = 1.0;
      A(row, 1) = xs[k] - x0;
      A(row, 2) = ys[k] - y0;
      rhs(row) = y[k];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    qr.setThreshold(1e-10);
    if (qr.rank() < 3) fail(ErrorCode::RankDeficient, "stationary pixels are collinear");
    const Eigen::Vector3d coef = qr.solve(rhs);
    model.b = coef(1);
    model.c = coef(2);
    model.a = coef(0) - model.b * x0 - model.c * y0;
  }
  std::vector<double> sq(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double r = y[k] - (model.a + model.b * xs[k] + model.c * ys[k]);
    sq[k] = r * r;
  }
  model.residual_rms_cm_s = std::sqrt(pairwise_sum(sq) / static_cast<double>(n));
  return model;
}

VelocitySeries apply_background(const VelocitySeries& vel, const BackgroundModel& model) {
  const SeriesHeader& h = vel.header();
  if (model.stationary_mask.rows() != h.rows || model.stationary_mask.cols() != h.cols)
    fail(ErrorCode::GeometryMismatch, "background model was fitted on a different geometry");
  std::vector<double> plane(h.frame_pixels());
  for (std::size_t r = 0; r < h.rows; ++r) {
    for (std::size_t c = 0; c < h.cols; ++c) plane[r * h.cols + c] = model.evaluate(r, c);
  }
  std::vector<double> out(vel.samples().begin(), vel.samples().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= plane[i % plane.size()];
  CorrectionState state = vel.state();
  state.background_corrected = true;
  return VelocitySeries(h, std::move(out), state);
}

VelocitySeries unalias(const VelocitySeries& vel, const Roi& roi, double venc_cm_s) {
  const SeriesHeader& h = vel.header();
  roi.check_geometry(h);
  if (!(venc_cm_s > 0.0)) fail(ErrorCode::InvalidArgument, "venc must be > 0");
  const double wrap = 2.0 * venc_cm_s;
  const std::size_t npix = h.frame_pixels();
  const std::size_t nt = h.n_frames;
  const Mask target = roi.union_mask();
  std::vector<double> out(vel.samples().begin(), vel.samples().end());

  // Temporal pass.
  for (std::size_t i = 0; i < npix; ++i) {
    if (!target[i]) continue;
    double prev = out[i];
    for (std::size_t t = 1; t < nt; ++t) {
      const double v = out[t * npix + i];
      long k = 0;
      while (v - static_cast<double>(k) * wrap - prev > venc_cm_s) ++k;
      while (v - static_cast<double>(k) * wrap - prev < -venc_cm_s) --k;
      const double corrected = k == 0 ? v : v - static_cast<double>(k) * wrap;
      out[t * npix + i] = corrected;
      prev = corrected;
    }
  }

  // Spatial pass against per-frame ROI medians.
  std::vector<double> medians(nt, 0.0);
  std::vector<double> scratch;
  for (std::size_t t = 0; t < nt; ++t) {
    const Mask& m = roi.mask_for_frame(t);
    scratch.clear();
    for (std::size_t i = 0; i < npix; ++i) {
      if (m[i]) scratch.push_back(out[t * npix + i]);
    }
    if (!scratch.empty()) medians[t] = median_inplace(scratch);
  }
  for (std::size_t i = 0; i < npix; ++i) {
    if (!target[i]) continue;
    std::map<long, std::size_t> votes;
    for (std::size_t t = 0; t < nt; ++t) {
      if (!roi.mask_for_frame(t)[i]) continue;
      const double d = out[t * npix + i] - medians[t];
      const long k = std::abs(d) > venc_cm_s ? std::lround(d / wrap) : 0;
      ++votes[k];
    }
    long best_k = 0;
    std::size_t best_votes = 0;
    for (const auto& [k, count] : votes) {
      if (count > best_votes || (count == best_votes && std::abs(k) < std::abs(best_k))) {
        best_k = k;
        best_votes = count;
      }
    }
    if (best_k == 0) continue;
    for (std::size_t t = 0; t < nt; ++t) out[t * npix + i] -= static_cast<double>(best_k) * wrap;
  }

  CorrectionState state = vel.state();
  state.unaliased = true;
  return VelocitySeries(h, std::move(out), state);
}

VelocitySeries denoise(const VelocitySeries& vel, const DenoiseMode& mode) {
  const SeriesHeader& h = vel.header();
  const std::size_t npix = h.frame_pixels();
  const auto in = vel.samples();
  std::vector<double> out(in.begin(), in.end());
  switch (mode.kind) {
    case DenoiseMode::Kind::None:
      return vel;
    case DenoiseMode::Kind::SpatialMedian3: {
      std::vector<double> window(9);
      for (std::size_t t = 0; t < h.n_frames; ++t) {
        const double* f = in.data() + t * npix;
        double* o = out.data() + t * npix;
        for (std::size_t r = 0; r < h.rows; ++r) {
          for (std::size_t c = 0; c < h.cols; ++c) {
            std::size_t k = 0;
            for (int dr = -1; dr <= 1; ++dr) {
              const long rr = std::clamp(static_cast<long>(r) + dr, 0L, static_cast<long>(h.rows) - 1);
              for (int dc = -1; dc <= 1; ++dc) {
                const long cc = std::clamp(static_cast<long>(c) + dc, 0L, static_cast<long>(h.cols) - 1);
                window[k++] = f[static_cast<std::size_t>(rr) * h.cols + static_cast<std::size_t>(cc)];
              }
            }
            std::nth_element(window.begin(), window.begin() + 4, window.end());
            o[r * h.cols + c] = window[4];
          }
        }
      }
      break;
    }
    case DenoiseMode::Kind::TemporalLowpass: {
      std::vector<double> trace(h.n_frames);
      signal::lowpass_taps(mode.cutoff_hz, 1.0 / h.frame_period_s(), 31);
      for (std::size_t i = 0; i < npix; ++i) {
        for (std::size_t t = 0; t < h.n_frames; ++t) trace[t] = in[t * npix + i];
        const Signal1D filtered = signal::lowpass(Signal1D(trace, h.frame_period_s()), mode.cutoff_hz);
        for (std::size_t t = 0; t < h.n_frames; ++t) out[t * npix + i] = filtered[t];
      }
      break;
    }
  }
  CorrectionState state = vel.state();
  state.denoised = true;
  return VelocitySeries(h, std::move(out), state);
}

}  // namespace rtpc::correction
