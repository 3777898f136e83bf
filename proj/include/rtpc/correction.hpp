#pragma once

#include <cstddef>

#include "rtpc/core.hpp"

namespace rtpc::correction {

enum class BackgroundOrder { Constant, Plane };

std::string_view to_string(BackgroundOrder order);
BackgroundOrder parse_background_order(std::string_view name);

/// v_hat(row, col) = a + b * col + c * row, in cm/s with b, c per pixel.
struct BackgroundModel {
  BackgroundOrder order = BackgroundOrder::Constant;
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  Mask stationary_mask;
  double residual_rms_cm_s = 0.0;

  double evaluate(std::size_t row, std::size_t col) const {
    return a + b * static_cast<double>(col) + c * static_cast<double>(row);
  }
};

struct StationaryParams {
  double ring_mm = 5.0;
  double std_threshold_cm_s = 0.3;
  double mag_percentile = 25.0;
};

/// Pixels within ring_mm of the ROI union (and outside it) whose velocity
/// temporal std is below the threshold and whose temporal-mean magnitude
/// reaches the given percentile of the band. Throws NoStationaryPixels.
Mask select_stationary_tissue(const VelocitySeries& vel, const MagnitudeSeries& mag, const Roi& roi,
                              const StationaryParams& params);

/// Fallback selection: every pixel outside the ROI union with temporal std
/// below the threshold. Throws NoStationaryPixels.
Mask low_std_pixels(const VelocitySeries& vel, const Roi& roi, double std_threshold_cm_s);

/// Least-squares fit of the temporal-mean velocity over the stationary pixels.
/// Throws RankDeficient (too few or collinear pixels for a plane),
/// NoStationaryPixels (empty mask) or GeometryMismatch.
BackgroundModel fit_background(const VelocitySeries& vel, const Mask& stationary, BackgroundOrder order);

/// Subtracts the model from every frame. Throws GeometryMismatch.
VelocitySeries apply_background(const VelocitySeries& vel, const BackgroundModel& model);

/// Temporal unwrapping of every ROI pixel: each sample is moved by the
/// multiple of 2 venc that brings it within venc of the corrected previous
/// sample. A spatial pass then shifts whole pixel traces by the multiple of
/// 2 venc that most frames vote for, each frame voting to bring the pixel
/// within venc of that frame's ROI median. Pixels outside the ROI are left
/// alone. Frame 0 is trusted.
VelocitySeries unalias(const VelocitySeries& vel, const Roi& roi, double venc_cm_s);

struct DenoiseMode {
  enum class Kind { None, SpatialMedian3, TemporalLowpass };
  Kind kind = Kind::None;
  double cutoff_hz = 3.0;

  static DenoiseMode none() { return {}; }
  static DenoiseMode spatial_median3() { return {Kind::SpatialMedian3, 0.0}; }
  static DenoiseMode temporal_lowpass(double cutoff_hz) { return {Kind::TemporalLowpass, cutoff_hz}; }
};

/// 3x3 median per frame (edge replication) or zero-phase low-pass per pixel.
/// Throws BadCutoff.
VelocitySeries denoise(const VelocitySeries& vel, const DenoiseMode& mode);

}  // namespace rtpc::correction
