#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace rtpc {

enum class VendorConvention { VelocityStored, PhaseRadians, ScaledInteger };

std::string_view to_string(VendorConvention convention);
VendorConvention parse_vendor_convention(std::string_view name);

struct PixelSpacing {
  double row_mm = 1.0;
  double col_mm = 1.0;

  friend bool operator==(const PixelSpacing&, const PixelSpacing&) = default;
};

/// Geometry and timing shared by the velocity and magnitude stacks of a
/// series. Time is uniform: frame t is acquired at t * frame_duration_ms.
struct SeriesHeader {
  std::size_t n_frames = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  PixelSpacing pixel_spacing_mm;
  double frame_duration_ms = 0.0;
  double venc_cm_s = 0.0;
  VendorConvention vendor_convention = VendorConvention::VelocityStored;

  /// Throws InvalidArgument when an invariant is violated.
  void validate() const;

  std::size_t frame_pixels() const { return rows * cols; }
  std::size_t sample_count() const { return n_frames * rows * cols; }
  double frame_period_s() const { return frame_duration_ms * 1e-3; }
  double frame_time_s(std::size_t t) const { return static_cast<double>(t) * frame_period_s(); }
  bool same_geometry(const SeriesHeader& other) const;

  friend bool operator==(const SeriesHeader&, const SeriesHeader&) = default;
};

double pixel_area_mm2(const SeriesHeader& header);

struct PixelIndex {
  int row = 0;
  int col = 0;

  friend bool operator==(const PixelIndex&, const PixelIndex&) = default;
};

/// Boolean map of rows x cols, row-major.
class Mask {
 public:
  Mask() = default;
  Mask(std::size_t rows, std::size_t cols, bool value = false);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return bits_.size(); }

  bool at(std::size_t row, std::size_t col) const { return bits_[row * cols_ + col] != 0; }
  bool operator[](std::size_t index) const { return bits_[index] != 0; }
  void set(std::size_t row, std::size_t col, bool value = true) { bits_[row * cols_ + col] = value ? 1 : 0; }
  void set_index(std::size_t index, bool value = true) { bits_[index] = value ? 1 : 0; }
  bool in_bounds(long row, long col) const {
    return row >= 0 && col >= 0 && row < static_cast<long>(rows_) && col < static_cast<long>(cols_);
  }

  std::size_t count() const;
  bool empty() const { return count() == 0; }
  bool same_shape(const Mask& other) const { return rows_ == other.rows_ && cols_ == other.cols_; }
  std::span<const std::uint8_t> bits() const { return bits_; }

  Mask& operator|=(const Mask& other);
  Mask& operator&=(const Mask& other);
  /// Pixels set in this mask and not in `other`.
  Mask minus(const Mask& other) const;

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> bits_;
};

double dice(const Mask& a, const Mask& b);

/// Which corrections a velocity series has been through. The [-venc, venc]
/// range invariant only binds raw series.
struct CorrectionState {
  bool unaliased = false;
  bool background_corrected = false;
  bool denoised = false;

  bool raw() const { return !unaliased && !background_corrected && !denoised; }
  friend bool operator==(const CorrectionState&, const CorrectionState&) = default;
};

/// Velocity maps in cm/s, frame-major then row-major.
class VelocitySeries {
 public:
  VelocitySeries(SeriesHeader header, std::vector<double> samples, CorrectionState state = {});

  const SeriesHeader& header() const { return header_; }
  const CorrectionState& state() const { return state_; }
  std::span<const double> samples() const { return samples_; }
  std::span<const double> frame(std::size_t t) const;
  double at(std::size_t t, std::size_t row, std::size_t col) const {
    return samples_[(t * header_.rows + row) * header_.cols + col];
  }

 private:
  SeriesHeader header_;
  std::vector<double> samples_;
  CorrectionState state_;
};

/// Non-negative magnitude (amplitude) images, same layout as VelocitySeries.
class MagnitudeSeries {
 public:
  MagnitudeSeries(SeriesHeader header, std::vector<double> samples);

  const SeriesHeader& header() const { return header_; }
  std::span<const double> samples() const { return samples_; }
  std::span<const double> frame(std::size_t t) const;
  double at(std::size_t t, std::size_t row, std::size_t col) const {
    return samples_[(t * header_.rows + row) * header_.cols + col];
  }

 private:
  SeriesHeader header_;
  std::vector<double> samples_;
};

enum class RoiKind { Static, Dynamic };

class Roi {
 public:
  static Roi make_static(Mask mask);
  /// Throws InvalidArgument unless exactly `n_frames` equally-shaped masks are given.
  static Roi make_dynamic(std::vector<Mask> masks, std::size_t n_frames);

  RoiKind kind() const { return kind_; }
  const std::vector<Mask>& masks() const { return masks_; }
  const Mask& mask_for_frame(std::size_t t) const { return kind_ == RoiKind::Static ? masks_.front() : masks_.at(t); }
  std::size_t rows() const { return masks_.front().rows(); }
  std::size_t cols() const { return masks_.front().cols(); }
  Mask union_mask() const;

  /// Throws GeometryMismatch when the ROI does not fit the series.
  void check_geometry(const SeriesHeader& header) const;

 private:
  Roi(RoiKind kind, std::vector<Mask> masks) : kind_(kind), masks_(std::move(masks)) {}

  RoiKind kind_;
  std::vector<Mask> masks_;
};

/// Uniformly sampled real signal.
class Signal1D {
 public:
  Signal1D(std::vector<double> samples, double sample_period_s, double t0_s = 0.0);

  std::span<const double> samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  double operator[](std::size_t i) const { return samples_[i]; }
  double sample_period_s() const { return sample_period_s_; }
  double t0_s() const { return t0_s_; }
  double time(std::size_t i) const { return t0_s_ + static_cast<double>(i) * sample_period_s_; }
  double end_time() const { return time(samples_.size() - 1); }

  /// Linear interpolation at time t; t must lie within [t0, end_time]. Times
  /// within 1e-9 sample periods of a knot return that sample exactly.
  double value_at(double t) const;
  bool covers(double t) const;

 private:
  std::vector<double> samples_;
  double sample_period_s_;
  double t0_s_;
};

/// Pairwise (cascade) summation: fixed order, so results do not depend on
/// how callers partition work.
double pairwise_sum(std::span<const double> values);

}  // namespace rtpc
