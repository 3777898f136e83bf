#include "rtpc/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rtpc/error.hpp"

namespace rtpc {

std::string_view to_string(VendorConvention convention) {
  switch (convention) {
    case VendorConvention::VelocityStored: return "VelocityStored";
    case VendorConvention::PhaseRadians: return "PhaseRadians";
    case VendorConvention::ScaledInteger: return "ScaledInteger";
  }
  return "VelocityStored";
}

VendorConvention parse_vendor_convention(std::string_view name) {
  if (name == "VelocityStored") return VendorConvention::VelocityStored;
  if (name == "PhaseRadians") return VendorConvention::PhaseRadians;
  if (name == "ScaledInteger") return VendorConvention::ScaledInteger;
  fail(ErrorCode::ConfigInvalid, "unknown vendor convention '" + std::string(name) + "'");
}

void SeriesHeader::validate() const {
  if (n_frames < 2) fail(ErrorCode::InvalidArgument, "series needs at least 2 frames");
  if (rows < 8 || cols < 8) fail(ErrorCode::InvalidArgument, "series frames must be at least 8x8");
  if (!(pixel_spacing_mm.row_mm > 0.0) || !(pixel_spacing_mm.col_mm > 0.0))
    fail(ErrorCode::InvalidArgument, "pixel spacing must be positive");
  if (!(frame_duration_ms > 0.0)) fail(ErrorCode::InvalidArgument, "frame duration must be positive");
  if (!(venc_cm_s > 0.0)) fail(ErrorCode::InvalidArgument, "venc must be positive");
}

bool SeriesHeader::same_geometry(const SeriesHeader& other) const {
  return n_frames == other.n_frames && rows == other.rows && cols == other.cols &&
         pixel_spacing_mm == other.pixel_spacing_mm;
}

double pixel_area_mm2(const SeriesHeader& header) {
  return header.pixel_spacing_mm.row_mm * header.pixel_spacing_mm.col_mm;
}

Mask::Mask(std::size_t rows, std::size_t cols, bool value)
    : rows_(rows), cols_(cols), bits_(rows * cols, value ? 1 : 0) {}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

Mask& Mask::operator|=(const Mask& other) {
  if (!same_shape(other)) fail(ErrorCode::GeometryMismatch, "mask shapes differ");
  for (std::size_t i = 0; i < bits_.size(); ++i) bits_[i] |= other.bits_[i];
  return *this;
}

Mask& Mask::operator&=(const Mask& other) {
  if (!same_shape(other)) fail(ErrorCode::GeometryMismatch, "mask shapes differ");
  for (std::size_t i = 0; i < bits_.size(); ++i) bits_[i] &= other.bits_[i];
  return *this;
}

Mask Mask::minus(const Mask& other) const {
  if (!same_shape(other)) fail(ErrorCode::GeometryMismatch, "mask shapes differ");
  Mask out = *this;
  for (std::size_t i = 0; i < bits_.size(); ++i) out.bits_[i] = bits_[i] && !other.bits_[i];
  return out;
}

double dice(const Mask& a, const Mask& b) {
  if (!a.same_shape(b)) fail(ErrorCode::GeometryMismatch, "mask shapes differ");
  std::size_t both = 0;
  for (std::size_t i = 0; i < a.size(); ++i) both += (a[i] && b[i]) ? 1 : 0;
  const std::size_t total = a.count() + b.count();
  return total == 0 ? 1.0 : 2.0 * static_cast<double>(both) / static_cast<double>(total);
}

namespace {

void check_sample_count(const SeriesHeader& header, std::size_t count) {
  header.validate();
  if (count != header.sample_count())
    fail(ErrorCode::InvalidArgument, "sample count " + std::to_string(count) + " does not match header " +
                                         std::to_string(header.sample_count()));
}

}  // namespace

VelocitySeries::VelocitySeries(SeriesHeader header, std::vector<double> samples, CorrectionState state)
    : header_(header), samples_(std::move(samples)), state_(state) {
  check_sample_count(header_, samples_.size());
  for (double v : samples_) {
    if (!std::isfinite(v)) fail(ErrorCode::InvalidArgument, "velocity samples must be finite");
  }
  if (state_.raw()) {
    const double venc = header_.venc_cm_s;
    for (double v : samples_) {
      if (v < -venc || v > venc)
        fail(ErrorCode::InvalidArgument, "raw velocity sample " + std::to_string(v) + " outside [-venc, venc]");
    }
  }
}

std::span<const double> VelocitySeries::frame(std::size_t t) const {
  const std::size_t n = header_.frame_pixels();
  return std::span<const double>(samples_).subspan(t * n, n);
}

MagnitudeSeries::MagnitudeSeries(SeriesHeader header, std::vector<double> samples)
    : header_(header), samples_(std::move(samples)) {
  check_sample_count(header_, samples_.size());
  for (double m : samples_) {
    if (!(m >= 0.0) || !std::isfinite(m)) fail(ErrorCode::InvalidArgument, "magnitude samples must be finite and >= 0");
  }
}

std::span<const double> MagnitudeSeries::frame(std::size_t t) const {
  const std::size_t n = header_.frame_pixels();
  return std::span<const double>(samples_).subspan(t * n, n);
}

Roi Roi::make_static(Mask mask) {
  if (mask.size() == 0) fail(ErrorCode::InvalidArgument, "ROI mask has no pixels");
  std::vector<Mask> masks;
  masks.push_back(std::move(mask));
  return Roi(RoiKind::Static, std::move(masks));
}

Roi Roi::make_dynamic(std::vector<Mask> masks, std::size_t n_frames) {
  if (masks.size() != n_frames)
    fail(ErrorCode::InvalidArgument, "dynamic ROI has " + std::to_string(masks.size()) + " masks for " +
                                         std::to_string(n_frames) + " frames");
  if (masks.empty() || masks.front().size() == 0) fail(ErrorCode::InvalidArgument, "ROI mask has no pixels");
  for (const auto& m : masks) {
    if (!m.same_shape(masks.front())) fail(ErrorCode::InvalidArgument, "dynamic ROI masks differ in shape");
  }
  return Roi(RoiKind::Dynamic, std::move(masks));
}

Mask Roi::union_mask() const {
  Mask out(rows(), cols());
  for (const auto& m : masks_) out |= m;
  return out;
}

void Roi::check_geometry(const SeriesHeader& header) const {
  if (rows() != header.rows || cols() != header.cols)
    fail(ErrorCode::GeometryMismatch, "ROI shape does not match series frames");
  if (kind_ == RoiKind::Dynamic && masks_.size() != header.n_frames)
    fail(ErrorCode::GeometryMismatch, "dynamic ROI frame count does not match series");
}

Signal1D::Signal1D(std::vector<double> samples, double sample_period_s, double t0_s)
    : samples_(std::move(samples)), sample_period_s_(sample_period_s), t0_s_(t0_s) {
  if (!(sample_period_s_ > 0.0)) fail(ErrorCode::InvalidArgument, "sample period must be positive");
  if (samples_.size() < 2) fail(ErrorCode::TooShort, "signal needs at least 2 samples");
}

bool Signal1D::covers(double t) const {
  const double tol = 1e-9 * sample_period_s_;
  return t >= t0_s_ - tol && t <= end_time() + tol;
}

double Signal1D::value_at(double t) const {
  if (!covers(t)) fail(ErrorCode::SpanMismatch, "time " + std::to_string(t) + " s outside signal span");
  const double pos = (t - t0_s_) / sample_period_s_;
  const double last = static_cast<double>(samples_.size() - 1);
  if (pos <= 0.0) return samples_.front();
  if (pos >= last) return samples_.back();
  const double nearest = std::round(pos);
  if (std::abs(pos - nearest) <= 1e-9) return samples_[static_cast<std::size_t>(nearest)];
  const double base = std::floor(pos);
  const auto i = static_cast<std::size_t>(base);
  const double frac = pos - base;
  return samples_[i] + frac * (samples_[i + 1] - samples_[i]);
}

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 16) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

}  // namespace rtpc
