#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "rtpc/core.hpp"
#include "rtpc/correction.hpp"
#include "rtpc/ingest.hpp"

namespace rtpc::phantom {

struct Harmonic {
  double amplitude = 0.0;
  double phase_rad = 0.0;
};

struct PhantomConfig {
  std::size_t rows = 64;
  std::size_t cols = 64;
  PixelSpacing pixel_spacing_mm{1.0, 1.0};
  std::size_t n_frames = 300;
  double frame_duration_ms = 96.0;
  double venc_cm_s = 5.0;

  // Vessel center in pixel coordinates (row, col) at frame 0; negative means
  // the image center.
  double center_row = -1.0;
  double center_col = -1.0;
  double radius_mm = 4.0;
  double drift_row_px_per_frame = 0.0;
  double drift_col_px_per_frame = 0.0;

  double hr_bpm = 72.0;
  std::vector<Harmonic> harmonics{{1.0, 0.0}, {0.4, 1.0471975511965976}, {0.15, 2.0943951023931953}};
  // Constant term of the waveform before unit-peak normalization, and the
  // cardiac phase at t = 0 (pi starts the series in diastole).
  double waveform_baseline = 1.0;
  double cardiac_start_phase_rad = 3.141592653589793;
  double peak_velocity_cm_s = 4.0;

  double resp_period_s = 4.0;
  double modulation = 0.0;
  double delay_s = 0.0;
  double resp_sample_period_s = 0.01;

  double background_a = 0.0;
  double background_b = 0.0;
  double background_c = 0.0;

  double noise_sigma_cm_s = 0.2;
  double magnitude_background = 100.0;
  double magnitude_noise_sigma = 5.0;
  bool alias_enabled = false;
  std::uint64_t rng_seed = 1;
  bool quantize_float32 = true;

  /// Throws ConfigInvalid.
  void validate() const;
  SeriesHeader header() const;
  double center_row_at(std::size_t t) const;
  double center_col_at(std::size_t t) const;
};

struct GroundTruth {
  std::vector<Mask> masks;
  Signal1D flow_ml_min;       // oracle_flow at the frame times
  Signal1D peak_velocity_cm_s;
  correction::BackgroundModel background;
  Signal1D resp;
  double modulation = 0.0;
  double delay_s = 0.0;
  double cardiac_period_s = 0.0;
  std::vector<double> cardiac_period_series_s;  // one entry per frame
  std::vector<double> true_velocity;             // unwrapped, before noise quantization
};

struct Phantom {
  VelocitySeries velocity;
  MagnitudeSeries magnitude;
  Signal1D resp;
  GroundTruth truth;

  ingest::SeriesPair series() const { return {velocity, magnitude}; }
};

/// Unit-peak cardiac waveform at time t.
class Waveform {
 public:
  explicit Waveform(const PhantomConfig& config);
  double operator()(double t_s) const;

 private:
  double omega_;
  double phase0_;
  double baseline_;
  std::vector<Harmonic> harmonics_;
  double scale_ = 1.0;
  double raw(double theta) const;
};

/// Respiratory belt s(t) = sin(2 pi t / T_r).
double belt(const PhantomConfig& config, double t_s);
/// Flow modulation e(t) = -cos(2 pi t / T_r): e is highest where the belt
/// falls, so expiration carries the extra flow.
double modulation_shape(const PhantomConfig& config, double t_s);
/// v_peak(t) = peak * w(t) * (1 + m * e(t - delay)).
double peak_velocity(const PhantomConfig& config, const Waveform& w, double t_s);

/// ((v + venc) mod 2 venc) - venc.
double wrap_velocity(double v, double venc);

Phantom generate(const PhantomConfig& config);

/// Continuous-disk flow (v_peak / 2) * pi r^2 in mL/min at the frame times.
Signal1D oracle_flow(const PhantomConfig& config);

/// Counter-based standard normal draw for (seed, stream, index).
double gaussian(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

}  // namespace rtpc::phantom
