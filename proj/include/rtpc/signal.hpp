#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "rtpc/core.hpp"

namespace rtpc::signal {

struct Band {
  double lo_hz = 0.0;
  double hi_hz = 0.0;
};

/// Default cardiac search band, 30-150 bpm.
inline constexpr Band kCardiacBand{0.5, 2.5};
/// Default respiratory search band.
inline constexpr Band kRespiratoryBand{0.1, 0.5};

/// One-sided amplitude spectrum, bins 0 .. n_fft/2.
struct Spectrum {
  std::vector<double> bin_amplitudes;
  double bin_width_hz = 0.0;
  std::size_t n_input_samples = 0;
  std::size_t n_fft = 0;

  double frequency(std::size_t bin) const { return static_cast<double>(bin) * bin_width_hz; }
  /// Sum of |X_k|^2 / n_fft over the full two-sided transform.
  double parseval_energy() const;
};

std::size_t next_pow2(std::size_t n);

/// Reusable buffers and plan for repeated transforms of the same length, as
/// in the per-pixel loops of the frequency segmenter. Not thread-safe; use
/// one workspace per thread.
class FftWorkspace {
 public:
  explicit FftWorkspace(std::size_t n_input);
  ~FftWorkspace();
  FftWorkspace(const FftWorkspace&) = delete;
  FftWorkspace& operator=(const FftWorkspace&) = delete;

  std::size_t n_input() const { return n_input_; }
  std::size_t n_fft() const { return n_fft_; }
  std::size_t n_bins() const { return n_fft_ / 2 + 1; }

  /// Mean-removed, zero-padded amplitude spectrum of `x` into `amplitudes`
  /// (size n_bins()).
  void amplitudes(std::span<const double> x, std::span<double> amplitudes);

 private:
  std::size_t n_input_;
  std::size_t n_fft_;
  double* in_;
  std::complex<double>* out_;
  void* plan_;
};

/// Throws TooShort for fewer than 2 samples.
Spectrum fft_magnitude(const Signal1D& signal);

/// Hamming-windowed sinc low-pass taps normalized to unit DC gain.
std::vector<double> lowpass_taps(double cutoff_hz, double sample_rate_hz, std::size_t n_taps);

/// Zero-phase low-pass: the FIR is run forward and then backward over a
/// mirror-padded copy, so the output has the input's length and no lag.
/// Throws BadCutoff unless 0 < cutoff < Nyquist.
Signal1D lowpass(const Signal1D& signal, double cutoff_hz, std::size_t n_taps = 31);

/// Local maxima with prominence >= prominence_fraction * (max - min) and
/// spacing >= min_separation_s. Taller peaks win separation conflicts;
/// equal heights resolve toward the earlier index. A plateau reports its
/// first sample. Returned indices ascend.
std::vector<std::size_t> detect_peaks(const Signal1D& signal, double min_separation_s,
                                      double prominence_fraction);

/// Linear interpolation onto n_out points spanning the same interval; the
/// end points are reproduced exactly. Throws TooShort.
std::vector<double> resample_linear(std::span<const double> samples, std::size_t n_out);

/// Sub-bin offset in [-0.5, 0.5] of the vertex of the parabola through three
/// neighboring samples, centered on the middle one.
double parabolic_offset(double left, double center, double right);

/// Frequency of the largest spectrum bin inside `band`, refined by a parabola
/// through that bin and its neighbors. Throws EmptyBand.
double estimate_fundamental_hz(const Spectrum& spectrum, Band band);
double estimate_fundamental_hz(const Signal1D& signal, Band band);

}  // namespace rtpc::signal
