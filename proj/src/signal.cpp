#include "rtpc/signal.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <string>

#include "rtpc/error.hpp"

namespace rtpc::signal {

namespace {

// FFTW planning is not thread-safe; execution with the new-array interface
// is. Plans are created once per length and kept for the process lifetime.
fftw_plan r2c_plan(std::size_t n) {
  static std::mutex mutex;
  static std::map<std::size_t, fftw_plan> plans;
  std::lock_guard lock(mutex);
  auto it = plans.find(n);
  if (it != plans.end()) return it->second;
  std::vector<double> in(n);
  std::vector<fftw_complex> out(n / 2 + 1);
  fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(), out.data(),
                                        FFTW_ESTIMATE | FFTW_UNALIGNED);
  plans.emplace(n, plan);
  return plan;
}

std::size_t reflect_index(long i, std::size_t n) {
  if (n == 1) return 0;
  const long period = 2 * static_cast<long>(n - 1);
  long k = i % period;
  if (k < 0) k += period;
  if (k >= static_cast<long>(n)) k = period - k;
  return static_cast<std::size_t>(k);
}

}  // namespace

double Spectrum::parseval_energy() const {
  if (bin_amplitudes.empty() || n_fft == 0) return 0.0;
  double sum = 0.0;
  const std::size_t last = bin_amplitudes.size() - 1;
  for (std::size_t k = 0; k <= last; ++k) {
    const double p = bin_amplitudes[k] * bin_amplitudes[k];
    // Interior bins stand for a conjugate pair in the two-sided transform.
    sum += (k == 0 || (k == last && n_fft % 2 == 0)) ? p : 2.0 * p;
  }
  return sum / static_cast<double>(n_fft);
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

FftWorkspace::FftWorkspace(std::size_t n_input)
    : n_input_(n_input), n_fft_(next_pow2(std::max<std::size_t>(n_input, 2))) {
  if (n_input < 2) fail(ErrorCode::TooShort, "spectrum needs at least 2 samples");
  in_ = static_cast<double*>(fftw_malloc(sizeof(double) * n_fft_));
  out_ = reinterpret_cast<std::complex<double>*>(fftw_malloc(sizeof(fftw_complex) * (n_fft_ / 2 + 1)));
  plan_ = r2c_plan(n_fft_);
}

FftWorkspace::~FftWorkspace() {
  fftw_free(in_);
  fftw_free(out_);
}

void FftWorkspace::amplitudes(std::span<const double> x, std::span<double> amplitudes) {
  if (x.size() != n_input_ || amplitudes.size() != n_bins())
    fail(ErrorCode::InvalidArgument, "spectrum workspace size mismatch");
  const double mean = pairwise_sum(x) / static_cast<double>(x.size());
  for (std::size_t i = 0; i < n_input_; ++i) in_[i] = x[i] - mean;
  std::fill(in_ + n_input_, in_ + n_fft_, 0.0);
  fftw_execute_dft_r2c(static_cast<fftw_plan>(plan_), in_, reinterpret_cast<fftw_complex*>(out_));
  for (std::size_t k = 0; k < n_bins(); ++k) amplitudes[k] = std::abs(out_[k]);
}

Spectrum fft_magnitude(const Signal1D& signal) {
  FftWorkspace ws(signal.size());
  Spectrum s;
  s.n_input_samples = signal.size();
  s.n_fft = ws.n_fft();
  s.bin_width_hz = 1.0 / (static_cast<double>(ws.n_fft()) * signal.sample_period_s());
  s.bin_amplitudes.assign(ws.n_bins(), 0.0);
  ws.amplitudes(signal.samples(), s.bin_amplitudes);
  return s;
}

std::vector<double> lowpass_taps(double cutoff_hz, double sample_rate_hz, std::size_t n_taps) {
  const double nyquist = 0.5 * sample_rate_hz;
  if (!(cutoff_hz > 0.0) || !(cutoff_hz < nyquist))
    fail(ErrorCode::BadCutoff, "cutoff " + std::to_string(cutoff_hz) + " Hz outside (0, " + std::to_string(nyquist) + ")");
  if (n_taps < 3 || n_taps % 2 == 0) fail(ErrorCode::InvalidArgument, "tap count must be odd and >= 3");
  const double fc = cutoff_hz / sample_rate_hz;
  const double centre = 0.5 * static_cast<double>(n_taps - 1);
  std::vector<double> taps(n_taps);
  double sum = 0.0;
  for (std::size_t n = 0; n < n_taps; ++n) {
    const double m = static_cast<double>(n) - centre;
    const double sinc = (m == 0.0) ? 2.0 * fc : std::sin(2.0 * std::numbers::pi * fc * m) / (std::numbers::pi * m);
    const double window = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(n_taps - 1));
    taps[n] = sinc * window;
    sum += taps[n];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

Signal1D lowpass(const Signal1D& signal, double cutoff_hz, std::size_t n_taps) {
  const auto taps = lowpass_taps(cutoff_hz, 1.0 / signal.sample_period_s(), n_taps);
  const std::size_t n = signal.size();
  const long half = static_cast<long>(n_taps / 2);
  // Two centred passes consume 2*half samples of padding on each side.
  const long pad = 2 * half;
  const auto x = signal.samples();
  std::vector<double> padded(n + 2 * static_cast<std::size_t>(pad));
  for (long i = 0; i < static_cast<long>(padded.size()); ++i) padded[static_cast<std::size_t>(i)] = x[reflect_index(i - pad, n)];

  auto centred = [&](const std::vector<double>& in) {
    std::vector<double> out(in.size(), 0.0);
    for (long i = half; i + half < static_cast<long>(in.size()); ++i) {
      double acc = 0.0;
      for (long k = -half; k <= half; ++k) acc += taps[static_cast<std::size_t>(k + half)] * in[static_cast<std::size_t>(i - k)];
      out[static_cast<std::size_t>(i)] = acc;
    }
    return out;
  };
  // Forward pass, then the same symmetric kernel over the reversed signal.
  auto once = centred(padded);
  std::reverse(once.begin(), once.end());
  auto twice = centred(once);
  std::reverse(twice.begin(), twice.end());

  std::vector<double> out(twice.begin() + pad, twice.begin() + pad + static_cast<long>(n));
  return Signal1D(std::move(out), signal.sample_period_s(), signal.t0_s());
}

std::vector<std::size_t> detect_peaks(const Signal1D& signal, double min_separation_s, double prominence_fraction) {
  if (!(min_separation_s > 0.0)) fail(ErrorCode::InvalidArgument, "min separation must be positive");
  if (!(prominence_fraction > 0.0 && prominence_fraction < 1.0))
    fail(ErrorCode::InvalidArgument, "prominence fraction must lie in (0, 1)");
  const auto x = signal.samples();
  const std::size_t n = x.size();
  const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
  const double min_prominence = prominence_fraction * (*hi_it - *lo_it);

  struct Candidate {
    std::size_t index;
    double height;
  };
  std::vector<Candidate> candidates;
  std::size_t i = 1;
  while (i + 1 < n) {
    if (x[i] > x[i - 1]) {
      std::size_t j = i;
      while (j + 1 < n && x[j + 1] == x[i]) ++j;
      if (j + 1 < n && x[j + 1] < x[i]) {
        // Prominence: drop to the lowest point on each side before reaching a
        // strictly higher sample (or the signal end); the higher base counts.
        double left_min = x[i];
        for (std::size_t l = i; l-- > 0;) {
          if (x[l] > x[i]) break;
          left_min = std::min(left_min, x[l]);
        }
        double right_min = x[i];
        for (std::size_t r = j + 1; r < n; ++r) {
          if (x[r] > x[i]) break;
          right_min = std::min(right_min, x[r]);
        }
        const double prominence = x[i] - std::max(left_min, right_min);
        if (prominence >= min_prominence && prominence > 0.0) candidates.push_back({i, x[i]});
      }
      i = j + 1;
    } else {
      ++i;
    }
  }

  const auto min_gap = static_cast<std::size_t>(std::ceil(min_separation_s / signal.sample_period_s() - 1e-9));
  std::vector<Candidate> by_height = candidates;
  std::stable_sort(by_height.begin(), by_height.end(),
                   [](const Candidate& a, const Candidate& b) { return a.height > b.height; });
  std::vector<std::size_t> kept;
  for (const auto& c : by_height) {
    const bool clear = std::none_of(kept.begin(), kept.end(), [&](std::size_t k) {
      const std::size_t gap = k > c.index ? k - c.index : c.index - k;
      return gap < min_gap;
    });
    if (clear) kept.push_back(c.index);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

std::vector<double> resample_linear(std::span<const double> samples, std::size_t n_out) {
  if (samples.size() < 2) fail(ErrorCode::TooShort, "resampling needs at least 2 input samples");
  if (n_out < 2) fail(ErrorCode::TooShort, "resampling needs at least 2 output samples");
  const std::size_t n = samples.size();
  std::vector<double> out(n_out);
  const double scale = static_cast<double>(n - 1);
  const double denom = static_cast<double>(n_out - 1);
  for (std::size_t i = 0; i < n_out; ++i) {
    const double pos = static_cast<double>(i) * scale / denom;
    const auto k = std::min(static_cast<std::size_t>(pos), n - 2);
    const double frac = pos - static_cast<double>(k);
    out[i] = frac == 0.0 ? samples[k] : (frac == 1.0 ? samples[k + 1] : samples[k] + frac * (samples[k + 1] - samples[k]));
  }
  out.front() = samples.front();
  out.back() = samples.back();
  return out;
}

double parabolic_offset(double left, double center, double right) {
  const double denom = left - 2.0 * center + right;
  if (!(denom < 0.0)) return 0.0;
  return std::clamp(0.5 * (left - right) / denom, -0.5, 0.5);
}

double estimate_fundamental_hz(const Spectrum& spectrum, Band band) {
  if (!(band.lo_hz < band.hi_hz)) fail(ErrorCode::InvalidArgument, "band must satisfy lo < hi");
  const auto& a = spectrum.bin_amplitudes;
  std::size_t best = a.size();
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double f = spectrum.frequency(k);
    if (f < band.lo_hz || f > band.hi_hz) continue;
    if (best == a.size() || a[k] > a[best]) best = k;
  }
  if (best == a.size()) fail(ErrorCode::EmptyBand, "no spectrum bin inside the band");
  double offset = 0.0;
  if (best > 0 && best + 1 < a.size()) offset = parabolic_offset(a[best - 1], a[best], a[best + 1]);
  return (static_cast<double>(best) + offset) * spectrum.bin_width_hz;
}

double estimate_fundamental_hz(const Signal1D& signal, Band band) {
  return estimate_fundamental_hz(fft_magnitude(signal), band);
}

}  // namespace rtpc::signal
