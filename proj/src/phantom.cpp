#include "rtpc/phantom.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "rtpc/error.hpp"

namespace rtpc::phantom {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

double unit_open(std::uint64_t bits) {
  // 53 random bits mapped into (0, 1).
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

void invalid(const std::string& msg) { fail(ErrorCode::ConfigInvalid, msg); }

}  // namespace

double gaussian(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  const std::uint64_t key = splitmix64(seed ^ splitmix64(stream + 0x632BE59BD9B4E019ull));
  const double u1 = unit_open(splitmix64(key + 2 * index));
  const double u2 = unit_open(splitmix64(key + 2 * index + 1));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void PhantomConfig::validate() const {
  try {
    header().validate();
  } catch (const Error& e) {
    invalid(e.what());
  }
  if (!(radius_mm > 0.0)) invalid("vessel radius must be > 0");
  if (!(hr_bpm > 30.0 && hr_bpm < 150.0)) invalid("hr_bpm must lie in (30, 150)");
  if (!(modulation >= 0.0 && modulation < 1.0)) invalid("modulation must lie in [0, 1)");
  if (!(resp_period_s > 0.0)) invalid("resp period must be > 0");
  if (!(delay_s >= 0.0 && delay_s < resp_period_s)) invalid("delay must lie in [0, resp period)");
  if (!(resp_sample_period_s > 0.0)) invalid("resp sample period must be > 0");
  if (!(noise_sigma_cm_s >= 0.0) || !(magnitude_noise_sigma >= 0.0)) invalid("noise sigmas must be >= 0");
  if (!(magnitude_background > 0.0)) invalid("magnitude background must be > 0");
  if (!(peak_velocity_cm_s >= 0.0)) invalid("peak velocity must be >= 0");
  if (harmonics.empty()) invalid("at least one cardiac harmonic is required");
  const double ry = radius_mm / pixel_spacing_mm.row_mm;
  const double rx = radius_mm / pixel_spacing_mm.col_mm;
  for (std::size_t t : {std::size_t{0}, n_frames - 1}) {
    const double cr = center_row_at(t);
    const double cc = center_col_at(t);
    if (cr - ry < 0.0 || cr + ry > static_cast<double>(rows - 1) || cc - rx < 0.0 || cc + rx > static_cast<double>(cols - 1))
      invalid("vessel (radius " + std::to_string(radius_mm) + " mm) does not fit in the image at frame " +
              std::to_string(t));
  }
}

SeriesHeader PhantomConfig::header() const {
  SeriesHeader h;
  h.n_frames = n_frames;
  h.rows = rows;
  h.cols = cols;
  h.pixel_spacing_mm = pixel_spacing_mm;
  h.frame_duration_ms = frame_duration_ms;
  h.venc_cm_s = venc_cm_s;
  h.vendor_convention = VendorConvention::VelocityStored;
  return h;
}

double PhantomConfig::center_row_at(std::size_t t) const {
  const double c0 = center_row < 0.0 ? 0.5 * static_cast<double>(rows) : center_row;
  return c0 + drift_row_px_per_frame * static_cast<double>(t);
}

double PhantomConfig::center_col_at(std::size_t t) const {
  const double c0 = center_col < 0.0 ? 0.5 * static_cast<double>(cols) : center_col;
  return c0 + drift_col_px_per_frame * static_cast<double>(t);
}

Waveform::Waveform(const PhantomConfig& config)
    : omega_(2.0 * std::numbers::pi * config.hr_bpm / 60.0),
      phase0_(config.cardiac_start_phase_rad),
      baseline_(config.waveform_baseline),
      harmonics_(config.harmonics) {
  constexpr int kGrid = 1 << 16;
  double peak = 0.0;
  for (int i = 0; i < kGrid; ++i) peak = std::max(peak, raw(2.0 * std::numbers::pi * i / kGrid));
  if (!(peak > 0.0)) fail(ErrorCode::ConfigInvalid, "cardiac waveform has no positive peak");
  scale_ = 1.0 / peak;
}

double Waveform::raw(double theta) const {
  double v = baseline_;
  for (std::size_t k = 0; k < harmonics_.size(); ++k)
    v += harmonics_[k].amplitude * std::cos(static_cast<double>(k + 1) * theta + harmonics_[k].phase_rad);
  return v;
}

double Waveform::operator()(double t_s) const { return scale_ * raw(omega_ * t_s + phase0_); }

double belt(const PhantomConfig& config, double t_s) {
  return std::sin(2.0 * std::numbers::pi * t_s / config.resp_period_s);
}

double modulation_shape(const PhantomConfig& config, double t_s) {
  return -std::cos(2.0 * std::numbers::pi * t_s / config.resp_period_s);
}

double peak_velocity(const PhantomConfig& config, const Waveform& w, double t_s) {
  return config.peak_velocity_cm_s * w(t_s) * (1.0 + config.modulation * modulation_shape(config, t_s - config.delay_s));
}

double wrap_velocity(double v, double venc) {
  if (v >= -venc && v < venc) return v;
  const double span = 2.0 * venc;
  const double k = std::floor((v + venc) / span);
  double r = v - k * span;
  if (r >= venc) r -= span;
  if (r < -venc) r += span;
  return r;
}

Signal1D oracle_flow(const PhantomConfig& config) {
  config.validate();
  const Waveform w(config);
  const SeriesHeader h = config.header();
  std::vector<double> q(config.n_frames);
  const double disk = std::numbers::pi * config.radius_mm * config.radius_mm;
  for (std::size_t t = 0; t < config.n_frames; ++t)
    q[t] = 0.5 * peak_velocity(config, w, h.frame_time_s(t)) * disk * 0.6;
  return Signal1D(std::move(q), h.frame_period_s());
}

Phantom generate(const PhantomConfig& config) {
  config.validate();
  const SeriesHeader h = config.header();
  const Waveform w(config);
  const std::size_t rows = h.rows;
  const std::size_t cols = h.cols;
  const std::size_t npix = h.frame_pixels();
  const double r2 = config.radius_mm * config.radius_mm;
  const auto fq = [&](double v) { return config.quantize_float32 ? static_cast<double>(static_cast<float>(v)) : v; };

  std::vector<double> velocity(h.sample_count());
  std::vector<double> magnitude(h.sample_count());
  GroundTruth truth{{}, Signal1D({0.0, 0.0}, 1.0), Signal1D({0.0, 0.0}, 1.0), {}, Signal1D({0.0, 0.0}, 1.0),
                    config.modulation, config.delay_s, 60.0 / config.hr_bpm, {}, {}};
  truth.true_velocity.resize(h.sample_count());
  truth.masks.reserve(h.n_frames);
  std::vector<double> vpeak(h.n_frames);

  for (std::size_t t = 0; t < h.n_frames; ++t) {
    const double time = h.frame_time_s(t);
    vpeak[t] = peak_velocity(config, w, time);
    const double cr = config.center_row_at(t);
    const double cc = config.center_col_at(t);
    Mask m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        const std::size_t i = t * npix + r * cols + c;
        const double dy = (static_cast<double>(r) - cr) * config.pixel_spacing_mm.row_mm;
        const double dx = (static_cast<double>(c) - cc) * config.pixel_spacing_mm.col_mm;
        const double rho2 = dx * dx + dy * dy;
        const bool inside = rho2 < r2;
        if (inside) m.set(r, c);
        const double vessel = inside ? vpeak[t] * (1.0 - rho2 / r2) : 0.0;
        const double bg = config.background_a + config.background_b * static_cast<double>(c) +
                          config.background_c * static_cast<double>(r);
        const double noise = config.noise_sigma_cm_s > 0.0 ? config.noise_sigma_cm_s * gaussian(config.rng_seed, 0, i) : 0.0;
        const double v_true = vessel + bg + noise;
        truth.true_velocity[i] = v_true;
        double v = config.alias_enabled ? wrap_velocity(v_true, h.venc_cm_s) : v_true;
        v = fq(v);
        if (v < -h.venc_cm_s || v > h.venc_cm_s)
          invalid("velocity " + std::to_string(v_true) + " cm/s exceeds venc at frame " + std::to_string(t) +
                  "; enable aliasing or raise venc");
        velocity[i] = v;

        const double level = config.magnitude_background * (inside ? 2.0 : 1.0);
        const double mnoise =
            config.magnitude_noise_sigma > 0.0 ? config.magnitude_noise_sigma * gaussian(config.rng_seed, 1, i) : 0.0;
        magnitude[i] = fq(std::max(0.0, level + mnoise));
      }
    }
    truth.masks.push_back(std::move(m));
  }

  const double disk = std::numbers::pi * r2;
  std::vector<double> q(h.n_frames);
  for (std::size_t t = 0; t < h.n_frames; ++t) q[t] = 0.5 * vpeak[t] * disk * 0.6;
  truth.flow_ml_min = Signal1D(std::move(q), h.frame_period_s());
  truth.peak_velocity_cm_s = Signal1D(std::move(vpeak), h.frame_period_s());
  truth.cardiac_period_series_s.assign(h.n_frames, 60.0 / config.hr_bpm);
  truth.background.order = correction::BackgroundOrder::Plane;
  truth.background.a = config.background_a;
  truth.background.b = config.background_b;
  truth.background.c = config.background_c;
  truth.background.stationary_mask = Mask(rows, cols);

  // The belt starts one respiratory period before the first frame.
  const double dt = config.resp_sample_period_s;
  const double t_begin = -config.resp_period_s;
  const double t_end = h.frame_time_s(h.n_frames - 1) + dt;
  const auto n_resp = static_cast<std::size_t>(std::ceil((t_end - t_begin) / dt)) + 1;
  std::vector<double> s(n_resp);
  for (std::size_t i = 0; i < n_resp; ++i) s[i] = belt(config, t_begin + static_cast<double>(i) * dt);
  Signal1D resp(std::move(s), dt, t_begin);
  truth.resp = resp;

  return Phantom{VelocitySeries(h, std::move(velocity)), MagnitudeSeries(h, std::move(magnitude)), std::move(resp),
                 std::move(truth)};
}

}  // namespace rtpc::phantom
