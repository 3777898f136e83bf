#include <doctest.h>

#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "rtpc/flow.hpp"
#include "rtpc/phantom.hpp"

using namespace rtpc;
using namespace rtpc::phantom;
using rtpc::testing::Rng;

namespace {

PhantomConfig noise_free() {
  PhantomConfig c;
  c.noise_sigma_cm_s = 0.0;
  c.magnitude_noise_sigma = 0.0;
  c.quantize_float32 = false;
  return c;
}

PhantomConfig constant_peak(double v_peak, double radius_mm) {
  PhantomConfig c = noise_free();
  c.harmonics = {{0.0, 0.0}};
  c.peak_velocity_cm_s = v_peak;
  c.radius_mm = radius_mm;
  c.n_frames = 4;
  return c;
}

// Flow through a disk with parabolic profile v(rho) = v_peak (1 - rho^2/r^2),
// integrated over rho by Simpson's rule; mm, cm/s in, mL/min out.
double parabolic_disk_flow(double v_peak_cm_s, double radius_mm) {
  const int n = 2000;
  const double h = radius_mm / n;
  double acc = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double rho = i * h;
    const double f = v_peak_cm_s * 10.0 * (1.0 - rho * rho / (radius_mm * radius_mm)) * 2.0 * std::numbers::pi * rho;
    acc += ((i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0)) * f;
  }
  const double mm3_per_s = acc * h / 3.0;
  return mm3_per_s * 60.0 / 1000.0;
}

double pixelized_relative_error(double spacing_mm) {
  PhantomConfig c = noise_free();
  c.pixel_spacing_mm = {spacing_mm, spacing_mm};
  c.rows = c.cols = static_cast<std::size_t>(std::lround(64.0 / spacing_mm));
  c.n_frames = 64;
  const auto ph = generate(c);
  const auto q = flow::compute_flow_curve(ph.velocity, Roi::make_static(ph.truth.masks.front())).signal;
  const auto o = oracle_flow(c);
  return std::abs(pairwise_sum(q.samples()) - pairwise_sum(o.samples())) / pairwise_sum(o.samples());
}

}  // namespace

TEST_CASE("oracle flow of a constant parabolic profile") {
  const auto q = oracle_flow(constant_peak(4.0, 4.0));
  const double numeric = parabolic_disk_flow(4.0, 4.0);
  // (2 cm/s)(pi 16 mm^2) = 1005.3 mm^3/s = 60.3 mL/min.
  CHECK(numeric == doctest::Approx(60.3186).epsilon(1e-5));
  for (double v : q.samples()) CHECK(v == doctest::Approx(numeric).epsilon(1e-9));
  const auto still = oracle_flow(constant_peak(0.0, 4.0));
  for (double v : still.samples()) CHECK(v == 0.0);
}

TEST_CASE("oracle flow scales with the square of the radius") {
  PhantomConfig c = noise_free();
  c.radius_mm = 3.0;
  const auto a = oracle_flow(c);
  c.radius_mm = 6.0;
  const auto b = oracle_flow(c);
  for (std::size_t t = 0; t < a.size(); ++t) CHECK(b[t] == doctest::Approx(4.0 * a[t]).epsilon(1e-12));
}

TEST_CASE("pipeline flow on the true mask matches the oracle") {
  const PhantomConfig c = noise_free();
  const auto ph = generate(c);
  const auto q = flow::compute_flow_curve(ph.velocity, Roi::make_static(ph.truth.masks.front())).signal;
  const auto o = oracle_flow(c);
  REQUIRE(q.size() == o.size());
  for (std::size_t t = 0; t < q.size(); ++t) CHECK(std::abs(q[t] - o[t]) <= 0.01 * std::abs(o[t]) + 1e-12);
  for (std::size_t t = 0; t < q.size(); ++t) CHECK(ph.truth.flow_ml_min[t] == o[t]);
}

TEST_CASE("pixelized flow converges to the oracle") {
  CHECK(pixelized_relative_error(1.0) < 0.03);
  CHECK(pixelized_relative_error(0.5) < 0.01);
  CHECK(pixelized_relative_error(0.5) < pixelized_relative_error(1.0));
}

TEST_CASE("aliased systole shows the wrapped velocity") {
  PhantomConfig c = noise_free();
  c.peak_velocity_cm_s = 7.0;
  c.alias_enabled = true;
  const auto ph = generate(c);
  double most_negative = 0.0;
  for (std::size_t t = 0; t < c.n_frames; ++t)
    if (ph.truth.peak_velocity_cm_s[t] > 6.99)
      most_negative = std::min(most_negative, ph.velocity.at(t, c.rows / 2, c.cols / 2));
  CHECK(most_negative == doctest::Approx(-3.0).epsilon(0.01));
  for (double v : ph.velocity.samples()) {
    CHECK(v >= -c.venc_cm_s);
    CHECK(v < c.venc_cm_s);
  }
}

TEST_CASE("wrap formula") {
  CHECK(wrap_velocity(7.0, 5.0) == -3.0);
  CHECK(wrap_velocity(-7.0, 5.0) == 3.0);
  CHECK(wrap_velocity(5.0, 5.0) == -5.0);
  CHECK(wrap_velocity(-5.0, 5.0) == -5.0);
  CHECK(wrap_velocity(23.0, 5.0) == 3.0);
  Rng rng(6);
  for (int i = 0; i < 20000; ++i) {
    const double venc = rng.uniform(0.5, 10.0);
    const double v = rng.uniform(-6.0 * venc, 6.0 * venc);
    const double w = wrap_velocity(v, venc);
    CHECK(w >= -venc);
    CHECK(w < venc);
    if (std::abs(v) < venc) CHECK(w == v);
    const double k = (v - w) / (2.0 * venc);
    CHECK(std::abs(k - std::round(k)) < 1e-9);
  }
}

TEST_CASE("same seed gives identical datasets, different seeds differ") {
  PhantomConfig c;
  c.n_frames = 40;
  const auto a = generate(c);
  const auto b = generate(c);
  CHECK(std::equal(a.velocity.samples().begin(), a.velocity.samples().end(), b.velocity.samples().begin()));
  CHECK(std::equal(a.magnitude.samples().begin(), a.magnitude.samples().end(), b.magnitude.samples().begin()));
  CHECK(std::equal(a.resp.samples().begin(), a.resp.samples().end(), b.resp.samples().begin()));
  c.rng_seed = 2;
  const auto d = generate(c);
  CHECK_FALSE(std::equal(a.velocity.samples().begin(), a.velocity.samples().end(), d.velocity.samples().begin()));
}

TEST_CASE("counter-based gaussian noise statistics") {
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double g = gaussian(42, 0, static_cast<std::uint64_t>(i));
    sum += g;
    sq += g * g;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sq / n - 1.0) < 0.02);
  CHECK(gaussian(42, 0, 7) == gaussian(42, 0, 7));
  CHECK(gaussian(42, 0, 7) != gaussian(42, 1, 7));
}

TEST_CASE("magnitude and masks") {
  PhantomConfig c = noise_free();
  c.n_frames = 10;
  c.drift_col_px_per_frame = 1.0;
  c.center_col = 20.0;
  const auto ph = generate(c);
  REQUIRE(ph.truth.masks.size() == 10);
  for (std::size_t t = 0; t < 10; ++t) {
    const Mask& m = ph.truth.masks[t];
    for (std::size_t r = 0; r < c.rows; ++r)
      for (std::size_t col = 0; col < c.cols; ++col)
        CHECK(ph.magnitude.at(t, r, col) == (m.at(r, col) ? 200.0 : 100.0));
    CHECK(m.at(32, 20 + t));
  }
  CHECK(ph.truth.masks[0].count() == ph.truth.masks[5].count());
  CHECK_FALSE(ph.truth.masks[0] == ph.truth.masks[5]);
}

TEST_CASE("background plane and respiratory signal") {
  PhantomConfig c = noise_free();
  c.n_frames = 5;
  c.background_a = 0.2;
  c.background_b = 0.01;
  c.background_c = -0.02;
  const auto ph = generate(c);
  CHECK(ph.velocity.at(3, 2, 1) == doctest::Approx(0.2 + 0.01 * 1 - 0.02 * 2).epsilon(1e-12));
  CHECK(ph.resp.sample_period_s() == 0.01);
  CHECK(ph.resp.covers(0.0));
  CHECK(ph.resp.covers(c.header().frame_time_s(c.n_frames - 1)));
  for (double t : {-3.0, -1.5, 0.0, 0.37})
    CHECK(ph.resp.value_at(t) == doctest::Approx(std::sin(2.0 * std::numbers::pi * t / c.resp_period_s)).epsilon(1e-3).scale(1.0));
}

TEST_CASE("respiratory modulation of the peak velocity") {
  PhantomConfig c = noise_free();
  c.modulation = 0.2;
  c.delay_s = 0.8;
  const Waveform w(c);
  for (double t : {0.1, 1.3, 2.9, 7.7}) {
    const double expected = c.peak_velocity_cm_s * w(t) * (1.0 + 0.2 * modulation_shape(c, t - 0.8));
    CHECK(peak_velocity(c, w, t) == doctest::Approx(expected));
  }
  double peak = 0.0;
  for (int i = 0; i < 20000; ++i) peak = std::max(peak, w(i * 1e-4));
  CHECK(peak == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("in-labeled frames carry the higher peak velocity at zero delay") {
  PhantomConfig c = noise_free();
  c.modulation = 0.2;
  c.delay_s = 0.0;
  const auto ph = generate(c);
  const double dt = c.header().frame_period_s();
  double in_sum = 0.0, ex_sum = 0.0;
  std::size_t in_n = 0, ex_n = 0;
  for (std::size_t t = 0; t < c.n_frames; ++t) {
    // In where the belt rises.
    const double slope = std::cos(2.0 * std::numbers::pi * dt * double(t) / c.resp_period_s);
    const double vp = ph.truth.peak_velocity_cm_s[t];
    if (slope > 0.0) {
      in_sum += vp;
      ++in_n;
    } else if (slope < 0.0) {
      ex_sum += vp;
      ++ex_n;
    }
  }
  CHECK(in_sum / double(in_n) > ex_sum / double(ex_n));
}

TEST_CASE("invalid phantom configurations") {
  auto bad = [](auto mutate) {
    PhantomConfig c;
    mutate(c);
    CHECK_THROWS_CODE(generate(c), ErrorCode::ConfigInvalid);
  };
  bad([](PhantomConfig& c) { c.radius_mm = 40.0; });
  bad([](PhantomConfig& c) { c.radius_mm = 0.0; });
  bad([](PhantomConfig& c) { c.modulation = 1.0; });
  bad([](PhantomConfig& c) { c.delay_s = 4.0; });
  bad([](PhantomConfig& c) { c.hr_bpm = 30.0; });
  bad([](PhantomConfig& c) { c.hr_bpm = 150.0; });
  bad([](PhantomConfig& c) { c.noise_sigma_cm_s = -1.0; });
  bad([](PhantomConfig& c) { c.harmonics.clear(); });
  bad([](PhantomConfig& c) { c.peak_velocity_cm_s = 7.0; });
  bad([](PhantomConfig& c) { c.n_frames = 0; });
}
