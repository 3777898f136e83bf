#include <doctest.h>

#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "rtpc/flow.hpp"
#include "rtpc/phantom.hpp"
#include "rtpc/segmentation.hpp"

using namespace rtpc;
using namespace rtpc::flow;
using rtpc::testing::disk_mask;
using rtpc::testing::fill;
using rtpc::testing::Rng;
using rtpc::testing::small_header;

namespace {

FlowCurve constant_flow(double q_ml_min, std::size_t n, double dt) {
  FlowCurve f{Signal1D(std::vector<double>(n, q_ml_min), dt), {}, {}, {}, {}};
  return f;
}

double mean(std::span<const double> v) { return pairwise_sum(v) / static_cast<double>(v.size()); }

}  // namespace

TEST_CASE("uniform velocity over a known area") {
  // 50 mm^2 as 50 pixels of 1 mm^2 at 10 cm/s.
  auto h = small_header(3, 10, 10, 12.0);
  Mask m(10, 10);
  for (std::size_t i = 0; i < 50; ++i) m.set_index(i);
  const VelocitySeries v(h, std::vector<double>(h.sample_count(), 10.0));
  const auto f = compute_flow_curve(v, Roi::make_static(m));
  REQUIRE(f.size() == 3);
  for (std::size_t t = 0; t < 3; ++t) {
    CHECK(f.signal[t] == doctest::Approx(300.0).epsilon(1e-12));
    CHECK(f.roi_area_mm2[t] == 50.0);
    CHECK(f.max_velocity_cm_s[t] == 10.0);
  }
  CHECK(f.signal.sample_period_s() == doctest::Approx(0.096));

  const VelocitySeries zero(h, std::vector<double>(h.sample_count(), 0.0));
  const auto z = compute_flow_curve(zero, Roi::make_static(m));
  for (std::size_t t = 0; t < 3; ++t) {
    CHECK(z.signal[t] == 0.0);
    CHECK(z.max_velocity_cm_s[t] == 0.0);
  }
}

TEST_CASE("pixel area and unit conversion with anisotropic spacing") {
  auto h = small_header(2, 8, 8, 5.0);
  h.pixel_spacing_mm = {0.5, 0.8};
  Mask m(8, 8);
  m.set(2, 2);
  m.set(2, 3);
  const VelocitySeries v(h, fill(h, [](std::size_t t, std::size_t, std::size_t c) { return c == 2 ? 1.0 + t : -3.0; }));
  const auto f = compute_flow_curve(v, Roi::make_static(m));
  // 0.4 mm^2 per pixel; 10 mm/s per cm/s; 60/1000 mL/min per mm^3/s.
  CHECK(f.signal[0] == doctest::Approx((1.0 - 3.0) * 10.0 * 0.4 * 0.06));
  CHECK(f.signal[1] == doctest::Approx((2.0 - 3.0) * 10.0 * 0.4 * 0.06));
  CHECK(f.roi_area_mm2[0] == doctest::Approx(0.8));
  CHECK(f.max_velocity_cm_s[0] == 3.0);
  CHECK(f.max_signed_velocity_cm_s[1] == 2.0);
  CHECK(f.min_signed_velocity_cm_s[1] == -3.0);
}

TEST_CASE("flow errors") {
  const auto h = small_header(3, 8, 8);
  const VelocitySeries v(h, std::vector<double>(h.sample_count(), 1.0));
  std::vector<Mask> masks(3, disk_mask(8, 8, 4, 4, 2));
  masks[1] = Mask(8, 8);
  try {
    (void)compute_flow_curve(v, Roi::make_dynamic(masks, 3));
    FAIL("expected EmptyRoiFrame");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyRoiFrame);
    CHECK(std::string(e.what()).find("1") != std::string::npos);
  }
  CHECK_THROWS_CODE(compute_flow_curve(v, Roi::make_static(disk_mask(9, 9, 4, 4, 2))), ErrorCode::GeometryMismatch);
  const auto f = constant_flow(1.0, 5, 0.1);
  CHECK_THROWS_CODE(stroke_volume(f, 3, 3), ErrorCode::BadRange);
  CHECK_THROWS_CODE(stroke_volume(f, 4, 2), ErrorCode::BadRange);
  CHECK_THROWS_CODE(stroke_volume(f, 0, 5), ErrorCode::BadRange);
  CHECK_THROWS_CODE(integrate_ml(f.signal, 0.0, 0.5), ErrorCode::SpanMismatch);
}

TEST_CASE("stroke volume of simple curves") {
  // 300 mL/min for 1 s.
  const auto f = constant_flow(300.0, 11, 0.1);
  CHECK(stroke_volume(f, 0, 10) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(integrate_ml(f.signal, 0.0, 1.0) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(integrate_ml(f.signal, 0.25, 0.35) == doctest::Approx(0.5).epsilon(1e-12));

  const std::size_t n = 101;
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = 120.0 * std::sin(2.0 * std::numbers::pi * 0.01 * 4.0 * double(i));
  const FlowCurve sine{Signal1D(s, 0.01), {}, {}, {}, {}};
  CHECK(std::abs(stroke_volume(sine, 0, 100)) < 1e-9);
}

TEST_CASE("stroke volume matches the analytic phantom integral") {
  phantom::PhantomConfig c;
  c.noise_sigma_cm_s = 0.0;
  c.quantize_float32 = false;
  c.rows = c.cols = 96;
  c.pixel_spacing_mm = {0.25, 0.25};
  const auto ph = phantom::generate(c);
  const auto f = compute_flow_curve(ph.velocity, Roi::make_static(ph.truth.masks.front()));
  const phantom::Waveform w(c);
  const double r_cm = c.radius_mm / 10.0;
  // Fine Simpson integration of (v_peak / 2) pi r^2, in cm^3 = mL.
  auto analytic = [&](double a, double b) {
    const int n = 20000;
    const double h = (b - a) / n;
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double wgt = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      acc += wgt * 0.5 * phantom::peak_velocity(c, w, a + i * h) * std::numbers::pi * r_cm * r_cm;
    }
    return acc * h / 3.0;
  };
  const double dt = c.frame_duration_ms / 1000.0;
  const std::size_t per_cycle = static_cast<std::size_t>(std::lround(60.0 / c.hr_bpm / dt));
  for (std::size_t start : {0u, 40u, 123u}) {
    const std::size_t end = start + per_cycle;
    const double sv = stroke_volume(f, start, end);
    CHECK(std::abs(sv - analytic(start * dt, end * dt)) / analytic(start * dt, end * dt) < 0.02);
  }
}

TEST_CASE("phantom parabolic profile after segmentation") {
  phantom::PhantomConfig c;
  c.noise_sigma_cm_s = 0.0;
  c.quantize_float32 = false;
  c.pixel_spacing_mm = {0.5, 0.5};
  c.rows = c.cols = 48;
  c.n_frames = 128;
  const auto ph = phantom::generate(c);
  const Roi roi = seg::segment_cardiac_frequency(ph.velocity, {});
  const auto f = compute_flow_curve(ph.velocity, roi);
  const double oracle = mean(phantom::oracle_flow(c).samples());
  CHECK(std::abs(mean(f.signal.samples()) - oracle) / oracle < 0.03);
}

TEST_CASE("flow is linear in velocity and additive over disjoint ROIs") {
  Rng rng(13);
  const auto h = small_header(6, 12, 12);
  for (int trial = 0; trial < 20; ++trial) {
    const auto base = fill(h, [&](std::size_t, std::size_t, std::size_t) { return rng.uniform(-1.0, 1.0); });
    const double k = static_cast<double>(1 + rng.below(4));
    std::vector<double> scaled(base);
    for (auto& x : scaled) x *= k;
    Mask a(12, 12), b(12, 12);
    for (std::size_t i = 0; i < 144; ++i) {
      const auto pick = rng.below(3);
      if (pick == 0) a.set_index(i);
      if (pick == 1) b.set_index(i);
    }
    if (a.empty() || b.empty()) continue;
    Mask ab = a;
    ab |= b;
    const VelocitySeries v(h, base);
    const VelocitySeries vk(h, scaled, CorrectionState{false, true, false});
    const auto qa = compute_flow_curve(v, Roi::make_static(a));
    const auto qb = compute_flow_curve(v, Roi::make_static(b));
    const auto qab = compute_flow_curve(v, Roi::make_static(ab));
    const auto qk = compute_flow_curve(vk, Roi::make_static(a));
    for (std::size_t t = 0; t < h.n_frames; ++t) {
      // Integer scale factors keep every product exact.
      CHECK(qk.signal[t] == doctest::Approx(k * qa.signal[t]).epsilon(1e-13));
      CHECK(qab.signal[t] == doctest::Approx(qa.signal[t] + qb.signal[t]).epsilon(1e-12).scale(1.0));
    }
  }
}

TEST_CASE("stroke volume is additive over adjacent ranges") {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 10 + rng.below(200);
    std::vector<double> s(n);
    for (auto& x : s) x = rng.uniform(-500.0, 500.0);
    const FlowCurve f{Signal1D(s, rng.uniform(0.01, 0.2)), {}, {}, {}, {}};
    const std::size_t a = rng.below(n - 2);
    const std::size_t b = a + 1 + rng.below(n - a - 2);
    const std::size_t c = b + 1 + rng.below(n - b - 1);
    CHECK(stroke_volume(f, a, b) + stroke_volume(f, b, c) ==
          doctest::Approx(stroke_volume(f, a, c)).epsilon(1e-12).scale(1.0));
  }
}
