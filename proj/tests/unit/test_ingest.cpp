#include <doctest.h>

#include <cstdio>

#include "dicom_writer.hpp"
#include "helpers.hpp"
#include "rtpc/ingest.hpp"
#include "tempdir.hpp"

using namespace rtpc;
using namespace rtpc::testing;
namespace fs = std::filesystem;

namespace {

std::string name(const char* prefix, std::size_t i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%05zu.dcm", prefix, i);
  return buf;
}

// Velocities on a 0.625 cm/s grid have exact 12-bit codes at venc 5.
double grid_velocity(std::size_t t) { return 0.625 * (static_cast<double>(t % 5) - 2.0); }

// Phase frame t stores the code for grid_velocity(t) at every pixel;
// magnitude frame t stores 100 + t.
void write_series(const fs::path& dir, std::size_t n_phase, std::size_t n_mag, PcImageSpec base = {}) {
  const std::size_t npix = base.rows * base.cols;
  for (std::size_t t = 0; t < n_phase; ++t) {
    PcImageSpec s = base;
    s.phase = true;
    s.instance_number = static_cast<int>(t + 1);
    s.stored.assign(npix, scaled_code(grid_velocity(t), 5.0));
    write_bytes(dir / name("P", t), pc_image(s));
  }
  for (std::size_t t = 0; t < n_mag; ++t) {
    PcImageSpec s = base;
    s.phase = false;
    s.slope = 1.0;
    s.intercept = 0.0;
    s.instance_number = static_cast<int>(t + 1);
    s.stored.assign(npix, static_cast<std::uint16_t>(100 + t));
    write_bytes(dir / name("M", t), pc_image(s));
  }
}

}  // namespace

TEST_CASE("300-frame directory with standard tags") {
  TempDir dir;
  write_series(dir.path(), 300, 300);
  const auto s = ingest::load_series(dir.path(), {});
  const auto& h = s.velocity.header();
  CHECK(h.n_frames == 300);
  CHECK(h.venc_cm_s == 5.0);
  CHECK(h.frame_duration_ms == 96.0);
  CHECK(h.rows == 8);
  CHECK(h.cols == 8);
  CHECK(h.vendor_convention == VendorConvention::ScaledInteger);
  for (std::size_t t = 0; t < 300; ++t) {
    CHECK(s.velocity.at(t, 3, 4) == grid_velocity(t));
    CHECK(s.magnitude.at(t, 0, 0) == 100.0 + static_cast<double>(t));
  }
}

TEST_CASE("400 + 400 pairs, 400 + 399 does not") {
  TempDir a;
  write_series(a.path(), 400, 400);
  CHECK(ingest::load_series(a.path(), {}).velocity.header().n_frames == 400);
  TempDir b;
  write_series(b.path(), 400, 399);
  CHECK_THROWS_CODE(ingest::load_series(b.path(), {}), ErrorCode::UnpairedFrames);
}

TEST_CASE("ordering prefers temporal index, then instance number, then file name") {
  TempDir dir;
  const std::size_t npix = 64;
  // File names run opposite to temporal order; instance numbers are scrambled.
  const int instance[] = {3, 1, 4, 2};
  for (std::size_t t = 0; t < 4; ++t) {
    for (bool phase : {true, false}) {
      PcImageSpec s;
      s.phase = phase;
      s.temporal_index = static_cast<std::uint32_t>(t + 1);
      s.instance_number = instance[t];
      if (!phase) {
        s.slope = 1.0;
        s.intercept = 0.0;
      }
      s.stored.assign(npix, phase ? scaled_code(0.625 * static_cast<double>(t), 5.0) : static_cast<std::uint16_t>(10 + t));
      write_bytes(dir / name(phase ? "P" : "M", 10 - t), pc_image(s));
    }
  }
  const auto s = ingest::load_series(dir.path(), {});
  for (std::size_t t = 0; t < 4; ++t) {
    CHECK(s.velocity.at(t, 0, 0) == 0.625 * static_cast<double>(t));
    CHECK(s.magnitude.at(t, 0, 0) == 10.0 + t);
  }

  TempDir by_instance;
  for (std::size_t t = 0; t < 4; ++t) {
    for (bool phase : {true, false}) {
      PcImageSpec s;
      s.phase = phase;
      s.instance_number = instance[t];
      if (!phase) {
        s.slope = 1.0;
        s.intercept = 0.0;
      }
      s.stored.assign(npix, phase ? scaled_code(0.625 * instance[t], 5.0)
                                  : static_cast<std::uint16_t>(instance[t]));
      write_bytes(by_instance / name(phase ? "P" : "M", t), pc_image(s));
    }
  }
  const auto si = ingest::load_series(by_instance.path(), {});
  for (std::size_t t = 0; t < 4; ++t) CHECK(si.magnitude.at(t, 0, 0) == static_cast<double>(t + 1));
}

TEST_CASE("geometry, venc and timing errors") {
  TempDir mixed;
  write_series(mixed.path(), 3, 3);
  PcImageSpec odd;
  odd.spacing_row_mm = 0.5;
  odd.instance_number = 4;
  write_bytes(mixed / "P99999.dcm", pc_image(odd));
  CHECK_THROWS_CODE(ingest::load_series(mixed.path(), {}), ErrorCode::MixedGeometry);

  TempDir no_venc;
  PcImageSpec base;
  base.venc.reset();
  write_series(no_venc.path(), 3, 3, base);
  CHECK_THROWS_CODE(ingest::load_series(no_venc.path(), {}), ErrorCode::MissingVenc);
  ingest::IngestConfig over;
  over.venc_override_cm_s = 10.0;
  const auto s = ingest::load_series(no_venc.path(), over);
  CHECK(s.velocity.header().venc_cm_s == 10.0);
  // The stored codes encode -1.25 cm/s at venc 5, so venc 10 doubles them.
  CHECK(s.velocity.at(0, 0, 0) == -2.5);

  TempDir no_time;
  PcImageSpec untimed;
  untimed.frame_time_ms.reset();
  write_series(no_time.path(), 3, 3, untimed);
  CHECK_THROWS_CODE(ingest::load_series(no_time.path(), {}), ErrorCode::MissingRequiredTag);
  ingest::IngestConfig timed;
  timed.frame_duration_override_ms = 50.0;
  CHECK(ingest::load_series(no_time.path(), timed).velocity.header().frame_duration_ms == 50.0);
}

TEST_CASE("overrides win over tags and the sign flip negates") {
  TempDir dir;
  write_series(dir.path(), 3, 3);
  ingest::IngestConfig c;
  c.frame_duration_override_ms = 40.0;
  c.phase_sign = -1;
  const auto s = ingest::load_series(dir.path(), c);
  CHECK(s.velocity.header().frame_duration_ms == 40.0);
  CHECK(s.velocity.at(0, 0, 0) == 1.25);
  ingest::IngestConfig bad;
  bad.venc_override_cm_s = -1.0;
  CHECK_THROWS_CODE(ingest::load_series(dir.path(), bad), ErrorCode::ConfigInvalid);
}

TEST_CASE("image type alone tells phase from magnitude; stray files are skipped") {
  TempDir dir;
  PcImageSpec base;
  base.complex_component = false;
  write_series(dir.path(), 4, 4, base);
  write_file(dir / "notes.txt", "not a dicom file at all, just some text\n");
  const auto s = ingest::load_series(dir.path(), {});
  CHECK(s.velocity.header().n_frames == 4);
  CHECK(s.magnitude.at(2, 1, 1) == 102.0);
}

TEST_CASE("DICOMDIR index") {
  TempDir dir;
  write_series(dir / "IMG", 5, 5);
  std::vector<std::vector<std::string>> refs;
  for (std::size_t t = 0; t < 5; ++t) {
    refs.push_back({"IMG", name("P", t)});
    refs.push_back({"IMG", name("M", t)});
  }
  write_bytes(dir / "DICOMDIR", dicomdir(refs));
  for (const fs::path& p : {dir.path(), dir / "DICOMDIR"}) {
    const auto s = ingest::load_series(p, {});
    CHECK(s.velocity.header().n_frames == 5);
    CHECK(s.velocity.at(4, 0, 0) == 1.25);
  }
}

TEST_CASE("multi-frame file pairs with its same-study sibling") {
  TempDir dir;
  const std::size_t n = 6, npix = 64;
  PcImageSpec phase;
  phase.n_frames = n;
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t i = 0; i < npix; ++i) phase.stored.push_back(scaled_code(0.625 * static_cast<double>(t), 5.0));
  PcImageSpec mag = phase;
  mag.phase = false;
  mag.slope = 1.0;
  mag.intercept = 0.0;
  mag.stored.clear();
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t i = 0; i < npix; ++i) mag.stored.push_back(static_cast<std::uint16_t>(t + 1));
  write_bytes(dir / "phase.dcm", pc_image(phase));
  write_bytes(dir / "mag.dcm", pc_image(mag));
  PcImageSpec other = mag;
  other.study_uid = "9.9.9";
  write_bytes(dir / "other_study.dcm", pc_image(other));

  const auto s = ingest::load_series(dir / "phase.dcm", {});
  CHECK(s.velocity.header().n_frames == n);
  for (std::size_t t = 0; t < n; ++t) {
    CHECK(s.velocity.at(t, 2, 2) == 0.625 * static_cast<double>(t));
    CHECK(s.magnitude.at(t, 2, 2) == static_cast<double>(t + 1));
  }
  CHECK_THROWS_CODE(ingest::load_series(dir / "missing.dcm", {}), ErrorCode::FileNotFound);
}

TEST_CASE("velocities are the float32 values of the converted codes") {
  TempDir dir;
  PcImageSpec p;
  p.stored.resize(64);
  for (std::size_t i = 0; i < 64; ++i) p.stored[i] = static_cast<std::uint16_t>(1000 + 37 * i);
  PcImageSpec m = p;
  m.phase = false;
  m.slope = 1.0;
  m.intercept = 0.0;
  write_bytes(dir / "a_p.dcm", pc_image(p));
  p.instance_number = 2;
  write_bytes(dir / "b_p.dcm", pc_image(p));
  write_bytes(dir / "a_m.dcm", pc_image(m));
  m.instance_number = 2;
  write_bytes(dir / "b_m.dcm", pc_image(m));
  const auto s = ingest::load_series(dir.path(), {});
  for (std::size_t i = 0; i < 64; ++i) {
    const double exact = 5.0 * (2.0 * (1000.0 + 37.0 * static_cast<double>(i)) - 4096.0) / 4096.0;
    CHECK(s.velocity.samples()[i] == static_cast<double>(static_cast<float>(exact)));
  }
}
