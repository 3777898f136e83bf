#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dicom_writer.hpp"
#include "helpers.hpp"
#include "rtpc/dicom.hpp"

using namespace rtpc;
using namespace rtpc::testing;
namespace t = rtpc::dicom::tags;

namespace {

PcImageSpec sixteen() {
  PcImageSpec s;
  s.rows = 16;
  s.cols = 16;
  s.stored.resize(256);
  for (std::size_t i = 0; i < 256; ++i) s.stored[i] = static_cast<std::uint16_t>(i * 16);
  return s;
}

}  // namespace

TEST_CASE("crafted explicit-VR file parses element by element") {
  const PcImageSpec spec = sixteen();
  const Bytes bytes = pc_image(spec);
  const auto ds = dicom::parse_dicom(bytes);
  CHECK(ds.transfer_syntax_uid == dicom::uids::kExplicitVrLittleEndian);
  CHECK(ds.number(t::kRows) == 16.0);
  CHECK(ds.number(t::kColumns) == 16.0);
  CHECK(ds.number(t::kFrameTime) == 96.0);
  CHECK(ds.number(t::kVelocityEncodingMaximum) == 5.0);
  CHECK(ds.number(t::kRescaleSlope) == 2.0);
  CHECK(ds.number(t::kRescaleIntercept) == -4096.0);
  CHECK(ds.string(t::kComplexImageComponent) == std::string("PHASE"));
  CHECK(ds.string(t::kStudyInstanceUid) == std::string("1.2.3.4"));
  const auto* sp = ds.find(t::kPixelSpacing);
  REQUIRE(sp != nullptr);
  CHECK(sp->as_numbers() == std::vector<double>{1.0, 1.0});
  const auto* it = ds.find(t::kImageType);
  REQUIRE(it != nullptr);
  CHECK(it->as_strings() == std::vector<std::string>{"ORIGINAL", "PRIMARY", "P", "ND"});

  // Re-encoding the builder's dataset matches the parsed raw bytes exactly.
  const auto* px = ds.find(t::kPixelData);
  REQUIRE(px != nullptr);
  CHECK(px->vr == "OW");
  REQUIRE(px->value.size() == 512);
  for (std::size_t i = 0; i < 256; ++i) {
    const unsigned v = px->value[2 * i] | (px->value[2 * i + 1] << 8);
    CHECK(v == spec.stored[i]);
  }
  const auto img = dicom::decode_image(ds);
  CHECK(img.rows == 16);
  CHECK(img.cols == 16);
  CHECK(img.n_frames == 1);
  CHECK(img.bits_stored == 12);
  for (std::size_t i = 0; i < 256; ++i) CHECK(img.stored[i] == spec.stored[i]);
}

TEST_CASE("implicit VR with and without Part 10 wrapper") {
  PcImageSpec spec = sixteen();
  spec.explicit_vr = false;
  const auto wrapped = dicom::parse_dicom(pc_image(spec));
  CHECK(wrapped.transfer_syntax_uid == dicom::uids::kImplicitVrLittleEndian);
  spec.part10 = false;
  const auto bare = dicom::parse_dicom(pc_image(spec));
  CHECK(bare.transfer_syntax_uid == dicom::uids::kImplicitVrLittleEndian);
  for (const auto* ds : {&wrapped, &bare}) {
    CHECK(ds->number(t::kRows) == 16.0);
    CHECK(ds->number(t::kFrameTime) == 96.0);
    CHECK(ds->number(t::kVelocityEncodingMaximum) == 5.0);
    CHECK(dicom::decode_image(*ds).stored[17] == spec.stored[17]);
  }
}

TEST_CASE("bare explicit VR dataset parses") {
  PcImageSpec spec = sixteen();
  spec.part10 = false;
  const auto ds = dicom::parse_dicom(pc_image(spec));
  CHECK(ds.transfer_syntax_uid == dicom::uids::kExplicitVrLittleEndian);
  CHECK(ds.number(t::kColumns) == 16.0);
}

TEST_CASE("negative cases") {
  const Bytes junk = {'h', 'e', 'l', 'l', 'o', ' ', 'w', 'o', 'r', 'l', 'd', '!'};
  CHECK_THROWS_CODE(dicom::parse_dicom(junk), ErrorCode::MalformedPreamble);

  DicomBuilder b = pc_dataset(sixteen());
  b.remove(t::kRows);
  CHECK_THROWS_CODE(dicom::parse_dicom(part10(b)), ErrorCode::MissingRequiredTag);

  Bytes bytes = pc_image(sixteen());
  bytes.resize(bytes.size() - 10);
  CHECK_THROWS_CODE(dicom::parse_dicom(bytes), ErrorCode::TruncatedElement);

  // Swap the transfer syntax in the file meta for big endian, a UID of the
  // same length, so every element length stays valid.
  Bytes wrong_syntax = part10(pc_dataset(sixteen()));
  const std::string ts = dicom::uids::kExplicitVrLittleEndian;
  const std::string big = "1.2.840.10008.1.2.2";
  REQUIRE(big.size() == ts.size());
  auto pos = std::search(wrong_syntax.begin(), wrong_syntax.end(), ts.begin(), ts.end());
  REQUIRE(pos != wrong_syntax.end());
  std::copy(big.begin(), big.end(), pos);
  CHECK_THROWS_CODE(dicom::parse_dicom(wrong_syntax), ErrorCode::UnsupportedTransferSyntax);
}

TEST_CASE("fuzzed truncations always raise typed errors") {
  for (bool explicit_vr : {true, false}) {
    for (bool wrap : {true, false}) {
      PcImageSpec spec = sixteen();
      spec.explicit_vr = explicit_vr;
      spec.part10 = wrap;
      const Bytes full = pc_image(spec);
      const auto reference = dicom::parse_dicom(full);
      for (std::size_t n = 0; n < full.size(); ++n) {
        const Bytes cut(full.begin(), full.begin() + static_cast<long>(n));
        try {
          const auto ds = dicom::parse_dicom(cut);
          // A prefix can only parse if it ends on an element boundary; then
          // every element it holds must equal the reference element.
          for (const auto& e : ds.elements) {
            const auto* ref = reference.find(e.tag);
            REQUIRE(ref != nullptr);
            CHECK(ref->value == e.value);
          }
        } catch (const Error& e) {
          const auto c = e.code();
          const bool typed = c == ErrorCode::TruncatedElement || c == ErrorCode::MalformedPreamble ||
                             c == ErrorCode::MalformedElement || c == ErrorCode::MissingRequiredTag ||
                             c == ErrorCode::UnsupportedTransferSyntax;
          CHECK_MESSAGE(typed, e.what());
        }
      }
    }
  }
}

TEST_CASE("random byte corruption never crashes") {
  Rng rng(7);
  const Bytes full = pc_image(sixteen());
  for (int trial = 0; trial < 2000; ++trial) {
    Bytes b = full;
    const std::size_t flips = 1 + rng.below(4);
    for (std::size_t k = 0; k < flips; ++k) b[rng.below(b.size())] = static_cast<std::uint8_t>(rng.below(256));
    try {
      auto ds = dicom::parse_dicom(b);
      (void)dicom::decode_image(ds);
    } catch (const Error&) {
    }
  }
  CHECK(true);
}

TEST_CASE("sequences with defined and undefined lengths") {
  for (bool undefined : {true, false}) {
    DicomBuilder item;
    item.str({0x0004, 0x1430}, "CS", "IMAGE");
    item.str(t::kReferencedFileId, "CS", "DIR\\F1");
    DicomBuilder root;
    root.sequence(t::kDirectoryRecordSequence, {item, item}, undefined);
    for (bool explicit_vr : {true, false}) {
      const auto ds = dicom::parse_dicom(part10(root, explicit_vr), dicom::Requirement::Any);
      const auto* seq = ds.find(t::kDirectoryRecordSequence);
      REQUIRE(seq != nullptr);
      REQUIRE(seq->items.size() == 2);
      CHECK(seq->items[1].find(t::kReferencedFileId)->as_strings() == std::vector<std::string>{"DIR", "F1"});
    }
  }
}

TEST_CASE("ScaledInteger matches a 4096-code linear table") {
  // Oracle: stored code k of an unsigned 12-bit image with slope 2 and
  // intercept -4096 rescales to 2k - 4096 in [-4096, 4094]; the range
  // [-M, M-1] with M = 4096 maps linearly onto [-venc, venc).
  std::vector<std::int32_t> codes(4096);
  for (int k = 0; k < 4096; ++k) codes[k] = k;
  dicom::PhaseMapping m;
  m.slope = 2.0;
  m.intercept = -4096.0;
  m.convention = VendorConvention::ScaledInteger;
  m.venc_cm_s = 5.0;
  m.bits_stored = 12;
  const auto v = dicom::phase_to_velocity(codes, m);
  for (int k = 0; k < 4096; ++k) CHECK(v[k] == doctest::Approx(5.0 * (2.0 * k - 4096.0) / 4096.0).epsilon(1e-15));
  CHECK(v[0] == -5.0);
  CHECK(v[4095] < 5.0);

  // Signed 12-bit storage: -2048 is the bottom of the range.
  dicom::PhaseMapping s;
  s.convention = VendorConvention::ScaledInteger;
  s.venc_cm_s = 5.0;
  s.bits_stored = 12;
  std::vector<std::int32_t> signed_codes(4096);
  for (int k = 0; k < 4096; ++k) signed_codes[k] = k - 2048;
  const auto sv = dicom::phase_to_velocity(signed_codes, s);
  CHECK(sv[0] == -5.0);
  for (int k = 0; k < 4096; ++k) CHECK(sv[k] == doctest::Approx(5.0 * (k - 2048) / 2048.0).epsilon(1e-15));
}

TEST_CASE("PhaseRadians examples, monotonicity and odd symmetry") {
  dicom::PhaseMapping m;
  m.convention = VendorConvention::PhaseRadians;
  m.venc_cm_s = 5.0;
  m.slope = std::numbers::pi / 4096.0;
  std::vector<std::int32_t> codes;
  for (int k = -4096; k < 4096; ++k) codes.push_back(k);
  const auto v = dicom::phase_to_velocity(codes, m);
  CHECK(v[4096] == 0.0);
  // phi = pi (1 - 2^-12) maps to just under venc.
  CHECK(v.back() == doctest::Approx(5.0).epsilon(1e-3));
  for (std::size_t i = 1; i < v.size(); ++i) CHECK(v[i] >= v[i - 1]);
  for (int k = 1; k < 4096; ++k) CHECK(v[4096 + k] == -v[4096 - k]);

  m.venc_cm_s = 1.7;
  CHECK(dicom::phase_to_velocity(std::vector<std::int32_t>{0}, m)[0] == 0.0);
}

TEST_CASE("monotone for every convention with sign +1, reversed with -1") {
  for (auto conv : {VendorConvention::VelocityStored, VendorConvention::PhaseRadians, VendorConvention::ScaledInteger}) {
    dicom::PhaseMapping m;
    m.convention = conv;
    m.venc_cm_s = 5.0;
    m.bits_stored = 12;
    std::vector<std::int32_t> codes;
    if (conv == VendorConvention::ScaledInteger) {
      m.slope = 2.0;
      m.intercept = -4096.0;
      for (int k = 0; k < 4096; ++k) codes.push_back(k);
    } else if (conv == VendorConvention::PhaseRadians) {
      m.slope = 0.001;
      for (int k = -3141; k <= 3141; ++k) codes.push_back(k);
    } else {
      m.slope = 0.01;
      for (int k = -500; k <= 500; ++k) codes.push_back(k);
    }
    const auto up = dicom::phase_to_velocity(codes, m);
    for (std::size_t i = 1; i < up.size(); ++i) CHECK(up[i] >= up[i - 1]);
    m.sign = -1;
    const auto down = dicom::phase_to_velocity(codes, m);
    for (std::size_t i = 0; i < up.size(); ++i) CHECK(down[i] == doctest::Approx(-up[i]));
  }
}

TEST_CASE("VelocityStored and ConventionMismatch") {
  dicom::PhaseMapping m;
  m.convention = VendorConvention::VelocityStored;
  m.venc_cm_s = 5.0;
  m.slope = 0.01;
  m.intercept = -1.0;
  const auto v = dicom::phase_to_velocity(std::vector<std::int32_t>{0, 100, 600, 504}, m);
  CHECK(v[0] == doctest::Approx(-1.0));
  CHECK(v[1] == doctest::Approx(0.0));
  CHECK(v[2] == doctest::Approx(5.0));
  CHECK(v[3] == doctest::Approx(4.04));
  CHECK_THROWS_CODE(dicom::phase_to_velocity(std::vector<std::int32_t>{700}, m), ErrorCode::ConventionMismatch);

  dicom::PhaseMapping p;
  p.convention = VendorConvention::PhaseRadians;
  p.venc_cm_s = 5.0;
  CHECK_THROWS_CODE(dicom::phase_to_velocity(std::vector<std::int32_t>{4}, p), ErrorCode::ConventionMismatch);
}
