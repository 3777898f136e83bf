#pragma once

#include <filesystem>
#include <optional>
#include <utility>

#include "rtpc/core.hpp"

namespace rtpc::ingest {

struct IngestConfig {
  std::optional<double> venc_override_cm_s;
  std::optional<double> frame_duration_override_ms;
  VendorConvention vendor_convention = VendorConvention::ScaledInteger;
  int phase_sign = 1;

  void validate() const;
};

struct SeriesPair {
  VelocitySeries velocity;
  MagnitudeSeries magnitude;
};

/// Loads a phase-contrast series from a directory of DICOM files, a DICOMDIR
/// index, or one multi-frame file (which is paired with same-study files in
/// its directory). Phase and magnitude streams are told apart by Complex
/// Image Component, else by Image Type. Frames are ordered by temporal
/// position index, then instance number, then file name. Config overrides
/// win over VENC and frame-time tags.
///
/// Throws MixedGeometry, UnpairedFrames, MissingVenc, plus any parse error.
SeriesPair load_series(const std::filesystem::path& path, const IngestConfig& config);

}  // namespace rtpc::ingest
