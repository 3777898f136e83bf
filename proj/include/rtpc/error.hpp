#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rtpc {

enum class ErrorCode {
  InvalidArgument,
  IoError,
  FileNotFound,
  ConfigInvalid,
  // core / signal
  TooShort,
  BadCutoff,
  EmptyBand,
  // dicom_ingest
  MalformedPreamble,
  TruncatedElement,
  MalformedElement,
  UnsupportedTransferSyntax,
  MissingRequiredTag,
  MixedGeometry,
  UnpairedFrames,
  MissingVenc,
  ConventionMismatch,
  BadMagic,
  VersionUnsupported,
  ChecksumMismatch,
  MalformedFile,
  // segmentation
  SeedBelowThreshold,
  RegionEscaped,
  EmptyFrame,
  DegenerateContour,
  NoCardiacPeak,
  ComponentTooSmall,
  // correction
  NoStationaryPixels,
  RankDeficient,
  GeometryMismatch,
  // flow_quant
  EmptyRoiFrame,
  BadRange,
  // resp_analysis
  TooFewCycles,
  SpanMismatch,
  EmptySubset,
  InsufficientCycles,
  NoValidDelay,
  NoRespPeak,
  // cli
  MalformedCsv,
};

std::string_view to_string(ErrorCode code);

/// Every failure in the library surfaces as an `Error` carrying a stable code,
/// so callers (the CLI, the batch runner, the Python module) can report and
/// branch on the failure without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace rtpc
