#include "rtpc/error.hpp"

namespace rtpc {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::BadCutoff: return "BadCutoff";
    case ErrorCode::EmptyBand: return "EmptyBand";
    case ErrorCode::MalformedPreamble: return "MalformedPreamble";
    case ErrorCode::TruncatedElement: return "TruncatedElement";
    case ErrorCode::MalformedElement: return "MalformedElement";
    case ErrorCode::UnsupportedTransferSyntax: return "UnsupportedTransferSyntax";
    case ErrorCode::MissingRequiredTag: return "MissingRequiredTag";
    case ErrorCode::MixedGeometry: return "MixedGeometry";
    case ErrorCode::UnpairedFrames: return "UnpairedFrames";
    case ErrorCode::MissingVenc: return "MissingVenc";
    case ErrorCode::ConventionMismatch: return "ConventionMismatch";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionUnsupported: return "VersionUnsupported";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::MalformedFile: return "MalformedFile";
    case ErrorCode::SeedBelowThreshold: return "SeedBelowThreshold";
    case ErrorCode::RegionEscaped: return "RegionEscaped";
    case ErrorCode::EmptyFrame: return "EmptyFrame";
    case ErrorCode::DegenerateContour: return "DegenerateContour";
    case ErrorCode::NoCardiacPeak: return "NoCardiacPeak";
    case ErrorCode::ComponentTooSmall: return "ComponentTooSmall";
    case ErrorCode::NoStationaryPixels: return "NoStationaryPixels";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::GeometryMismatch: return "GeometryMismatch";
    case ErrorCode::EmptyRoiFrame: return "EmptyRoiFrame";
    case ErrorCode::BadRange: return "BadRange";
    case ErrorCode::TooFewCycles: return "TooFewCycles";
    case ErrorCode::SpanMismatch: return "SpanMismatch";
    case ErrorCode::EmptySubset: return "EmptySubset";
    case ErrorCode::InsufficientCycles: return "InsufficientCycles";
    case ErrorCode::NoValidDelay: return "NoValidDelay";
    case ErrorCode::NoRespPeak: return "NoRespPeak";
    case ErrorCode::MalformedCsv: return "MalformedCsv";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace rtpc
