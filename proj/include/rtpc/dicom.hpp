#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rtpc/core.hpp"

namespace rtpc::dicom {

struct Tag {
  std::uint16_t group = 0;
  std::uint16_t element = 0;

  constexpr std::uint32_t key() const { return (std::uint32_t{group} << 16) | element; }
  friend constexpr bool operator==(Tag, Tag) = default;
  friend constexpr auto operator<=>(Tag a, Tag b) { return a.key() <=> b.key(); }
};

std::string to_string(Tag tag);

namespace tags {
inline constexpr Tag kTransferSyntaxUid{0x0002, 0x0010};
inline constexpr Tag kImageType{0x0008, 0x0008};
inline constexpr Tag kComplexImageComponent{0x0008, 0x9208};
inline constexpr Tag kFrameTime{0x0018, 0x1063};
inline constexpr Tag kVelocityEncodingMaximum{0x0018, 0x9217};
inline constexpr Tag kStudyInstanceUid{0x0020, 0x000D};
inline constexpr Tag kInstanceNumber{0x0020, 0x0013};
inline constexpr Tag kTemporalPositionIdentifier{0x0020, 0x0100};
inline constexpr Tag kTemporalPositionIndex{0x0020, 0x9128};
inline constexpr Tag kSamplesPerPixel{0x0028, 0x0002};
inline constexpr Tag kNumberOfFrames{0x0028, 0x0008};
inline constexpr Tag kRows{0x0028, 0x0010};
inline constexpr Tag kColumns{0x0028, 0x0011};
inline constexpr Tag kPixelSpacing{0x0028, 0x0030};
inline constexpr Tag kBitsAllocated{0x0028, 0x0100};
inline constexpr Tag kBitsStored{0x0028, 0x0101};
inline constexpr Tag kPixelRepresentation{0x0028, 0x0103};
inline constexpr Tag kRescaleIntercept{0x0028, 0x1052};
inline constexpr Tag kRescaleSlope{0x0028, 0x1053};
inline constexpr Tag kDirectoryRecordSequence{0x0004, 0x1220};
inline constexpr Tag kReferencedFileId{0x0004, 0x1500};
inline constexpr Tag kPixelData{0x7FE0, 0x0010};
inline constexpr Tag kItem{0xFFFE, 0xE000};
inline constexpr Tag kItemDelimitation{0xFFFE, 0xE00D};
inline constexpr Tag kSequenceDelimitation{0xFFFE, 0xE0DD};
}  // namespace tags

namespace uids {
inline constexpr const char* kImplicitVrLittleEndian = "1.2.840.10008.1.2";
inline constexpr const char* kExplicitVrLittleEndian = "1.2.840.10008.1.2.1";
}  // namespace uids

struct Dataset;

/// One parsed element. `value` holds the raw bytes exactly as stored; the
/// typed accessors decode them on demand. Sequences keep their items.
struct Element {
  Tag tag;
  std::string vr;  // empty when the transfer syntax is implicit
  std::vector<std::uint8_t> value;
  std::vector<Dataset> items;

  std::string as_string() const;
  std::vector<std::string> as_strings() const;
  std::optional<double> as_number() const;
  std::vector<double> as_numbers() const;
};

struct Dataset {
  std::vector<Element> elements;
  std::string transfer_syntax_uid;

  const Element* find(Tag tag) const;
  std::optional<double> number(Tag tag) const;
  std::optional<std::string> string(Tag tag) const;
};

enum class Requirement { Image, Any };

/// Parses a little-endian DICOM stream: either Part 10 (128-byte preamble,
/// "DICM", explicit-VR file meta) or a bare implicit-VR dataset. With
/// Requirement::Image the Rows, Columns and PixelData elements must exist.
/// Throws MalformedPreamble, TruncatedElement, MalformedElement,
/// UnsupportedTransferSyntax or MissingRequiredTag.
Dataset parse_dicom(std::span<const std::uint8_t> bytes, Requirement requirement = Requirement::Image);
Dataset read_dicom_file(const std::filesystem::path& path, Requirement requirement = Requirement::Image);

/// Decoded frame geometry and raw stored pixel values of an image dataset.
struct ImageData {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t n_frames = 1;
  unsigned bits_stored = 16;
  bool is_signed = false;
  double rescale_slope = 1.0;
  double rescale_intercept = 0.0;
  std::vector<std::int32_t> stored;  // n_frames * rows * cols
};

ImageData decode_image(const Dataset& dataset);

/// How stored integers become velocities for one vendor. `full_scale` is
/// the rescaled magnitude M of the ScaledInteger range [-M, M-1]; when unset
/// it is |slope| * 2^(bits_stored-1).
struct PhaseMapping {
  double slope = 1.0;
  double intercept = 0.0;
  VendorConvention convention = VendorConvention::VelocityStored;
  double venc_cm_s = 0.0;
  int sign = 1;
  std::optional<double> full_scale;
  unsigned bits_stored = 12;
};

/// Converts stored values to velocity (cm/s), clamped to [-venc, venc].
/// Throws ConventionMismatch when inputs leave the convention's admissible
/// range by more than 1%.
std::vector<double> phase_to_velocity(std::span<const std::int32_t> stored, const PhaseMapping& mapping);

}  // namespace rtpc::dicom
