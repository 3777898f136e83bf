#pragma once

#include <filesystem>

#include "rtpc/ingest.hpp"

namespace rtpc::portable {

inline constexpr char kMagic[4] = {'R', 'T', 'P', 'C'};
inline constexpr std::uint16_t kFormatVersion = 1;

/// Writes the pair in the .rtp layout: magic, u16 version, u32-prefixed
/// canonical JSON header, float32 velocity, float32 magnitude, CRC32 of both
/// payloads. All integers little endian. The write is atomic (temp + rename).
void write_portable(const ingest::SeriesPair& series, const std::filesystem::path& path);

/// Throws FileNotFound, BadMagic, VersionUnsupported, MalformedFile or
/// ChecksumMismatch.
ingest::SeriesPair read_portable(const std::filesystem::path& path);

/// Byte-level variants used by the file functions.
std::vector<std::uint8_t> encode_portable(const ingest::SeriesPair& series);
ingest::SeriesPair decode_portable(std::span<const std::uint8_t> bytes);

}  // namespace rtpc::portable
