#include "rtpc/portable.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <json.hpp>
#include <string>

#include "rtpc/error.hpp"

namespace rtpc::portable {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little, "the .rtp writer assumes a little-endian host");

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  out.insert(out.end(), raw, raw + sizeof(T));
}

template <typename T>
T get(std::span<const std::uint8_t> bytes, std::size_t& pos, const char* what) {
  if (bytes.size() - pos < sizeof(T)) fail(ErrorCode::MalformedFile, std::string("file ends inside ") + what);
  T value;
  std::memcpy(&value, bytes.data() + pos, sizeof(T));
  pos += sizeof(T);
  return value;
}

void put_payload(std::vector<std::uint8_t>& out, std::span<const double> samples) {
  out.reserve(out.size() + samples.size() * sizeof(float));
  for (double v : samples) put(out, static_cast<float>(v));
}

std::uint32_t crc_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large payloads in chunks.
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - pos, 1u << 30);
    crc = crc32(crc, bytes.data() + pos, static_cast<uInt>(n));
    pos += n;
  }
  return static_cast<std::uint32_t>(crc);
}

json header_json(const SeriesHeader& h) {
  return json{{"n_frames", h.n_frames},
              {"rows", h.rows},
              {"cols", h.cols},
              {"pixel_spacing_mm", {h.pixel_spacing_mm.row_mm, h.pixel_spacing_mm.col_mm}},
              {"frame_duration_ms", h.frame_duration_ms},
              {"venc_cm_s", h.venc_cm_s},
              {"vendor_convention", std::string(to_string(h.vendor_convention))}};
}

SeriesHeader header_from_json(const json& j) {
  SeriesHeader h;
  try {
    h.n_frames = j.at("n_frames").get<std::size_t>();
    h.rows = j.at("rows").get<std::size_t>();
    h.cols = j.at("cols").get<std::size_t>();
    const auto& sp = j.at("pixel_spacing_mm");
    if (!sp.is_array() || sp.size() != 2) fail(ErrorCode::MalformedFile, "pixel_spacing_mm must be [row, col]");
    h.pixel_spacing_mm = {sp[0].get<double>(), sp[1].get<double>()};
    h.frame_duration_ms = j.at("frame_duration_ms").get<double>();
    h.venc_cm_s = j.at("venc_cm_s").get<double>();
    if (j.contains("vendor_convention"))
      h.vendor_convention = parse_vendor_convention(j.at("vendor_convention").get<std::string>());
  } catch (const json::exception& e) {
    fail(ErrorCode::MalformedFile, std::string("bad header: ") + e.what());
  } catch (const Error& e) {
    fail(ErrorCode::MalformedFile, std::string("bad header: ") + e.what());
  }
  try {
    h.validate();
  } catch (const Error& e) {
    fail(ErrorCode::MalformedFile, std::string("bad header: ") + e.what());
  }
  return h;
}

}  // namespace

std::vector<std::uint8_t> encode_portable(const ingest::SeriesPair& series) {
  const SeriesHeader& h = series.velocity.header();
  if (!h.same_geometry(series.magnitude.header()))
    fail(ErrorCode::GeometryMismatch, "velocity and magnitude headers differ");
  const std::string header = header_json(h).dump();

  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put(out, kFormatVersion);
  put(out, static_cast<std::uint32_t>(header.size()));
  out.insert(out.end(), header.begin(), header.end());
  const std::size_t payload_start = out.size();
  put_payload(out, series.velocity.samples());
  put_payload(out, series.magnitude.samples());
  const std::uint32_t crc = crc_of(std::span(out).subspan(payload_start));
  put(out, crc);
  return out;
}

ingest::SeriesPair decode_portable(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) fail(ErrorCode::BadMagic, "not an .rtp file");
  std::size_t pos = 4;
  const auto version = get<std::uint16_t>(bytes, pos, "version");
  if (version != kFormatVersion) fail(ErrorCode::VersionUnsupported, "format version " + std::to_string(version));
  const auto header_len = get<std::uint32_t>(bytes, pos, "header length");
  if (bytes.size() - pos < header_len) fail(ErrorCode::MalformedFile, "file ends inside header");
  json j;
  try {
    j = json::parse(bytes.begin() + static_cast<long>(pos), bytes.begin() + static_cast<long>(pos + header_len));
  } catch (const json::exception& e) {
    fail(ErrorCode::MalformedFile, std::string("header is not JSON: ") + e.what());
  }
  pos += header_len;
  const SeriesHeader h = header_from_json(j);

  const std::size_t n = h.sample_count();
  const std::size_t payload_bytes = 2 * n * sizeof(float);
  if (bytes.size() - pos != payload_bytes + sizeof(std::uint32_t))
    fail(ErrorCode::MalformedFile, "payload size does not match header");
  const auto payload = bytes.subspan(pos, payload_bytes);
  std::size_t crc_pos = pos + payload_bytes;
  const auto stored_crc = get<std::uint32_t>(bytes, crc_pos, "checksum");
  if (crc_of(payload) != stored_crc) fail(ErrorCode::ChecksumMismatch, "payload CRC32 mismatch");

  std::vector<double> velocity(n);
  std::vector<double> magnitude(n);
  for (std::size_t i = 0; i < n; ++i) velocity[i] = get<float>(bytes, pos, "velocity");
  for (std::size_t i = 0; i < n; ++i) magnitude[i] = get<float>(bytes, pos, "magnitude");
  try {
    return ingest::SeriesPair{VelocitySeries(h, std::move(velocity)), MagnitudeSeries(h, std::move(magnitude))};
  } catch (const Error& e) {
    fail(ErrorCode::MalformedFile, std::string("invalid samples: ") + e.what());
  }
}

void write_portable(const ingest::SeriesPair& series, const fs::path& path) {
  const auto bytes = encode_portable(series);
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot open " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::IoError, "write failed: " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) fail(ErrorCode::IoError, "rename to " + path.string() + ": " + ec.message());
}

ingest::SeriesPair read_portable(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::FileNotFound, "file not found: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_portable(bytes);
}

}  // namespace rtpc::portable
