#include "rtpc/dicom.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <string_view>

#include "rtpc/error.hpp"

namespace rtpc::dicom {

std::string to_string(Tag tag) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "(%04X,%04X)", tag.group, tag.element);
  return buf;
}

namespace {

constexpr std::array<std::string_view, 13> kLongVrs = {"OB", "OD", "OF", "OL", "OV", "OW", "SQ",
                                                       "SV", "UC", "UN", "UR", "UT", "UV"};

bool is_long_vr(std::string_view vr) {
  return std::find(kLongVrs.begin(), kLongVrs.end(), vr) != kLongVrs.end();
}

bool looks_like_vr(std::uint8_t a, std::uint8_t b) { return a >= 'A' && a <= 'Z' && b >= 'A' && b <= 'Z'; }

// VRs for the tags this reader interprets, used when the stream is implicit.
std::string_view implied_vr(Tag tag) {
  switch (tag.key()) {
    case tags::kSamplesPerPixel.key():
    case tags::kRows.key():
    case tags::kColumns.key():
    case tags::kBitsAllocated.key():
    case tags::kBitsStored.key():
    case tags::kPixelRepresentation.key(): return "US";
    case tags::kNumberOfFrames.key():
    case tags::kInstanceNumber.key():
    case tags::kTemporalPositionIdentifier.key(): return "IS";
    case tags::kPixelSpacing.key():
    case tags::kRescaleIntercept.key():
    case tags::kRescaleSlope.key():
    case tags::kFrameTime.key(): return "DS";
    case tags::kVelocityEncodingMaximum.key(): return "FD";
    case tags::kTemporalPositionIndex.key(): return "UL";
    case tags::kImageType.key():
    case tags::kComplexImageComponent.key():
    case tags::kReferencedFileId.key(): return "CS";
    case tags::kTransferSyntaxUid.key():
    case tags::kStudyInstanceUid.key(): return "UI";
    case tags::kDirectoryRecordSequence.key(): return "SQ";
    case tags::kPixelData.key(): return "OW";
    default: return "";
  }
}

constexpr std::uint32_t kUndefinedLength = 0xFFFFFFFFu;

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  bool at_end() const { return pos_ >= bytes_.size(); }

  void require(std::size_t n, Tag tag) const {
    if (remaining() < n) fail(ErrorCode::TruncatedElement, "element " + to_string(tag) + " runs past end of data");
  }
  std::uint16_t u16(Tag tag) {
    require(2, tag);
    const std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32(Tag tag) {
    require(4, tag);
    const std::uint32_t v = std::uint32_t{bytes_[pos_]} | (std::uint32_t{bytes_[pos_ + 1]} << 8) |
                            (std::uint32_t{bytes_[pos_ + 2]} << 16) | (std::uint32_t{bytes_[pos_ + 3]} << 24);
    pos_ += 4;
    return v;
  }
  std::span<const std::uint8_t> take(std::size_t n, Tag tag) {
    require(n, tag);
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  std::uint16_t peek_group() const {
    return remaining() < 2 ? 0 : static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
  }
  Tag peek_tag() const {
    if (remaining() < 4) return {};
    return {static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8)),
            static_cast<std::uint16_t>(bytes_[pos_ + 2] | (bytes_[pos_ + 3] << 8))};
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

class Parser {
 public:
  Parser(Reader& reader, bool explicit_vr) : reader_(reader), explicit_vr_(explicit_vr) {}

  // Parses elements until `end` (absolute offset), an item delimiter, or the
  // pixel data element. Returns true when the pixel data was read.
  bool parse_dataset(Dataset& out, std::size_t end, bool in_item, int depth) {
    if (depth > 16) fail(ErrorCode::MalformedElement, "sequence nesting too deep");
    std::optional<Tag> previous;
    while (reader_.pos() < end) {
      if (reader_.remaining() < 4) fail(ErrorCode::TruncatedElement, "element header runs past end of data");
      const Tag tag = reader_.peek_tag();
      if (tag == tags::kItemDelimitation) {
        if (!in_item) fail(ErrorCode::MalformedElement, "item delimiter outside an item");
        reader_.u32(tag);
        reader_.u32(tag);
        return false;
      }
      if (tag.group == 0xFFFE) fail(ErrorCode::MalformedElement, "unexpected item tag " + to_string(tag));
      if (previous && !(*previous < tag))
        fail(ErrorCode::MalformedElement, "tags not increasing at " + to_string(tag));
      previous = tag;
      Element element = parse_element(depth);
      const bool pixel = element.tag == tags::kPixelData;
      out.elements.push_back(std::move(element));
      if (pixel && depth == 0) return true;
    }
    if (reader_.pos() > end) fail(ErrorCode::MalformedElement, "element overruns its container");
    return false;
  }

  Element parse_element(int depth) {
    Element e;
    e.tag.group = reader_.u16(e.tag);
    e.tag.element = reader_.u16(e.tag);
    std::uint32_t length = 0;
    if (explicit_vr_) {
      auto vr = reader_.take(2, e.tag);
      if (!looks_like_vr(vr[0], vr[1])) fail(ErrorCode::MalformedElement, "invalid VR at " + to_string(e.tag));
      e.vr.assign(vr.begin(), vr.end());
      if (is_long_vr(e.vr)) {
        reader_.u16(e.tag);
        length = reader_.u32(e.tag);
      } else {
        length = reader_.u16(e.tag);
      }
    } else {
      e.vr = std::string(implied_vr(e.tag));
      length = reader_.u32(e.tag);
    }

    bool sequence = e.vr == "SQ";
    if (!sequence && length == kUndefinedLength) {
      if (e.tag == tags::kPixelData)
        fail(ErrorCode::UnsupportedTransferSyntax, "encapsulated (compressed) pixel data is not supported");
      if (!e.vr.empty() && e.vr != "UN")
        fail(ErrorCode::MalformedElement, "undefined length on non-sequence " + to_string(e.tag));
      sequence = true;
    }
    if (!sequence && !explicit_vr_ && e.vr.empty() && length >= 8 && reader_.remaining() >= 4 &&
        reader_.peek_tag() == tags::kItem) {
      sequence = true;
    }
    if (sequence) {
      if (e.vr.empty()) e.vr = "SQ";
      parse_sequence(e, length, depth);
    } else {
      auto value = reader_.take(length, e.tag);
      e.value.assign(value.begin(), value.end());
    }
    return e;
  }


 private:
  void parse_sequence(Element& e, std::uint32_t length, int depth) {
    const bool undefined = length == kUndefinedLength;
    if (!undefined) reader_.require(length, e.tag);
    const std::size_t end = undefined ? SIZE_MAX : reader_.pos() + length;
    while (reader_.pos() < end) {
      const Tag item_tag{reader_.u16(e.tag), reader_.u16(e.tag)};
      const std::uint32_t item_length = reader_.u32(e.tag);
      if (item_tag == tags::kSequenceDelimitation) {
        if (!undefined) fail(ErrorCode::MalformedElement, "sequence delimiter in defined-length sequence");
        return;
      }
      if (item_tag != tags::kItem) fail(ErrorCode::MalformedElement, "expected item in sequence " + to_string(e.tag));
      Dataset item;
      if (item_length == kUndefinedLength) {
        parse_dataset(item, SIZE_MAX, true, depth + 1);
      } else {
        reader_.require(item_length, item_tag);
        parse_dataset(item, reader_.pos() + item_length, true, depth + 1);
      }
      e.items.push_back(std::move(item));
    }
    if (reader_.pos() != end) fail(ErrorCode::MalformedElement, "sequence length mismatch at " + to_string(e.tag));
  }

  Reader& reader_;
  bool explicit_vr_;
};

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == ' ' || s.back() == '\0')) s.pop_back();
  std::size_t first = 0;
  while (first < s.size() && s[first] == ' ') ++first;
  return s.substr(first);
}

// A bare dataset is accepted only if its first element header is plausible:
// even group in the standard range and a value length that fits the data.
std::optional<bool> detect_bare_syntax(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) return std::nullopt;
  const std::uint16_t group = static_cast<std::uint16_t>(bytes[0] | (bytes[1] << 8));
  if (group % 2 != 0 || group < 0x0002 || group > 0x7FE0) return std::nullopt;
  if (looks_like_vr(bytes[4], bytes[5])) {
    const std::string_view vr(reinterpret_cast<const char*>(bytes.data() + 4), 2);
    if (is_long_vr(vr)) return bytes.size() >= 12 ? std::optional<bool>(true) : std::nullopt;
    const std::size_t length = bytes[6] | (bytes[7] << 8);
    if (length <= bytes.size() - 8) return true;
  }
  const std::uint32_t length = std::uint32_t{bytes[4]} | (std::uint32_t{bytes[5]} << 8) |
                               (std::uint32_t{bytes[6]} << 16) | (std::uint32_t{bytes[7]} << 24);
  if (length != kUndefinedLength && length <= bytes.size() - 8) return false;
  return std::nullopt;
}

}  // namespace

std::string Element::as_string() const { return trim(std::string(value.begin(), value.end())); }

std::vector<std::string> Element::as_strings() const {
  std::vector<std::string> out;
  const std::string s(value.begin(), value.end());
  std::size_t start = 0;
  while (true) {
    const auto bs = s.find('\\', start);
    out.push_back(trim(s.substr(start, bs == std::string::npos ? std::string::npos : bs - start)));
    if (bs == std::string::npos) break;
    start = bs + 1;
  }
  return out;
}

std::vector<double> Element::as_numbers() const {
  std::vector<double> out;
  auto read_le = [&](std::size_t width, auto decode) {
    for (std::size_t i = 0; i + width <= value.size(); i += width) out.push_back(decode(value.data() + i));
  };
  if (vr == "US") {
    read_le(2, [](const std::uint8_t* p) { return double(std::uint16_t(p[0] | (p[1] << 8))); });
  } else if (vr == "SS") {
    read_le(2, [](const std::uint8_t* p) { return double(std::int16_t(p[0] | (p[1] << 8))); });
  } else if (vr == "UL" || vr == "SL") {
    const bool is_signed = vr == "SL";
    read_le(4, [is_signed](const std::uint8_t* p) {
      const std::uint32_t u = std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
                              (std::uint32_t{p[3]} << 24);
      return is_signed ? double(static_cast<std::int32_t>(u)) : double(u);
    });
  } else if (vr == "FL") {
    read_le(4, [](const std::uint8_t* p) {
      float f;
      std::memcpy(&f, p, 4);
      return double(f);
    });
  } else if (vr == "FD") {
    read_le(8, [](const std::uint8_t* p) {
      double d;
      std::memcpy(&d, p, 8);
      return d;
    });
  } else {
    for (const auto& token : as_strings()) {
      if (token.empty()) continue;
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
      if (ec == std::errc() && ptr == token.data() + token.size()) out.push_back(v);
    }
  }
  return out;
}

std::optional<double> Element::as_number() const {
  auto all = as_numbers();
  if (all.empty()) return std::nullopt;
  return all.front();
}

const Element* Dataset::find(Tag tag) const {
  for (const auto& e : elements) {
    if (e.tag == tag) return &e;
  }
  return nullptr;
}

std::optional<double> Dataset::number(Tag tag) const {
  const auto* e = find(tag);
  return e ? e->as_number() : std::nullopt;
}

std::optional<std::string> Dataset::string(Tag tag) const {
  const auto* e = find(tag);
  if (!e) return std::nullopt;
  return e->as_string();
}

Dataset parse_dicom(std::span<const std::uint8_t> bytes, Requirement requirement) {
  Dataset ds;
  bool part10 = bytes.size() >= 132 && std::memcmp(bytes.data() + 128, "DICM", 4) == 0;
  std::span<const std::uint8_t> body = bytes;
  bool explicit_vr = false;

  if (part10) {
    Reader meta_reader(bytes.subspan(132));
    Parser meta(meta_reader, true);
    Dataset meta_ds;
    std::size_t meta_end = 0;
    while (!meta_reader.at_end() && meta_reader.peek_group() == 0x0002) {
      // File meta is always explicit VR little endian.
      meta_ds.elements.push_back(meta.parse_element(1));
      meta_end = meta_reader.pos();
    }
    ds.transfer_syntax_uid = meta_ds.string(tags::kTransferSyntaxUid).value_or(uids::kExplicitVrLittleEndian);
    for (auto& e : meta_ds.elements) ds.elements.push_back(std::move(e));
    body = bytes.subspan(132 + meta_end);
    if (ds.transfer_syntax_uid == uids::kImplicitVrLittleEndian) {
      explicit_vr = false;
    } else if (ds.transfer_syntax_uid == uids::kExplicitVrLittleEndian) {
      explicit_vr = true;
    } else {
      fail(ErrorCode::UnsupportedTransferSyntax, "transfer syntax " + ds.transfer_syntax_uid);
    }
  } else {
    const auto syntax = detect_bare_syntax(bytes);
    if (!syntax) fail(ErrorCode::MalformedPreamble, "no DICM magic and not a parseable bare dataset");
    explicit_vr = *syntax;
    ds.transfer_syntax_uid = explicit_vr ? uids::kExplicitVrLittleEndian : uids::kImplicitVrLittleEndian;
  }

  Reader reader(body);
  Parser parser(reader, explicit_vr);
  Dataset main;
  parser.parse_dataset(main, body.size(), false, 0);
  for (auto& e : main.elements) ds.elements.push_back(std::move(e));

  if (requirement == Requirement::Image) {
    for (Tag t : {tags::kRows, tags::kColumns, tags::kPixelData}) {
      if (!ds.find(t)) fail(ErrorCode::MissingRequiredTag, "missing " + to_string(t));
    }
  }
  return ds;
}

Dataset read_dicom_file(const std::filesystem::path& path, Requirement requirement) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::FileNotFound, "file not found: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return parse_dicom(bytes, requirement);
  } catch (const Error& e) {
    throw Error(e.code(), path.filename().string() + ": " + std::string(e.what()));
  }
}

ImageData decode_image(const Dataset& ds) {
  ImageData img;
  auto need = [&](Tag tag) {
    const auto v = ds.number(tag);
    if (!v) fail(ErrorCode::MissingRequiredTag, "missing " + to_string(tag));
    return *v;
  };
  img.rows = static_cast<std::size_t>(need(tags::kRows));
  img.cols = static_cast<std::size_t>(need(tags::kColumns));
  img.n_frames = static_cast<std::size_t>(ds.number(tags::kNumberOfFrames).value_or(1.0));
  const unsigned bits_allocated = static_cast<unsigned>(ds.number(tags::kBitsAllocated).value_or(16.0));
  img.bits_stored = static_cast<unsigned>(ds.number(tags::kBitsStored).value_or(bits_allocated));
  img.is_signed = ds.number(tags::kPixelRepresentation).value_or(0.0) != 0.0;
  img.rescale_slope = ds.number(tags::kRescaleSlope).value_or(1.0);
  img.rescale_intercept = ds.number(tags::kRescaleIntercept).value_or(0.0);
  if (ds.number(tags::kSamplesPerPixel).value_or(1.0) != 1.0)
    fail(ErrorCode::MalformedElement, "only single-sample (grayscale) pixels are supported");
  if (bits_allocated != 16 && bits_allocated != 8)
    fail(ErrorCode::MalformedElement, "unsupported bits allocated " + std::to_string(bits_allocated));
  if (img.rows == 0 || img.cols == 0 || img.n_frames == 0 || img.bits_stored == 0 || img.bits_stored > bits_allocated)
    fail(ErrorCode::MalformedElement, "invalid image geometry");

  const auto* pixels = ds.find(tags::kPixelData);
  if (!pixels) fail(ErrorCode::MissingRequiredTag, "missing " + to_string(tags::kPixelData));
  const std::size_t count = img.rows * img.cols * img.n_frames;
  const std::size_t width = bits_allocated / 8;
  if (pixels->value.size() < count * width)
    fail(ErrorCode::MalformedElement, "pixel data holds " + std::to_string(pixels->value.size()) + " bytes, need " +
                                          std::to_string(count * width));
  img.stored.resize(count);
  const std::uint32_t mask = (img.bits_stored >= 32) ? 0xFFFFFFFFu : ((1u << img.bits_stored) - 1u);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t raw = width == 2 ? std::uint32_t(pixels->value[2 * i] | (pixels->value[2 * i + 1] << 8))
                                   : std::uint32_t(pixels->value[i]);
    raw &= mask;
    std::int32_t v = static_cast<std::int32_t>(raw);
    if (img.is_signed && (raw & (1u << (img.bits_stored - 1)))) v -= static_cast<std::int32_t>(1u << img.bits_stored);
    img.stored[i] = v;
  }
  return img;
}

std::vector<double> phase_to_velocity(std::span<const std::int32_t> stored, const PhaseMapping& m) {
  if (!(m.venc_cm_s > 0.0)) fail(ErrorCode::InvalidArgument, "venc must be positive");
  if (m.sign != 1 && m.sign != -1) fail(ErrorCode::InvalidArgument, "phase sign must be +1 or -1");
  const double venc = m.venc_cm_s;
  const double sign = m.sign;
  std::vector<double> out(stored.size());

  double lo = 0.0;
  double hi = 0.0;
  double scale = 1.0;  // velocity per rescaled unit
  switch (m.convention) {
    case VendorConvention::PhaseRadians:
      lo = -std::numbers::pi;
      hi = std::numbers::pi;
      scale = venc / std::numbers::pi;
      break;
    case VendorConvention::ScaledInteger: {
      const double full = m.full_scale.value_or(std::abs(m.slope) * std::ldexp(1.0, static_cast<int>(m.bits_stored) - 1));
      if (!(full > 0.0)) fail(ErrorCode::InvalidArgument, "full scale must be positive");
      lo = -full;
      hi = full - std::abs(m.slope);
      scale = venc / full;
      break;
    }
    case VendorConvention::VelocityStored:
      lo = -venc;
      hi = venc;
      scale = 1.0;
      break;
  }
  const double slack = 0.01 * (hi - lo);
  for (std::size_t i = 0; i < stored.size(); ++i) {
    const double value = m.slope * static_cast<double>(stored[i]) + m.intercept;
    if (value < lo - slack || value > hi + slack)
      fail(ErrorCode::ConventionMismatch, "stored value " + std::to_string(stored[i]) + " outside the " +
                                              std::string(to_string(m.convention)) + " range");
    out[i] = std::clamp(sign * scale * value, -venc, venc);
  }
  return out;
}

}  // namespace rtpc::dicom
