#include "dicom_writer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace rtpc::testing {

namespace {

void put_u16(Bytes& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v & 0xFF));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(Bytes& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

bool long_vr(const std::string& vr) {
  static const char* kLong[] = {"OB", "OD", "OF", "OL", "OV", "OW", "SQ", "SV", "UC", "UN", "UR", "UT", "UV"};
  return std::any_of(std::begin(kLong), std::end(kLong), [&](const char* v) { return vr == v; });
}

void put_header(Bytes& b, dicom::Tag tag, const std::string& vr, std::uint32_t length, bool explicit_vr) {
  put_u16(b, tag.group);
  put_u16(b, tag.element);
  if (explicit_vr) {
    b.push_back(static_cast<std::uint8_t>(vr[0]));
    b.push_back(static_cast<std::uint8_t>(vr[1]));
    if (long_vr(vr)) {
      put_u16(b, 0);
      put_u32(b, length);
    } else {
      put_u16(b, static_cast<std::uint16_t>(length));
    }
  } else {
    put_u32(b, length);
  }
}

std::string ds_text(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

DicomBuilder& DicomBuilder::put(Entry e) {
  remove(e.tag);
  entries_.push_back(std::move(e));
  return *this;
}

DicomBuilder& DicomBuilder::remove(dicom::Tag tag) {
  entries_.erase(std::remove_if(entries_.begin(), entries_.end(), [&](const Entry& x) { return x.tag == tag; }),
                 entries_.end());
  return *this;
}

DicomBuilder& DicomBuilder::str(dicom::Tag tag, const std::string& vr, const std::string& value) {
  Bytes b(value.begin(), value.end());
  if (b.size() % 2 != 0) b.push_back(vr == "UI" ? 0 : ' ');
  return put({tag, vr, std::move(b), {}, false});
}

DicomBuilder& DicomBuilder::us(dicom::Tag tag, std::uint16_t value) {
  Bytes b;
  put_u16(b, value);
  return put({tag, "US", std::move(b), {}, false});
}

DicomBuilder& DicomBuilder::ul(dicom::Tag tag, std::uint32_t value) {
  Bytes b;
  put_u32(b, value);
  return put({tag, "UL", std::move(b), {}, false});
}

DicomBuilder& DicomBuilder::fd(dicom::Tag tag, double value) {
  Bytes b(8);
  std::memcpy(b.data(), &value, 8);
  return put({tag, "FD", std::move(b), {}, false});
}

DicomBuilder& DicomBuilder::raw(dicom::Tag tag, const std::string& vr, Bytes value) {
  return put({tag, vr, std::move(value), {}, false});
}

DicomBuilder& DicomBuilder::pixels16(const std::vector<std::uint16_t>& values) {
  Bytes b;
  for (auto v : values) put_u16(b, v);
  return put({dicom::tags::kPixelData, "OW", std::move(b), {}, false});
}

DicomBuilder& DicomBuilder::sequence(dicom::Tag tag, std::vector<DicomBuilder> items, bool undefined_length) {
  return put({tag, "SQ", {}, std::move(items), undefined_length});
}

Bytes DicomBuilder::encode(bool explicit_vr) const {
  std::vector<const Entry*> sorted;
  for (const auto& e : entries_) sorted.push_back(&e);
  std::stable_sort(sorted.begin(), sorted.end(), [](const Entry* a, const Entry* b) { return a->tag < b->tag; });
  Bytes out;
  for (const Entry* e : sorted) {
    if (e->vr == "SQ") {
      Bytes body;
      for (const auto& item : e->items) {
        const Bytes ib = item.encode(explicit_vr);
        put_u16(body, 0xFFFE);
        put_u16(body, 0xE000);
        if (e->undefined_length) {
          put_u32(body, 0xFFFFFFFFu);
          body.insert(body.end(), ib.begin(), ib.end());
          put_u16(body, 0xFFFE);
          put_u16(body, 0xE00D);
          put_u32(body, 0);
        } else {
          put_u32(body, static_cast<std::uint32_t>(ib.size()));
          body.insert(body.end(), ib.begin(), ib.end());
        }
      }
      if (e->undefined_length) {
        put_u16(body, 0xFFFE);
        put_u16(body, 0xE0DD);
        put_u32(body, 0);
      }
      put_header(out, e->tag, "SQ", e->undefined_length ? 0xFFFFFFFFu : static_cast<std::uint32_t>(body.size()),
                 explicit_vr);
      out.insert(out.end(), body.begin(), body.end());
    } else {
      put_header(out, e->tag, e->vr, static_cast<std::uint32_t>(e->value.size()), explicit_vr);
      out.insert(out.end(), e->value.begin(), e->value.end());
    }
  }
  return out;
}

Bytes part10(const DicomBuilder& dataset, bool explicit_vr) {
  DicomBuilder meta;
  meta.raw({0x0002, 0x0001}, "OB", {0x00, 0x01});
  meta.str({0x0002, 0x0002}, "UI", "1.2.840.10008.5.1.4.1.1.4");
  meta.str({0x0002, 0x0003}, "UI", "1.2.3.4.5.6");
  meta.str({0x0002, 0x0010}, "UI", explicit_vr ? dicom::uids::kExplicitVrLittleEndian : dicom::uids::kImplicitVrLittleEndian);
  const Bytes meta_body = meta.encode(true);
  Bytes out(128, 0);
  out.insert(out.end(), {'D', 'I', 'C', 'M'});
  put_header(out, {0x0002, 0x0000}, "UL", 4, true);
  put_u32(out, static_cast<std::uint32_t>(meta_body.size()));
  out.insert(out.end(), meta_body.begin(), meta_body.end());
  const Bytes body = dataset.encode(explicit_vr);
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

DicomBuilder pc_dataset(const PcImageSpec& s) {
  namespace t = dicom::tags;
  DicomBuilder b;
  b.str(t::kImageType, "CS", s.phase ? "ORIGINAL\\PRIMARY\\P\\ND" : "ORIGINAL\\PRIMARY\\M\\ND");
  if (s.complex_component) b.str(t::kComplexImageComponent, "CS", s.phase ? "PHASE" : "MAGNITUDE");
  if (s.frame_time_ms) b.str(t::kFrameTime, "DS", ds_text(*s.frame_time_ms));
  if (s.venc) b.fd(t::kVelocityEncodingMaximum, *s.venc);
  b.str(t::kStudyInstanceUid, "UI", s.study_uid);
  b.str(t::kInstanceNumber, "IS", std::to_string(s.instance_number));
  if (s.temporal_index) b.ul(t::kTemporalPositionIndex, *s.temporal_index);
  b.us(t::kSamplesPerPixel, 1);
  if (s.n_frames != 1) b.str(t::kNumberOfFrames, "IS", std::to_string(s.n_frames));
  b.us(t::kRows, static_cast<std::uint16_t>(s.rows));
  b.us(t::kColumns, static_cast<std::uint16_t>(s.cols));
  b.str(t::kPixelSpacing, "DS", ds_text(s.spacing_row_mm) + "\\" + ds_text(s.spacing_col_mm));
  b.us(t::kBitsAllocated, 16);
  b.us(t::kBitsStored, static_cast<std::uint16_t>(s.bits_stored));
  b.us(t::kPixelRepresentation, 0);
  b.str(t::kRescaleIntercept, "DS", ds_text(s.intercept));
  b.str(t::kRescaleSlope, "DS", ds_text(s.slope));
  std::vector<std::uint16_t> px = s.stored;
  if (px.empty()) px.assign(s.rows * s.cols * s.n_frames, 0);
  b.pixels16(px);
  return b;
}

Bytes pc_image(const PcImageSpec& s) {
  const DicomBuilder b = pc_dataset(s);
  return s.part10 ? part10(b, s.explicit_vr) : b.encode(s.explicit_vr);
}

Bytes dicomdir(const std::vector<std::vector<std::string>>& referenced_files) {
  std::vector<DicomBuilder> records;
  for (const auto& parts : referenced_files) {
    DicomBuilder r;
    r.str({0x0004, 0x1430}, "CS", "IMAGE");
    std::string id;
    for (std::size_t i = 0; i < parts.size(); ++i) id += (i ? "\\" : "") + parts[i];
    r.str(dicom::tags::kReferencedFileId, "CS", id);
    records.push_back(std::move(r));
  }
  DicomBuilder root;
  root.str({0x0004, 0x1130}, "CS", "STUDY");
  root.sequence(dicom::tags::kDirectoryRecordSequence, std::move(records), true);
  return part10(root, true);
}

void write_bytes(const std::filesystem::path& path, const Bytes& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::uint16_t scaled_code(double v, double venc) {
  const double code = std::round((v / venc * 4096.0 + 4096.0) / 2.0);
  return static_cast<std::uint16_t>(std::clamp(code, 0.0, 4095.0));
}

}  // namespace rtpc::testing
