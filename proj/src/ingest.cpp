#include "rtpc/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "rtpc/dicom.hpp"
#include "rtpc/error.hpp"

namespace rtpc::ingest {

namespace fs = std::filesystem;
using dicom::Dataset;

void IngestConfig::validate() const {
  if (venc_override_cm_s && !(*venc_override_cm_s > 0.0)) fail(ErrorCode::ConfigInvalid, "venc override must be > 0");
  if (frame_duration_override_ms && !(*frame_duration_override_ms > 0.0))
    fail(ErrorCode::ConfigInvalid, "frame duration override must be > 0");
  if (phase_sign != 1 && phase_sign != -1) fail(ErrorCode::ConfigInvalid, "phase sign must be +1 or -1");
}

namespace {

enum class Stream { Phase, Magnitude, Unknown };

struct LoadedFile {
  fs::path path;
  Dataset dataset;
  dicom::ImageData image;
  Stream stream = Stream::Unknown;
  std::optional<double> temporal_index;
  std::optional<double> instance_number;
};

Stream classify(const Dataset& ds) {
  if (auto cic = ds.string(dicom::tags::kComplexImageComponent)) {
    if (*cic == "PHASE") return Stream::Phase;
    if (*cic == "MAGNITUDE") return Stream::Magnitude;
  }
  if (const auto* e = ds.find(dicom::tags::kImageType)) {
    for (const auto& token : e->as_strings()) {
      if (token == "P" || token == "PHASE" || token == "VELOCITY") return Stream::Phase;
      if (token == "M" || token == "MAGNITUDE") return Stream::Magnitude;
    }
  }
  return Stream::Unknown;
}

bool is_dicomdir(const Dataset& ds) { return ds.find(dicom::tags::kDirectoryRecordSequence) != nullptr; }

std::vector<fs::path> files_from_dicomdir(const fs::path& dicomdir, const Dataset& ds) {
  std::vector<fs::path> out;
  const auto* seq = ds.find(dicom::tags::kDirectoryRecordSequence);
  const dicom::Tag record_type{0x0004, 0x1430};
  for (const auto& item : seq->items) {
    if (auto type = item.string(record_type); type && *type != "IMAGE") continue;
    const auto* ref = item.find(dicom::tags::kReferencedFileId);
    if (!ref) continue;
    fs::path p = dicomdir.parent_path();
    for (const auto& part : ref->as_strings()) p /= part;
    out.push_back(p);
  }
  return out;
}

std::vector<fs::path> sorted_regular_files(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file()) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<LoadedFile> load_image_file(const fs::path& path, bool skip_non_dicom) {
  LoadedFile f;
  f.path = path;
  try {
    f.dataset = dicom::read_dicom_file(path, dicom::Requirement::Any);
  } catch (const Error& e) {
    if (skip_non_dicom && e.code() == ErrorCode::MalformedPreamble) return std::nullopt;
    throw;
  }
  if (is_dicomdir(f.dataset)) return std::nullopt;
  for (dicom::Tag t : {dicom::tags::kRows, dicom::tags::kColumns, dicom::tags::kPixelData}) {
    if (!f.dataset.find(t))
      fail(ErrorCode::MissingRequiredTag, path.filename().string() + ": missing " + dicom::to_string(t));
  }
  f.image = dicom::decode_image(f.dataset);
  f.stream = classify(f.dataset);
  f.temporal_index = f.dataset.number(dicom::tags::kTemporalPositionIndex);
  if (!f.temporal_index) f.temporal_index = f.dataset.number(dicom::tags::kTemporalPositionIdentifier);
  f.instance_number = f.dataset.number(dicom::tags::kInstanceNumber);
  return f;
}

struct Frame {
  const LoadedFile* file;
  std::size_t index_in_file;
};

std::vector<Frame> ordered_frames(std::vector<const LoadedFile*> files) {
  const bool all_temporal = std::all_of(files.begin(), files.end(), [](auto* f) { return f->temporal_index.has_value(); });
  const bool all_instance = std::all_of(files.begin(), files.end(), [](auto* f) { return f->instance_number.has_value(); });
  std::stable_sort(files.begin(), files.end(), [&](const LoadedFile* a, const LoadedFile* b) {
    if (all_temporal && *a->temporal_index != *b->temporal_index) return *a->temporal_index < *b->temporal_index;
    if (all_instance && *a->instance_number != *b->instance_number) return *a->instance_number < *b->instance_number;
    return a->path.filename() < b->path.filename();
  });
  std::vector<Frame> frames;
  for (const auto* f : files) {
    for (std::size_t i = 0; i < f->image.n_frames; ++i) frames.push_back({f, i});
  }
  return frames;
}

PixelSpacing spacing_of(const Dataset& ds) {
  if (const auto* e = ds.find(dicom::tags::kPixelSpacing)) {
    const auto v = e->as_numbers();
    if (v.size() >= 2) return {v[0], v[1]};
  }
  return {1.0, 1.0};
}

}  // namespace

SeriesPair load_series(const fs::path& path, const IngestConfig& config) {
  config.validate();
  if (!fs::exists(path)) fail(ErrorCode::FileNotFound, path.string());

  std::vector<fs::path> candidates;
  bool skip_non_dicom = true;
  if (fs::is_directory(path)) {
    const fs::path index = path / "DICOMDIR";
    if (fs::exists(index)) {
      candidates = files_from_dicomdir(index, dicom::read_dicom_file(index, dicom::Requirement::Any));
      skip_non_dicom = false;
    } else {
      candidates = sorted_regular_files(path);
    }
  } else {
    const Dataset first = dicom::read_dicom_file(path, dicom::Requirement::Any);
    if (is_dicomdir(first)) {
      candidates = files_from_dicomdir(path, first);
      skip_non_dicom = false;
    } else {
      // A single multi-frame file: pair it with the same-study files beside it.
      const auto study = first.string(dicom::tags::kStudyInstanceUid);
      for (const auto& p : sorted_regular_files(path.parent_path().empty() ? fs::path(".") : path.parent_path())) {
        if (fs::equivalent(p, path)) {
          candidates.push_back(p);
          continue;
        }
        if (!study) continue;
        try {
          const auto ds = dicom::read_dicom_file(p, dicom::Requirement::Any);
          if (ds.string(dicom::tags::kStudyInstanceUid) == study) candidates.push_back(p);
        } catch (const Error&) {
        }
      }
    }
  }

  std::vector<LoadedFile> files;
  for (const auto& p : candidates) {
    if (auto f = load_image_file(p, skip_non_dicom)) files.push_back(std::move(*f));
  }

  std::vector<const LoadedFile*> phase_files;
  std::vector<const LoadedFile*> magnitude_files;
  for (const auto& f : files) {
    if (f.stream == Stream::Phase) phase_files.push_back(&f);
    if (f.stream == Stream::Magnitude) magnitude_files.push_back(&f);
  }
  if (phase_files.empty()) fail(ErrorCode::UnpairedFrames, "no phase images found");
  if (magnitude_files.empty()) fail(ErrorCode::UnpairedFrames, "no magnitude images found");

  const auto& ref = *phase_files.front();
  const PixelSpacing spacing = spacing_of(ref.dataset);
  for (const auto& f : files) {
    if (f.stream == Stream::Unknown) continue;
    if (f.image.rows != ref.image.rows || f.image.cols != ref.image.cols || !(spacing_of(f.dataset) == spacing))
      fail(ErrorCode::MixedGeometry, f.path.filename().string() + " differs in rows/cols/spacing");
  }

  const auto phase_frames = ordered_frames(phase_files);
  const auto magnitude_frames = ordered_frames(magnitude_files);
  if (phase_frames.size() != magnitude_frames.size())
    fail(ErrorCode::UnpairedFrames, std::to_string(phase_frames.size()) + " phase frames vs " +
                                        std::to_string(magnitude_frames.size()) + " magnitude frames");

  SeriesHeader header;
  header.n_frames = phase_frames.size();
  header.rows = ref.image.rows;
  header.cols = ref.image.cols;
  header.pixel_spacing_mm = spacing;
  header.vendor_convention = config.vendor_convention;
  if (config.venc_override_cm_s) {
    header.venc_cm_s = *config.venc_override_cm_s;
  } else if (auto venc = ref.dataset.number(dicom::tags::kVelocityEncodingMaximum)) {
    header.venc_cm_s = *venc;
  } else {
    fail(ErrorCode::MissingVenc, "no VENC tag and no override");
  }
  if (config.frame_duration_override_ms) {
    header.frame_duration_ms = *config.frame_duration_override_ms;
  } else if (auto ft = ref.dataset.number(dicom::tags::kFrameTime)) {
    header.frame_duration_ms = *ft;
  } else {
    fail(ErrorCode::MissingRequiredTag, "no frame time " + dicom::to_string(dicom::tags::kFrameTime) + " and no override");
  }
  header.validate();

  const std::size_t npix = header.frame_pixels();
  std::vector<double> velocity(header.sample_count());
  std::vector<double> magnitude(header.sample_count());
  for (std::size_t t = 0; t < header.n_frames; ++t) {
    const auto& pf = phase_frames[t];
    const auto& img = pf.file->image;
    dicom::PhaseMapping mapping;
    mapping.slope = img.rescale_slope;
    mapping.intercept = img.rescale_intercept;
    mapping.convention = config.vendor_convention;
    mapping.venc_cm_s = header.venc_cm_s;
    mapping.sign = config.phase_sign;
    mapping.bits_stored = img.bits_stored;
    const std::span<const std::int32_t> stored(img.stored.data() + pf.index_in_file * npix, npix);
    const auto v = dicom::phase_to_velocity(stored, mapping);
    for (std::size_t i = 0; i < npix; ++i) velocity[t * npix + i] = static_cast<float>(v[i]);

    const auto& mf = magnitude_frames[t];
    const auto& mimg = mf.file->image;
    for (std::size_t i = 0; i < npix; ++i) {
      const double m = mimg.rescale_slope * mimg.stored[mf.index_in_file * npix + i] + mimg.rescale_intercept;
      magnitude[t * npix + i] = static_cast<float>(m);
    }
  }
  return SeriesPair{VelocitySeries(header, std::move(velocity)), MagnitudeSeries(header, std::move(magnitude))};
}

}  // namespace rtpc::ingest
