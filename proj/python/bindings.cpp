#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>
#include <sstream>

#include "rtpc/app/commands.hpp"
#include "rtpc/app/config.hpp"
#include "rtpc/app/pipeline.hpp"
#include "rtpc/error.hpp"
#include "rtpc/flow.hpp"
#include "rtpc/ingest.hpp"
#include "rtpc/phantom.hpp"
#include "rtpc/portable.hpp"
#include "rtpc/resp.hpp"
#include "rtpc/segmentation.hpp"
#include "rtpc/signal.hpp"
#include "rtpc/version.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace rtpc;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_array(std::span<const double> v, std::vector<py::ssize_t> shape) {
  Array out(shape);
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

Array to_array(std::span<const double> v) { return to_array(v, {static_cast<py::ssize_t>(v.size())}); }

py::array_t<bool> mask_array(const Mask& m) {
  py::array_t<bool> out({static_cast<py::ssize_t>(m.rows()), static_cast<py::ssize_t>(m.cols())});
  bool* p = out.mutable_data();
  for (std::size_t i = 0; i < m.size(); ++i) p[i] = m[i];
  return out;
}

Mask mask_from(const py::array_t<bool, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) fail(ErrorCode::InvalidArgument, "mask must be 2-D");
  Mask m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  const bool* p = a.data();
  for (std::size_t i = 0; i < m.size(); ++i) m.set_index(i, p[i]);
  return m;
}

py::dict header_dict(const SeriesHeader& h) {
  py::dict d;
  d["n_frames"] = h.n_frames;
  d["rows"] = h.rows;
  d["cols"] = h.cols;
  d["pixel_spacing_mm"] = py::make_tuple(h.pixel_spacing_mm.row_mm, h.pixel_spacing_mm.col_mm);
  d["frame_duration_ms"] = h.frame_duration_ms;
  d["venc_cm_s"] = h.venc_cm_s;
  d["vendor_convention"] = std::string(to_string(h.vendor_convention));
  return d;
}

std::vector<py::ssize_t> stack_shape(const SeriesHeader& h) {
  return {static_cast<py::ssize_t>(h.n_frames), static_cast<py::ssize_t>(h.rows), static_cast<py::ssize_t>(h.cols)};
}

py::dict series_dict(const ingest::SeriesPair& s) {
  const auto& h = s.velocity.header();
  py::dict d;
  d["header"] = header_dict(h);
  d["velocity"] = to_array(s.velocity.samples(), stack_shape(h));
  d["magnitude"] = to_array(s.magnitude.samples(), stack_shape(h));
  return d;
}

// A (T, R, C) velocity stack plus its header; magnitude is optional for
// functions that only read velocity.
ingest::SeriesPair series_from(const Array& velocity, const std::optional<Array>& magnitude, double frame_ms,
                               double venc, std::pair<double, double> spacing) {
  if (velocity.ndim() != 3) fail(ErrorCode::InvalidArgument, "velocity must be a (frames, rows, cols) array");
  SeriesHeader h;
  h.n_frames = static_cast<std::size_t>(velocity.shape(0));
  h.rows = static_cast<std::size_t>(velocity.shape(1));
  h.cols = static_cast<std::size_t>(velocity.shape(2));
  h.pixel_spacing_mm = {spacing.first, spacing.second};
  h.frame_duration_ms = frame_ms;
  h.venc_cm_s = venc;
  std::vector<double> v(velocity.data(), velocity.data() + velocity.size());
  std::vector<double> m;
  if (magnitude) {
    if (magnitude->size() != velocity.size()) fail(ErrorCode::GeometryMismatch, "magnitude shape differs from velocity");
    m.assign(magnitude->data(), magnitude->data() + magnitude->size());
  } else {
    m.assign(v.size(), 100.0);
  }
  return {VelocitySeries(h, std::move(v)), MagnitudeSeries(h, std::move(m))};
}

py::dict flow_dict(const flow::FlowCurve& f) {
  py::dict d;
  d["time_s"] = [&] {
    std::vector<double> t(f.size());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = f.signal.time(i);
    return to_array(t);
  }();
  d["flow_ml_min"] = to_array(f.signal.samples());
  d["area_mm2"] = to_array(f.roi_area_mm2);
  d["max_velocity_cm_s"] = to_array(f.max_velocity_cm_s);
  d["max_signed_velocity_cm_s"] = to_array(f.max_signed_velocity_cm_s);
  d["min_signed_velocity_cm_s"] = to_array(f.min_signed_velocity_cm_s);
  return d;
}

py::list diffs_list(const std::vector<resp::DiffResult>& diffs) {
  py::list out;
  for (const auto& r : diffs) {
    py::dict d;
    d["parameter"] = std::string(resp::to_string(r.parameter));
    d["intensity_percent"] = r.intensity_percent;
    d["delay_s"] = r.delay_s;
    d["absolute_difference"] = r.absolute_difference;
    d["n_ex"] = r.n_ex;
    d["n_in"] = r.n_in;
    d["resp_period_s"] = r.resp_period_s;
    std::vector<double> delays, values;
    for (const auto& p : r.curve) {
      if (!p.valid) continue;
      delays.push_back(p.delay_s);
      values.push_back(p.diff.diff_percent);
    }
    d["curve_delay_s"] = to_array(delays);
    d["curve_diff_percent"] = to_array(values);
    out.append(d);
  }
  return out;
}

py::dict result_dict(const app::DatasetResult& r) {
  py::dict d;
  d["dataset_id"] = r.dataset_id;
  d["ok"] = r.ok();
  if (r.error) {
    d["error"] = py::dict(py::arg("stage") = r.error->stage, py::arg("code") = std::string(to_string(r.error->code)),
                          py::arg("message") = r.error->message);
  } else {
    d["error"] = py::none();
  }
  if (r.header) d["header"] = header_dict(*r.header);
  if (r.roi) d["roi_frame0"] = mask_array(r.roi->mask_for_frame(0));
  if (r.background) {
    d["background"] = py::dict(py::arg("order") = std::string(correction::to_string(r.background->order)),
                               py::arg("a") = r.background->a, py::arg("b") = r.background->b,
                               py::arg("c") = r.background->c, py::arg("fallback") = r.background_fallback);
  }
  if (r.flow) d["flow"] = flow_dict(*r.flow);
  d["cardiac_hz"] = r.cardiac_hz;
  d["n_cycles"] = r.cycles.size();
  d["diffs"] = diffs_list(r.diffs);
  d["resp_skipped"] = r.resp_skipped;
  py::list timings;
  for (const auto& t : r.timings) timings.append(py::make_tuple(t.stage, t.seconds));
  d["timings"] = timings;
  return d;
}

app::PipelineConfig pipeline_config(const std::string& config_json) {
  return app::pipeline_config_from_json(config_json.empty() ? json::object() : json::parse(config_json));
}

}  // namespace

PYBIND11_MODULE(_rtpc, m) {
  m.doc() = "Real-time phase-contrast MRI flow and respiration analysis";
  m.attr("__version__") = kVersion;

  static PyObject* error_type = PyErr_NewException("rtpc._rtpc.Error", PyExc_RuntimeError, nullptr);
  m.attr("Error") = py::handle(error_type);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const std::string code(to_string(e.code()));
      py::object inst = py::handle(error_type)(code, e.what());
      inst.attr("code") = code;
      PyErr_SetObject(error_type, inst.ptr());
    } catch (const json::exception& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  m.def("defaults_json", [] { return std::string(app::defaults_json()); });
  m.def("config_hash", [](const std::string& j) { return app::config_hash(json::parse(j)); });

  m.def("read_portable", [](const std::string& path) { return series_dict(portable::read_portable(path)); });
  m.def("write_portable",
        [](const std::string& path, const Array& velocity, const Array& magnitude, double frame_ms, double venc,
           std::pair<double, double> spacing) {
          portable::write_portable(series_from(velocity, magnitude, frame_ms, venc, spacing), path);
        });
  m.def("load_series", [](const std::string& path, const std::string& config_json) {
    const auto c = pipeline_config(config_json);
    const std::filesystem::path p(path);
    return series_dict(p.extension() == ".rtp" ? portable::read_portable(p) : ingest::load_series(p, c.ingest));
  });

  m.def("simulate", [](const std::string& config_json) {
    const auto pc = app::phantom_config_from_json(config_json.empty() ? json::object() : json::parse(config_json));
    const auto ph = phantom::generate(pc);
    py::dict d = series_dict(ph.series());
    d["resp"] = to_array(ph.resp.samples());
    d["resp_dt_s"] = ph.resp.sample_period_s();
    d["resp_t0_s"] = ph.resp.t0_s();
    d["truth_flow_ml_min"] = to_array(ph.truth.flow_ml_min.samples());
    d["truth_mask_frame0"] = mask_array(ph.truth.masks.front());
    d["true_velocity"] = to_array(ph.truth.true_velocity, stack_shape(ph.velocity.header()));
    d["cardiac_period_s"] = ph.truth.cardiac_period_s;
    return d;
  });
  m.def("oracle_flow", [](const std::string& config_json) {
    const auto pc = app::phantom_config_from_json(config_json.empty() ? json::object() : json::parse(config_json));
    return to_array(phantom::oracle_flow(pc).samples());
  });
  m.def("wrap_velocity", &phantom::wrap_velocity, py::arg("v"), py::arg("venc"));

  m.def("run_pipeline",
        [](const Array& velocity, const Array& magnitude, double frame_ms, double venc,
           std::pair<double, double> spacing, std::optional<Array> belt, double belt_dt, double belt_t0,
           const std::string& config_json) {
          const auto series = series_from(velocity, magnitude, frame_ms, venc, spacing);
          std::optional<Signal1D> b;
          if (belt) b = Signal1D(std::vector<double>(belt->data(), belt->data() + belt->size()), belt_dt, belt_t0);
          const auto c = pipeline_config(config_json);
          app::DatasetResult r;
          {
            py::gil_scoped_release release;
            r = app::run_pipeline(series, b, c, "python");
          }
          return result_dict(r);
        });

  m.def("segment_cardiac_frequency",
        [](const Array& velocity, double frame_ms, double venc, std::pair<double, double> spacing,
           std::pair<double, double> band, double threshold, std::size_t min_px) {
          const auto s = series_from(velocity, std::nullopt, frame_ms, venc, spacing);
          seg::FreqSegParams p;
          p.cardiac_band = {band.first, band.second};
          p.coherence_threshold = threshold;
          p.min_component_px = min_px;
          return mask_array(seg::segment_cardiac_frequency(s.velocity, p).mask_for_frame(0));
        });
  m.def("compute_flow",
        [](const Array& velocity, const py::array_t<bool, py::array::c_style | py::array::forcecast>& mask,
           double frame_ms, double venc, std::pair<double, double> spacing) {
          const auto s = series_from(velocity, std::nullopt, frame_ms, venc, spacing);
          return flow_dict(flow::compute_flow_curve(s.velocity, Roi::make_static(mask_from(mask))));
        });
  m.def("dice", [](const py::array_t<bool, py::array::c_style | py::array::forcecast>& a,
                   const py::array_t<bool, py::array::c_style | py::array::forcecast>& b) {
    return dice(mask_from(a), mask_from(b));
  });

  m.def("fft_magnitude", [](const Array& x, double dt) {
    const auto s = signal::fft_magnitude(Signal1D(std::vector<double>(x.data(), x.data() + x.size()), dt));
    return py::make_tuple(to_array(s.bin_amplitudes), s.bin_width_hz, s.parseval_energy());
  });
  m.def("lowpass", [](const Array& x, double dt, double cutoff_hz, std::size_t n_taps) {
    const auto out = signal::lowpass(Signal1D(std::vector<double>(x.data(), x.data() + x.size()), dt), cutoff_hz, n_taps);
    return to_array(out.samples());
  });
  m.def("estimate_fundamental_hz", [](const Array& x, double dt, std::pair<double, double> band) {
    return signal::estimate_fundamental_hz(Signal1D(std::vector<double>(x.data(), x.data() + x.size()), dt),
                                           {band.first, band.second});
  });
  m.def("detect_peaks", [](const Array& x, double dt, double min_separation_s, double prominence_fraction) {
    return signal::detect_peaks(Signal1D(std::vector<double>(x.data(), x.data() + x.size()), dt), min_separation_s,
                                prominence_fraction);
  });

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    int status = 0;
    {
      py::gil_scoped_release release;
      status = app::run_cli(args, out, err);
    }
    return py::make_tuple(status, out.str(), err.str());
  });
}
