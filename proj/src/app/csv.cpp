#include "rtpc/app/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "rtpc/error.hpp"

namespace rtpc::app {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  for (int precision = 6; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

namespace {

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string> lines_of(std::string_view text) {
  std::vector<std::string> out;
  for (auto& line : split(text, '\n')) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    out.push_back(line);
  }
  return out;
}

double parse_double(const std::string& s, std::size_t line_no) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v))
    fail(ErrorCode::MalformedCsv, "line " + std::to_string(line_no) + ": '" + s + "' is not a number");
  return v;
}

void require_uniform(const std::vector<double>& t, const char* what) {
  if (t.size() < 2) fail(ErrorCode::MalformedCsv, std::string(what) + " needs at least 2 rows");
  const double dt = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
  if (!(dt > 0.0)) fail(ErrorCode::MalformedCsv, std::string(what) + " times must increase");
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (std::abs((t[i] - t[i - 1]) - dt) > 1e-6 * dt + 1e-9)
      fail(ErrorCode::MalformedCsv, std::string(what) + " is not uniformly sampled at row " + std::to_string(i + 1));
  }
}

}  // namespace

std::string flow_csv(const flow::FlowCurve& flow, FlowUnit unit) {
  std::ostringstream out;
  const double scale = unit == FlowUnit::MlPerSec ? 1.0 / 60.0 : 1.0;
  out << "time_s," << (unit == FlowUnit::MlPerSec ? "flow_ml_s" : "flow_ml_min") << ",area_mm2,max_vel_cm_s\n";
  for (std::size_t i = 0; i < flow.size(); ++i) {
    out << format_number(flow.signal.time(i)) << ',' << format_number(flow.signal[i] * scale) << ','
        << format_number(flow.roi_area_mm2[i]) << ',' << format_number(flow.max_velocity_cm_s[i]) << '\n';
  }
  return out.str();
}

Signal1D FlowTable::flow_ml_min() const {
  require_uniform(time_s, "flow.csv");
  const double dt = (time_s.back() - time_s.front()) / static_cast<double>(time_s.size() - 1);
  std::vector<double> q = flow;
  if (unit == FlowUnit::MlPerSec) {
    for (double& v : q) v *= 60.0;
  }
  return Signal1D(std::move(q), dt, time_s.front());
}

FlowTable parse_flow_csv(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.empty()) fail(ErrorCode::MalformedCsv, "flow.csv is empty");
  FlowTable t;
  const auto header = split(lines[0], ',');
  if (header.size() != 4 || header[0] != "time_s" || (header[1] != "flow_ml_min" && header[1] != "flow_ml_s") ||
      header[2] != "area_mm2" || header[3] != "max_vel_cm_s")
    fail(ErrorCode::MalformedCsv, "flow.csv header must be time_s,flow_ml_min,area_mm2,max_vel_cm_s");
  t.unit = header[1] == "flow_ml_s" ? FlowUnit::MlPerSec : FlowUnit::MlPerMin;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split(lines[i], ',');
    if (f.size() != 4) fail(ErrorCode::MalformedCsv, "line " + std::to_string(i + 1) + ": expected 4 fields");
    t.time_s.push_back(parse_double(f[0], i + 1));
    t.flow.push_back(parse_double(f[1], i + 1));
    t.area_mm2.push_back(parse_double(f[2], i + 1));
    t.max_velocity_cm_s.push_back(parse_double(f[3], i + 1));
  }
  if (t.time_s.empty()) fail(ErrorCode::MalformedCsv, "flow.csv has no data rows");
  return t;
}

std::string diff_curves_csv(const std::vector<resp::DiffResult>& results) {
  std::ostringstream out;
  out << "parameter,delay_s,diff_percent\n";
  for (const auto& r : results) {
    for (const auto& p : r.curve) {
      if (!p.valid) continue;
      out << resp::to_string(r.parameter) << ',' << format_number(p.delay_s) << ',' << format_number(p.diff.diff_percent)
          << '\n';
    }
  }
  return out.str();
}

std::vector<DiffCurveRow> parse_diff_curves_csv(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.empty() || lines[0] != "parameter,delay_s,diff_percent")
    fail(ErrorCode::MalformedCsv, "diff_curves.csv header must be parameter,delay_s,diff_percent");
  std::vector<DiffCurveRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split(lines[i], ',');
    if (f.size() != 3 || f[0].empty()) fail(ErrorCode::MalformedCsv, "line " + std::to_string(i + 1) + ": expected 3 fields");
    rows.push_back({f[0], parse_double(f[1], i + 1), parse_double(f[2], i + 1)});
  }
  if (rows.empty()) fail(ErrorCode::MalformedCsv, "diff_curves.csv has no data rows");
  return rows;
}

std::string resp_csv(const Signal1D& belt) {
  std::ostringstream out;
  out << "time_s,belt\n";
  for (std::size_t i = 0; i < belt.size(); ++i) out << format_number(belt.time(i)) << ',' << format_number(belt[i]) << '\n';
  return out.str();
}

Signal1D parse_resp_csv(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.empty() || lines[0] != "time_s,belt") fail(ErrorCode::MalformedCsv, "resp csv header must be time_s,belt");
  std::vector<double> t, v;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split(lines[i], ',');
    if (f.size() != 2) fail(ErrorCode::MalformedCsv, "line " + std::to_string(i + 1) + ": expected 2 fields");
    t.push_back(parse_double(f[0], i + 1));
    v.push_back(parse_double(f[1], i + 1));
  }
  require_uniform(t, "resp csv");
  // Snap the estimated period to 12 significant digits so a period written
  // as a short decimal (0.01) reads back exactly.
  const double estimate = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", estimate);
  const double dt = std::strtod(buf, nullptr);
  return Signal1D(std::move(v), dt, t.front());
}

}  // namespace rtpc::app
