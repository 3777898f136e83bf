#include "rtpc/app/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace rtpc::app {

namespace {

constexpr double kWidth = 800.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 20.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;

std::string fixed(double v, int digits = 2) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

double nice_step(double span) {
  if (!(span > 0.0)) return 1.0;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double f = raw / mag;
  return (f < 1.5 ? 1.0 : f < 3.5 ? 2.0 : f < 7.5 ? 5.0 : 10.0) * mag;
}

}  // namespace

std::string line_plot(const std::string& title, const std::string& x_label, const std::string& y_label,
                      const std::vector<PlotSeries>& series) {
  double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
  bool any = false;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!any) {
        x0 = x1 = s.x[i];
        y0 = y1 = s.y[i];
        any = true;
      }
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (x1 <= x0) x1 = x0 + 1.0;
  if (y1 <= y0) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto sx = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto sy = [&](double y) { return kTop + (y1 - y) / (y1 - y0) * ph; };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fixed(kWidth, 0) << "\" height=\"" << fixed(kHeight, 0)
      << "\" viewBox=\"0 0 " << fixed(kWidth, 0) << ' ' << fixed(kHeight, 0) << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << fixed(kWidth / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escape(title) << "</text>\n";
  out << "<g stroke=\"#444\" stroke-width=\"1\">\n";
  out << "<line x1=\"" << fixed(kLeft) << "\" y1=\"" << fixed(kTop + ph) << "\" x2=\"" << fixed(kLeft + pw) << "\" y2=\""
      << fixed(kTop + ph) << "\"/>\n";
  out << "<line x1=\"" << fixed(kLeft) << "\" y1=\"" << fixed(kTop) << "\" x2=\"" << fixed(kLeft) << "\" y2=\"" << fixed(kTop + ph)
      << "\"/>\n</g>\n";

  out << "<g class=\"ticks\" fill=\"#222\">\n";
  const double xs = nice_step(x1 - x0);
  for (double v = std::ceil(x0 / xs) * xs; v <= x1 + 1e-9 * xs; v += xs) {
    out << "<text x=\"" << fixed(sx(v)) << "\" y=\"" << fixed(kTop + ph + 16) << "\" text-anchor=\"middle\">"
        << fixed(std::abs(v) < 1e-12 * xs ? 0.0 : v, xs < 1.0 ? 2 : 0) << "</text>\n";
  }
  const double ys = nice_step(y1 - y0);
  for (double v = std::ceil(y0 / ys) * ys; v <= y1 + 1e-9 * ys; v += ys) {
    out << "<text x=\"" << fixed(kLeft - 6) << "\" y=\"" << fixed(sy(v) + 4) << "\" text-anchor=\"end\">"
        << fixed(std::abs(v) < 1e-12 * ys ? 0.0 : v, ys < 1.0 ? 2 : 0) << "</text>\n";
  }
  out << "</g>\n";
  out << "<text x=\"" << fixed(kLeft + pw / 2) << "\" y=\"" << fixed(kHeight - 12) << "\" text-anchor=\"middle\">"
      << escape(x_label) << "</text>\n";
  out << "<text transform=\"translate(18," << fixed(kTop + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape(y_label) << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    out << "<polyline fill=\"none\" stroke=\"" << escape(s.color) << "\" stroke-width=\"1.5\" data-label=\"" << escape(s.label)
        << "\" points=\"";
    const std::size_t n = std::min(s.x.size(), s.y.size());
    for (std::size_t i = 0; i < n; ++i) out << (i ? " " : "") << fixed(sx(s.x[i])) << ',' << fixed(sy(s.y[i]));
    out << "\"/>\n";
    const double ly = kTop + 14.0 + 16.0 * static_cast<double>(k);
    out << "<line x1=\"" << fixed(kLeft + pw - 120) << "\" y1=\"" << fixed(ly - 4) << "\" x2=\"" << fixed(kLeft + pw - 100)
        << "\" y2=\"" << fixed(ly - 4) << "\" stroke=\"" << escape(s.color) << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << fixed(kLeft + pw - 95) << "\" y=\"" << fixed(ly) << "\">" << escape(s.label) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace rtpc::app
