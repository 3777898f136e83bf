#pragma once

#include <string>
#include <vector>

namespace rtpc::app {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
};

/// Self-contained SVG line chart: one polyline per series, with one point
/// per sample, plus axes, ticks and a legend. Output depends only on the
/// inputs.
std::string line_plot(const std::string& title, const std::string& x_label, const std::string& y_label,
                      const std::vector<PlotSeries>& series);

}  // namespace rtpc::app
