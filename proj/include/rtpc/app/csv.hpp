#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "rtpc/app/config.hpp"
#include "rtpc/flow.hpp"
#include "rtpc/resp.hpp"

namespace rtpc::app {

/// Shortest text that reads back to the same double (up to 17 digits).
std::string format_number(double v);

/// flow.csv: time_s,flow_ml_min,area_mm2,max_vel_cm_s (flow_ml_s with FlowUnit::MlPerSec).
std::string flow_csv(const flow::FlowCurve& flow, FlowUnit unit);

struct FlowTable {
  std::vector<double> time_s;
  std::vector<double> flow;
  std::vector<double> area_mm2;
  std::vector<double> max_velocity_cm_s;
  FlowUnit unit = FlowUnit::MlPerMin;

  /// Uniformly sampled flow in mL/min. Throws MalformedCsv.
  Signal1D flow_ml_min() const;
};

/// Throws MalformedCsv.
FlowTable parse_flow_csv(std::string_view text);

/// diff_curves.csv: parameter,delay_s,diff_percent (valid grid points only).
std::string diff_curves_csv(const std::vector<resp::DiffResult>& results);

struct DiffCurveRow {
  std::string parameter;
  double delay_s = 0.0;
  double diff_percent = 0.0;
};
std::vector<DiffCurveRow> parse_diff_curves_csv(std::string_view text);

/// Belt recordings: time_s,belt with uniform sampling.
std::string resp_csv(const Signal1D& belt);
Signal1D parse_resp_csv(std::string_view text);

}  // namespace rtpc::app
