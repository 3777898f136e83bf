#pragma once

#include <string>
#include <vector>

#include "rtpc/app/pipeline.hpp"

namespace rtpc::app {

/// One line of results.tsv. Columns that do not apply stay empty.
struct ResultRow {
  std::string dataset;
  std::string record;  // status, header, roi, background, flow, cycles, diff, diff_abs, resp, error
  std::string name;
  std::string value;
  std::string unit;
  std::string delay_s;
  std::string n_ex;
  std::string n_in;
  std::string note;
};

/// The exported results: "#" metadata lines, a header line, then one row
/// group per dataset. A failed dataset contributes its completed stages and
/// an error row carrying the error code.
class ResultsTable {
 public:
  explicit ResultsTable(std::string config_hash);

  void add(const DatasetResult& result, FlowUnit unit);
  const std::vector<ResultRow>& rows() const { return rows_; }
  std::size_t group_count() const { return groups_; }

  std::string to_tsv() const;

 private:
  std::string config_hash_;
  std::vector<ResultRow> rows_;
  std::size_t groups_ = 0;
};

inline constexpr const char* kResultsColumns = "dataset\trecord\tname\tvalue\tunit\tdelay_s\tn_ex\tn_in\tnote";

}  // namespace rtpc::app
