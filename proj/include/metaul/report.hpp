#pragma once

#include <string>
#include <vector>

#include "metaul/csv.hpp"

namespace metaul {

struct ReportGroup {
  std::string key;
  std::size_t count = 0;
  std::vector<double> mean;
  std::vector<double> stddev;  // sample standard deviation, 0 for a single row
  std::vector<double> ci95;    // 1.96 * stddev / sqrt(count)
};

struct Report {
  std::string group_column;
  std::vector<std::string> value_columns;
  std::vector<ReportGroup> groups;  // in order of first appearance
};

// Groups rows of result tables by their first column and summarizes every
// other column except "repeat". All tables must share one header. Throws
// DataError on empty input or non-numeric values.
Report aggregate_results(const std::vector<CsvTable>& tables);

// Header: <group>,n,<c>_mean,<c>_std,<c>_ci95,...
std::string report_csv(const Report& report);

}  // namespace metaul
