#include "metaul/report.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include "metaul/types.hpp"

namespace metaul {

Report aggregate_results(const std::vector<CsvTable>& tables) {
  if (tables.empty()) throw DataError("no result tables to report");
  const auto& header = tables.front().header;
  if (header.size() < 2) throw DataError("result tables need a group column and at least one value column");
  for (const auto& t : tables) {
    if (t.header != header) throw DataError("result tables have different headers");
  }

  Report report;
  report.group_column = header[0];
  std::vector<std::size_t> value_idx;
  for (std::size_t c = 1; c < header.size(); ++c) {
    if (header[c] == "repeat") continue;
    value_idx.push_back(c);
    report.value_columns.push_back(header[c]);
  }

  std::map<std::string, std::size_t> slot;
  std::vector<std::vector<std::vector<double>>> values;  // [group][column][row]
  for (const auto& t : tables) {
    for (const auto& row : t.rows) {
      auto [it, fresh] = slot.emplace(row[0], report.groups.size());
      if (fresh) {
        report.groups.push_back({row[0], 0, {}, {}, {}});
        values.emplace_back(value_idx.size());
      }
      auto& g = values[it->second];
      for (std::size_t v = 0; v < value_idx.size(); ++v) {
        g[v].push_back(parse_double(row[value_idx[v]], header[value_idx[v]]));
      }
      ++report.groups[it->second].count;
    }
  }
  if (report.groups.empty()) throw DataError("result tables contain no rows");

  for (std::size_t gi = 0; gi < report.groups.size(); ++gi) {
    auto& g = report.groups[gi];
    const double n = static_cast<double>(g.count);
    for (const auto& col : values[gi]) {
      // Offset by the first value so constant columns come out exact.
      double shift = 0.0;
      for (double x : col) shift += x - col.front();
      const double mean = col.front() + shift / n;
      double ss = 0.0;
      for (double x : col) ss += (x - mean) * (x - mean);
      const double sd = g.count > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
      g.mean.push_back(mean);
      g.stddev.push_back(sd);
      g.ci95.push_back(1.96 * sd / std::sqrt(n));
    }
  }
  return report;
}

std::string report_csv(const Report& report) {
  std::ostringstream out;
  out << report.group_column << ",n";
  for (const auto& c : report.value_columns) out << ',' << c << "_mean," << c << "_std," << c << "_ci95";
  out << '\n';
  for (const auto& g : report.groups) {
    out << g.key << ',' << g.count;
    for (std::size_t v = 0; v < g.mean.size(); ++v) {
      out << ',' << format_double(g.mean[v]) << ',' << format_double(g.stddev[v]) << ',' << format_double(g.ci95[v]);
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace metaul
