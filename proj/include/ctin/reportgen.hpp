#pragma once

#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "ctin/metrics.hpp"

namespace ctin {

/// Percent reduction of `ours` relative to `base`: 100 (base - ours) / base.
double improvement(double base, double ours);

/// Aggregate metric values keyed by (dataset, method, metric), with
/// improvement columns of `ours` against every other method.
struct ComparisonTable {
  std::string ours = "ctin";
  std::vector<std::string> datasets;  // sorted
  std::vector<std::string> methods;   // sorted, `ours` last
  std::vector<std::string> metrics;   // ate, t_rte, d_rte, pde
  std::map<std::tuple<std::string, std::string, std::string>, double> values;

  std::optional<double> value(const std::string& dataset, const std::string& method,
                              const std::string& metric) const;
  std::string to_markdown() const;
  std::string to_csv() const;
};

/// Throws ConfigError when two reports give different values for one key.
ComparisonTable build_table(const std::vector<MetricReport>& reports,
                            const std::string& ours = "ctin");

}  // namespace ctin
