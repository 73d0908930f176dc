#include "ctin/reportgen.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "ctin/errors.hpp"

namespace ctin {

double improvement(double base, double ours) {
  if (!(base > 0.0)) throw MetricError("improvement needs a positive baseline value");
  return 100.0 * (base - ours) / base;
}

std::optional<double> ComparisonTable::value(const std::string& dataset,
                                             const std::string& method,
                                             const std::string& metric) const {
  auto it = values.find({dataset, method, metric});
  if (it == values.end()) return std::nullopt;
  return it->second;
}

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<std::string> baselines(const ComparisonTable& t) {
  std::vector<std::string> out;
  for (const auto& m : t.methods) {
    if (m != t.ours) out.push_back(m);
  }
  return out;
}

}  // namespace

std::string ComparisonTable::to_markdown() const {
  const bool have_ours = std::find(methods.begin(), methods.end(), ours) != methods.end();
  const auto bases = baselines(*this);
  std::string s = "| dataset | metric |";
  std::string rule = "|---|---|";
  for (const auto& m : methods) {
    s += " " + m + " |";
    rule += "---:|";
  }
  if (have_ours) {
    for (const auto& b : bases) {
      s += " impr. vs " + b + " |";
      rule += "---:|";
    }
  }
  s += "\n" + rule + "\n";
  for (const auto& d : datasets) {
    for (const auto& metric : metrics) {
      s += "| " + d + " | " + metric + " |";
      for (const auto& m : methods) {
        const auto v = value(d, m, metric);
        s += " " + (v ? fmt("%.4f", *v) : std::string("-")) + " |";
      }
      if (have_ours) {
        const auto o = value(d, ours, metric);
        for (const auto& b : bases) {
          const auto v = value(d, b, metric);
          const bool ok = o && v && *v > 0.0;
          s += " " + (ok ? fmt("%.2f%%", improvement(*v, *o)) : std::string("-")) + " |";
        }
      }
      s += "\n";
    }
  }
  return s;
}

std::string ComparisonTable::to_csv() const {
  std::string s = "dataset,method,metric,value,improvement_pct\n";
  for (const auto& d : datasets) {
    for (const auto& metric : metrics) {
      const auto o = value(d, ours, metric);
      for (const auto& m : methods) {
        const auto v = value(d, m, metric);
        if (!v) continue;
        s += d + "," + m + "," + metric + "," + fmt("%.17g", *v) + ",";
        if (m != ours && o && *v > 0.0) s += fmt("%.17g", improvement(*v, *o));
        s += "\n";
      }
    }
  }
  return s;
}

ComparisonTable build_table(const std::vector<MetricReport>& reports, const std::string& ours) {
  if (reports.empty()) throw ConfigError("build_table needs at least one report");
  ComparisonTable t;
  t.ours = ours;
  t.metrics = {"ate", "t_rte", "d_rte", "pde"};
  std::set<std::string> datasets;
  std::set<std::string> methods;
  for (const auto& r : reports) {
    const SequenceMetrics a = r.aggregate();
    const std::pair<const char*, double> cells[] = {
        {"ate", a.ate}, {"t_rte", a.t_rte}, {"d_rte", a.d_rte}, {"pde", a.pde}};
    const std::string ds = r.dataset.empty() ? "default" : r.dataset;
    for (const auto& [metric, v] : cells) {
      auto [it, inserted] = t.values.emplace(std::make_tuple(ds, r.method, metric), v);
      if (!inserted && it->second != v) {
        throw ConfigError("conflicting reports for dataset '" + ds + "', method '" + r.method +
                          "'");
      }
    }
    datasets.insert(ds);
    methods.insert(r.method);
  }
  t.datasets.assign(datasets.begin(), datasets.end());
  for (const auto& m : methods) {
    if (m != ours) t.methods.push_back(m);
  }
  if (methods.count(ours)) t.methods.push_back(ours);
  return t;
}

}  // namespace ctin
