#include <algorithm>
#include <sstream>

#include <gtest/gtest.h>

#include "ctin/errors.hpp"
#include "ctin/reportgen.hpp"

using namespace ctin;

namespace {

MetricReport report(const std::string& method, const std::string& dataset, double ate,
                    double t_rte, double d_rte = 0.1, double pde = 0.01) {
  MetricReport r;
  r.method = method;
  r.dataset = dataset;
  r.sequences.push_back({"s0", ate, t_rte, d_rte, pde, 0.0});
  return r;
}

}  // namespace

TEST(Improvement, ReferenceCell) {
  const double v = improvement(2.55, 1.39);
  EXPECT_NEAR(v, 100.0 * 1.16 / 2.55, 1e-12);
  EXPECT_NEAR(v, 45.36, 0.2);
}

TEST(Improvement, EdgeCases) {
  EXPECT_EQ(improvement(3.7, 3.7), 0.0);
  EXPECT_DOUBLE_EQ(improvement(1.0, 2.0), -100.0);
  EXPECT_THROW(improvement(0.0, 1.0), MetricError);
  EXPECT_THROW(improvement(-1.0, 1.0), MetricError);
}

TEST(BuildTable, SingleReportSingleRowPerMetric) {
  auto t = build_table({report("ctin", "synthetic", 1.0, 2.0)});
  EXPECT_EQ(t.datasets, std::vector<std::string>{"synthetic"});
  EXPECT_EQ(t.methods, std::vector<std::string>{"ctin"});
  EXPECT_EQ(*t.value("synthetic", "ctin", "ate"), 1.0);
  EXPECT_FALSE(t.value("synthetic", "sins", "ate"));
  const std::string md = t.to_markdown();
  EXPECT_EQ(std::count(md.begin(), md.end(), '\n'), 2 + 4);
  EXPECT_NE(md.find("| synthetic | ate | 1.0000 |"), std::string::npos);
}

TEST(BuildTable, ByteStableAndOrderIndependent) {
  std::vector<MetricReport> rs{report("sins", "a", 6.34, 3.0), report("ctin", "a", 1.39, 1.0),
                               report("pdr", "a", 22.76, 9.0), report("ctin", "b", 2.0, 1.5),
                               report("sins", "b", 4.0, 2.5)};
  const auto t1 = build_table(rs);
  std::reverse(rs.begin(), rs.end());
  const auto t2 = build_table(rs);
  EXPECT_EQ(t1.to_markdown(), t2.to_markdown());
  EXPECT_EQ(t1.to_csv(), t2.to_csv());
  EXPECT_EQ(t1.methods, (std::vector<std::string>{"pdr", "sins", "ctin"}));
  EXPECT_NE(t1.to_markdown().find("| b | ate | - | 4.0000 | 2.0000 | - | 50.00% |"),
            std::string::npos);
}

TEST(BuildTable, ImprovementCellsMatchRecomputation) {
  std::vector<MetricReport> rs{report("ronin", "x", 2.55, 1.7, 0.16, 0.02),
                               report("ctin", "x", 1.39, 1.1, 0.11, 0.01)};
  const auto t = build_table(rs);
  std::istringstream csv(t.to_csv());
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "dataset,method,metric,value,improvement_pct");
  int checked = 0;
  while (std::getline(csv, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) f.push_back(c);
    if (f[1] != "ronin") continue;
    const double base = std::stod(f[3]);
    const double ours = *t.value(f[0], "ctin", f[2]);
    EXPECT_NEAR(std::stod(f[4]), 100.0 * (base - ours) / base, 1e-9) << line;
    ++checked;
  }
  EXPECT_EQ(checked, 4);
}

TEST(BuildTable, ConflictingDuplicatesThrow) {
  EXPECT_NO_THROW(build_table({report("ctin", "a", 1.0, 1.0), report("ctin", "a", 1.0, 1.0)}));
  EXPECT_THROW(build_table({report("ctin", "a", 1.0, 1.0), report("ctin", "a", 1.5, 1.0)}),
               ConfigError);
  EXPECT_THROW(build_table({}), ConfigError);
}
