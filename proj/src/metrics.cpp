#include "ctin/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "ctin/errors.hpp"

namespace ctin {

namespace {

Vec2 xy(const Vec3& v) { return v.head<2>(); }

void check_pair(const Trajectory& gt, const Trajectory& pred) {
  if (gt.size() != pred.size()) {
    throw MetricError("trajectory lengths differ: " + std::to_string(gt.size()) + " vs " +
                      std::to_string(pred.size()));
  }
  if (gt.size() == 0) throw MetricError("empty trajectory");
}

// Both norms take the root of the mean error term.
double rmse(double sum, std::size_t n) {
  return std::sqrt(sum / static_cast<double>(n));
}

double error_term(const Vec2& e, RmseNorm norm) {
  return norm == RmseNorm::kSquared ? e.squaredNorm() : e.norm();
}

Vec2 relative_error(const Trajectory& gt, const Trajectory& pred, std::size_t a, std::size_t b) {
  return (xy(gt.positions[b]) - xy(gt.positions[a])) -
         (xy(pred.positions[b]) - xy(pred.positions[a]));
}

}  // namespace

Trajectory integrate_velocity(const RowMatrix& vel, const Vec2& p0, double dt, double t0) {
  if (!(dt > 0.0)) throw ConfigError("integrate_velocity: dt must be positive");
  if (vel.cols() != 2) throw DimensionError("integrate_velocity expects m x 2 velocities");
  Trajectory t;
  const auto m = static_cast<std::size_t>(vel.rows());
  t.timestamps.resize(m);
  t.positions.resize(m);
  Vec2 p = p0;
  for (std::size_t i = 0; i < m; ++i) {
    t.timestamps[i] = t0 + static_cast<double>(i) * dt;
    t.positions[i] = Vec3(p.x(), p.y(), 0.0);
    p += vel.row(static_cast<Eigen::Index>(i)).transpose() * dt;
  }
  return t;
}

RowMatrix stitch_velocities(const std::vector<WindowVelocity>& windows,
                            std::size_t sequence_len) {
  RowMatrix sum = RowMatrix::Zero(static_cast<Eigen::Index>(sequence_len), 2);
  std::vector<int> count(sequence_len, 0);
  for (const auto& w : windows) {
    if (w.vel.cols() != 2) throw DimensionError("window velocities must be m x 2");
    const auto m = static_cast<std::size_t>(w.vel.rows());
    if (w.origin_index + m > sequence_len) {
      throw DataError("window at " + std::to_string(w.origin_index) + " runs past the sequence");
    }
    sum.middleRows(static_cast<Eigen::Index>(w.origin_index), static_cast<Eigen::Index>(m)) +=
        w.vel;
    for (std::size_t i = 0; i < m; ++i) ++count[w.origin_index + i];
  }
  for (std::size_t i = 0; i < sequence_len; ++i) {
    if (count[i] == 0) {
      throw DataError("no window covers sample " + std::to_string(i));
    }
    sum.row(static_cast<Eigen::Index>(i)) /= count[i];
  }
  return sum;
}

Trajectory stitch_windows(const std::vector<WindowVelocity>& windows, std::size_t sequence_len,
                          const Vec2& p0, double dt, double t0) {
  return integrate_velocity(stitch_velocities(windows, sequence_len), p0, dt, t0);
}

double ate(const Trajectory& gt, const Trajectory& pred, RmseNorm norm) {
  check_pair(gt, pred);
  double sum = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    sum += error_term(xy(gt.positions[i]) - xy(pred.positions[i]), norm);
  }
  return rmse(sum, gt.size());
}

double t_rte(const Trajectory& gt, const Trajectory& pred, double t_i, double rate_hz,
             RmseNorm norm) {
  check_pair(gt, pred);
  if (!(t_i > 0.0) || !(rate_hz > 0.0)) throw ConfigError("t_rte: t_i and rate must be positive");
  const auto k = static_cast<std::size_t>(std::llround(t_i * rate_hz));
  if (k == 0 || gt.size() - 1 < k) {
    throw MetricError("sequence of " + std::to_string(gt.size()) +
                      " samples is shorter than the T-RTE interval of " + std::to_string(k) +
                      " samples; configure a smaller t_i");
  }
  double sum = 0.0;
  const std::size_t n = gt.size() - k;
  for (std::size_t i = 0; i < n; ++i) sum += error_term(relative_error(gt, pred, i, i + k), norm);
  return rmse(sum, n);
}

double d_rte(const Trajectory& gt, const Trajectory& pred, double d, RmseNorm norm) {
  check_pair(gt, pred);
  if (!(d > 0.0)) throw ConfigError("d_rte: distance must be positive");
  std::vector<double> arc(gt.size(), 0.0);
  for (std::size_t i = 1; i < gt.size(); ++i) {
    arc[i] = arc[i - 1] + (xy(gt.positions[i]) - xy(gt.positions[i - 1])).norm();
  }
  // Arc lengths are running sums, so "reaches d" allows for their rounding.
  const double reach = d * (1.0 - 1e-9);
  double sum = 0.0;
  std::size_t n = 0;
  std::size_t end = 0;
  for (std::size_t start = 0; start < gt.size(); ++start) {
    end = std::max(end, start + 1);
    while (end < gt.size() && arc[end] - arc[start] < reach) ++end;
    if (end >= gt.size()) break;
    sum += error_term(relative_error(gt, pred, start, end), norm);
    ++n;
  }
  if (n == 0) {
    throw MetricError("ground-truth path of " + std::to_string(arc.back()) +
                      " m is shorter than the D-RTE distance");
  }
  return rmse(sum, n);
}

double path_length(const Trajectory& t) {
  double len = 0.0;
  for (std::size_t i = 1; i < t.size(); ++i) {
    len += (xy(t.positions[i]) - xy(t.positions[i - 1])).norm();
  }
  return len;
}

double pde(const Trajectory& gt, const Trajectory& pred) {
  check_pair(gt, pred);
  const double len = path_length(gt);
  if (!(len > 0.0)) throw MetricError("pde: ground-truth path has zero length");
  return (xy(gt.positions.back()) - xy(pred.positions.back())).norm() / len;
}

std::vector<std::pair<double, double>> cdf_points(std::vector<double> values,
                                                  std::size_t n_points) {
  if (values.empty()) throw MetricError("cdf of an empty set");
  if (n_points == 0) throw ConfigError("cdf needs at least one point");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  const std::size_t k = std::min(n_points, n);
  std::vector<std::pair<double, double>> out;
  out.reserve(k);
  for (std::size_t i = 1; i <= k; ++i) {
    const std::size_t rank = (i * n + k - 1) / k;  // ceil(i n / k)
    out.emplace_back(values[rank - 1], static_cast<double>(rank) / static_cast<double>(n));
  }
  return out;
}

SequenceMetrics MetricReport::aggregate() const {
  SequenceMetrics a;
  a.name = "mean";
  if (sequences.empty()) return a;
  for (const auto& s : sequences) {
    a.ate += s.ate;
    a.t_rte += s.t_rte;
    a.d_rte += s.d_rte;
    a.pde += s.pde;
    a.vel_mse += s.vel_mse;
  }
  const double n = static_cast<double>(sequences.size());
  a.ate /= n;
  a.t_rte /= n;
  a.d_rte /= n;
  a.pde /= n;
  a.vel_mse /= n;
  return a;
}

SequenceMetrics compute_metrics(const std::string& name, const Trajectory& gt,
                                const Trajectory& pred, double rate_hz, const MetricConfig& cfg) {
  SequenceMetrics s;
  s.name = name;
  s.ate = ate(gt, pred, cfg.norm);
  s.t_rte = t_rte(gt, pred, cfg.t_rte_seconds, rate_hz, cfg.norm);
  s.d_rte = d_rte(gt, pred, cfg.d_rte_meters, cfg.norm);
  s.pde = pde(gt, pred);
  return s;
}

namespace {

nlohmann::json seq_json(const SequenceMetrics& s) {
  return {{"name", s.name}, {"ate", s.ate},   {"t_rte", s.t_rte},
          {"d_rte", s.d_rte}, {"pde", s.pde}, {"vel_mse", s.vel_mse}};
}

SequenceMetrics seq_from_json(const nlohmann::json& j) {
  SequenceMetrics s;
  s.name = j.at("name").get<std::string>();
  s.ate = j.at("ate").get<double>();
  s.t_rte = j.at("t_rte").get<double>();
  s.d_rte = j.at("d_rte").get<double>();
  s.pde = j.at("pde").get<double>();
  s.vel_mse = j.value("vel_mse", 0.0);
  return s;
}

}  // namespace

nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json seqs = nlohmann::json::array();
  for (const auto& s : r.sequences) seqs.push_back(seq_json(s));
  return {{"method", r.method},
          {"dataset", r.dataset},
          {"sequences", seqs},
          {"aggregate", seq_json(r.aggregate())}};
}

MetricReport metric_report_from_json(const nlohmann::json& j) {
  try {
    MetricReport r;
    r.method = j.at("method").get<std::string>();
    r.dataset = j.value("dataset", std::string());
    for (const auto& s : j.at("sequences")) r.sequences.push_back(seq_from_json(s));
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad metric report: ") + e.what());
  }
}

void write_cdf_csvs(const MetricReport& r, const std::filesystem::path& dir,
                    std::size_t n_points) {
  if (r.sequences.empty()) return;
  std::filesystem::create_directories(dir);
  const std::pair<const char*, double SequenceMetrics::*> metrics[] = {
      {"ate", &SequenceMetrics::ate},
      {"t_rte", &SequenceMetrics::t_rte},
      {"d_rte", &SequenceMetrics::d_rte},
      {"pde", &SequenceMetrics::pde}};
  for (const auto& [name, field] : metrics) {
    std::vector<double> values;
    for (const auto& s : r.sequences) values.push_back(s.*field);
    std::ofstream out(dir / (std::string(name) + "_cdf.csv"));
    if (!out) throw DataError("cannot write CDF file in " + dir.string());
    out << "value,cum_fraction\n";
    char buf[64];
    for (const auto& [v, f] : cdf_points(values, n_points)) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", v, f);
      out << buf;
    }
  }
}

}  // namespace ctin
