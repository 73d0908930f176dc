#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctin/geometry.hpp"
#include "ctin/pipeline.hpp"
#include "ctin/trajectory.hpp"

namespace ctin {

// Metrics compare the horizontal (x, y) components of two trajectories
// sampled at the same timestamps.

/// Forward-Euler positions p_0 = p0, p_{t+1} = p_t + v_t dt (z = 0).
Trajectory integrate_velocity(const RowMatrix& vel, const Vec2& p0, double dt, double t0 = 0.0);

struct WindowVelocity {
  std::size_t origin_index = 0;
  RowMatrix vel;  // m x 2
};

/// Per-sample velocity averaged over every window covering the sample.
/// Throws DataError if some sample in [0, sequence_len) is not covered.
RowMatrix stitch_velocities(const std::vector<WindowVelocity>& windows, std::size_t sequence_len);

/// stitch_velocities followed by integrate_velocity from p0.
Trajectory stitch_windows(const std::vector<WindowVelocity>& windows, std::size_t sequence_len,
                          const Vec2& p0, double dt, double t0 = 0.0);

// sqrt(mean |E|^2) is the default; kUnsquared uses sqrt(mean |E|).
enum class RmseNorm { kSquared, kUnsquared };

double ate(const Trajectory& gt, const Trajectory& pred, RmseNorm norm = RmseNorm::kSquared);

/// Relative error over a fixed interval of round(t_i * rate) samples, every
/// start sample. Throws MetricError when the sequence is not longer than t_i.
double t_rte(const Trajectory& gt, const Trajectory& pred, double t_i, double rate_hz,
             RmseNorm norm = RmseNorm::kSquared);

/// Relative error over the first span from each start whose ground-truth
/// arc length reaches d meters.
double d_rte(const Trajectory& gt, const Trajectory& pred, double d = 1.0,
             RmseNorm norm = RmseNorm::kSquared);

/// Final position error over ground-truth arc length.
double pde(const Trajectory& gt, const Trajectory& pred);

/// Horizontal arc length.
double path_length(const Trajectory& t);

/// Empirical CDF sampled at min(n_points, n) evenly spaced ranks:
/// (value, fraction of values <= value). The last point has fraction 1.
std::vector<std::pair<double, double>> cdf_points(std::vector<double> values,
                                                  std::size_t n_points);

struct MetricConfig {
  double t_rte_seconds = 60.0;
  double d_rte_meters = 1.0;
  RmseNorm norm = RmseNorm::kSquared;
};

struct SequenceMetrics {
  std::string name;
  double ate = 0.0;
  double t_rte = 0.0;
  double d_rte = 0.0;
  double pde = 0.0;
  double vel_mse = 0.0;
};

struct MetricReport {
  std::string method;
  std::string dataset;
  std::vector<SequenceMetrics> sequences;

  /// Mean of each metric over sequences.
  SequenceMetrics aggregate() const;
};

SequenceMetrics compute_metrics(const std::string& name, const Trajectory& gt,
                                const Trajectory& pred, double rate_hz, const MetricConfig& cfg);

nlohmann::json to_json(const MetricReport& r);
MetricReport metric_report_from_json(const nlohmann::json& j);

/// Writes `<metric>_cdf.csv` files (value,cum_fraction) for ate, t_rte,
/// d_rte and pde over the report's sequences.
void write_cdf_csvs(const MetricReport& r, const std::filesystem::path& dir,
                    std::size_t n_points = 100);

}  // namespace ctin
