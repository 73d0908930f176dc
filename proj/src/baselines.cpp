#include "ctin/baselines.hpp"

#include <cmath>
#include <numbers>

#include "ctin/errors.hpp"

namespace ctin {

void Trajectory::validate() const {
  if (timestamps.size() != positions.size()) {
    throw DataError("trajectory timestamps and positions differ in length");
  }
  for (std::size_t i = 1; i < timestamps.size(); ++i) {
    if (!(timestamps[i] > timestamps[i - 1])) {
      throw DataError("trajectory timestamps not strictly increasing at index " +
                      std::to_string(i));
    }
  }
}

Trajectory Trajectory::planar() const {
  Trajectory out = *this;
  for (auto& p : out.positions) p.z() = 0.0;
  return out;
}

KinematicState sins_step(const KinematicState& state, const Vec3& gyro, const Vec3& accel,
                         double dt, const Vec3& g) {
  KinematicState next;
  next.orientation = quat_mul(state.orientation, quat_exp(gyro, dt));
  const Vec3 delta = (rotate_vec(state.orientation, accel) - g) * dt;
  next.velocity = state.velocity + delta;
  next.position = state.position + state.velocity * dt;
  return next;
}

KinematicState initial_state_from_truth(const ImuSequence& seq) {
  seq.validate();
  KinematicState s;
  s.orientation = seq.orientations.front();
  s.position = seq.gt_positions.front();
  const auto& p = seq.gt_positions;
  if (p.size() < 3) {
    s.velocity = (p[1] - p[0]) / seq.dt();
  } else {
    // v(0) - dt/2 a(0) from three samples. The Euler velocity recursion sums
    // accelerations at interval starts, which offsets every later velocity by
    // dt/2 a(0); starting half a step back cancels that constant.
    s.velocity = (-2.0 * p[0] + 3.0 * p[1] - p[2]) / seq.dt();
  }
  return s;
}

Trajectory sins_integrate(const ImuSequence& seq, OrientationSource source,
                          const KinematicState& initial) {
  seq.validate();
  const bool bypass = source != OrientationSource::kImuIntegrated;
  std::vector<UnitQuaternion> provided;
  if (bypass) provided = orientation_stream(seq, source);

  const Vec3 g(0.0, 0.0, seq.meta.gravity);
  const double dt = seq.dt();
  Trajectory traj;
  traj.timestamps = seq.timestamps;
  traj.positions.reserve(seq.size());

  KinematicState state = initial;
  for (std::size_t k = 0; k < seq.size(); ++k) {
    if (bypass) state.orientation = provided[k];
    traj.positions.push_back(state.position);
    if (k + 1 < seq.size()) state = sins_step(state, seq.gyro[k], seq.accel[k], dt, g);
  }
  return traj;
}

std::vector<std::size_t> detect_steps(const std::vector<Vec3>& accel, double rate_hz,
                                      const StepDetectorParams& params) {
  if (rate_hz < 20.0) throw ConfigError("step detection needs at least 20 Hz");
  const std::size_t n = accel.size();
  if (n < 3) return {};

  // Butterworth low-pass via the bilinear transform.
  const double k = std::tan(std::numbers::pi * params.cutoff_hz / rate_hz);
  const double norm = 1.0 / (1.0 + std::numbers::sqrt2 * k + k * k);
  const double b0 = k * k * norm;
  const double b1 = 2.0 * b0;
  const double b2 = b0;
  const double a1 = 2.0 * (k * k - 1.0) * norm;
  const double a2 = (1.0 - std::numbers::sqrt2 * k + k * k) * norm;

  std::vector<double> y(n);
  double x1 = accel[0].norm(), x2 = x1, y1 = x1, y2 = x1;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = accel[i].norm();
    y[i] = b0 * x + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = x;
    y2 = y1;
    y1 = y[i];
  }

  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : y) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(n));
  // Without motion the filtered signal is flat up to rounding ripple.
  if (sd < params.min_std) return {};
  const double threshold = mean + params.threshold_std * sd;
  const auto gap = static_cast<std::size_t>(std::llround(params.min_gap_s * rate_hz));

  std::vector<std::size_t> steps;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!(y[i] > threshold && y[i] > y[i - 1] && y[i] >= y[i + 1])) continue;
    if (!steps.empty() && i - steps.back() < gap) {
      if (y[i] > y[steps.back()]) steps.back() = i;
      continue;
    }
    steps.push_back(i);
  }
  return steps;
}

Trajectory pdr_from_steps(const std::vector<double>& timestamps,
                          const std::vector<std::size_t>& steps,
                          const std::vector<double>& headings, const Vec3& origin,
                          double stride_m) {
  if (steps.size() != headings.size()) {
    throw ConfigError("pdr needs one heading per step");
  }
  Trajectory traj;
  traj.timestamps = timestamps;
  traj.positions.assign(timestamps.size(), origin);
  Vec3 p = origin;
  std::size_t next = 0;
  for (std::size_t i = 0; i < timestamps.size(); ++i) {
    while (next < steps.size() && steps[next] == i) {
      p += stride_m * Vec3(std::cos(headings[next]), std::sin(headings[next]), 0.0);
      ++next;
    }
    traj.positions[i] = p;
  }
  return traj;
}

Trajectory pdr_track(const ImuSequence& seq, double stride_m, OrientationSource source,
                     const StepDetectorParams& params) {
  seq.validate();
  const auto orientations = orientation_stream(seq, source);
  const auto steps = detect_steps(seq.accel, seq.meta.sample_rate_hz, params);
  std::vector<double> headings;
  headings.reserve(steps.size());
  for (std::size_t s : steps) headings.push_back(quat_to_yaw(orientations[s]));
  Vec3 origin = seq.gt_positions.front();
  origin.z() = 0.0;
  return pdr_from_steps(seq.timestamps, steps, headings, origin, stride_m);
}

}  // namespace ctin
