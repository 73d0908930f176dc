#pragma once

#include <vector>

#include "ctin/dataio.hpp"
#include "ctin/geometry.hpp"
#include "ctin/trajectory.hpp"

namespace ctin {

struct KinematicState {
  UnitQuaternion orientation;
  Vec3 velocity = Vec3::Zero();
  Vec3 position = Vec3::Zero();
};

/// One forward-Euler strapdown step:
///   R' = R * exp(dt/2 w);  v' = v + (R a - g) dt;  p' = p + v dt
/// where `g` is the gravity reaction the accelerometer senses, (0, 0, 9.81).
KinematicState sins_step(const KinematicState& state, const Vec3& gyro, const Vec3& accel,
                         double dt, const Vec3& g);

/// Double integration over the whole sequence. With GroundTruth or
/// DeviceEstimated sources the per-sample orientation replaces the gyro
/// propagation; with ImuIntegrated it starts from `initial.orientation`.
Trajectory sins_integrate(const ImuSequence& seq, OrientationSource source,
                          const KinematicState& initial);

/// Initial state matching the sequence's ground truth at sample 0. The
/// velocity is v(0) - dt/2 a(0) estimated from the first three positions,
/// which keeps the Euler recursion free of a constant velocity offset.
KinematicState initial_state_from_truth(const ImuSequence& seq);

struct StepDetectorParams {
  double cutoff_hz = 3.0;
  double threshold_std = 0.5;  // peaks must exceed mean + threshold_std * std
  double min_gap_s = 0.3;
  double min_std = 0.05;  // m/s^2; flatter filtered signals have no steps
};

/// Step indices from accelerometer magnitude: 2nd-order Butterworth low-pass,
/// threshold on mean + k std, peaks closer than min_gap_s merged (the larger
/// peak wins). A filtered signal whose std is below min_std yields no steps.
std::vector<std::size_t> detect_steps(const std::vector<Vec3>& accel, double rate_hz,
                                      const StepDetectorParams& params = {});

/// Pedestrian dead reckoning: each detected step advances `stride_m` along
/// the yaw of the chosen orientation at that sample.
Trajectory pdr_track(const ImuSequence& seq, double stride_m = 0.67,
                     OrientationSource source = OrientationSource::kGroundTruth,
                     const StepDetectorParams& params = {});

/// PDR from explicit step indices and headings (useful for tests and
/// replaying a detector's output).
Trajectory pdr_from_steps(const std::vector<double>& timestamps,
                          const std::vector<std::size_t>& steps,
                          const std::vector<double>& headings, const Vec3& origin,
                          double stride_m);

}  // namespace ctin
