#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctin/geometry.hpp"

namespace ctin {

enum class DatasetKind { kRidi, kOxiod, kRonin, kIdol, kCtin, kSynthetic };

DatasetKind parse_dataset_kind(std::string_view name);
std::string to_string(DatasetKind kind);

enum class Phase { kTrain, kValidate, kTest };

enum class OrientationSource { kGroundTruth, kDeviceEstimated, kImuIntegrated };

OrientationSource parse_orientation_source(std::string_view name);
std::string to_string(OrientationSource source);

struct SequenceMeta {
  double sample_rate_hz = 200.0;
  std::string dataset_kind = "synthetic";
  std::string subject;
  double gravity = 9.81;
};

/// A time-stamped IMU stream with ground truth. Body-frame gyro (rad/s) and
/// specific force (m/s^2, gravity included); body->navigation orientations;
/// navigation-frame positions with +Z opposing gravity.
struct ImuSequence {
  SequenceMeta meta;
  std::vector<double> timestamps;
  std::vector<Vec3> gyro;
  std::vector<Vec3> accel;
  std::vector<UnitQuaternion> orientations;
  std::vector<Vec3> gt_positions;
  // Optional channel; only the synthetic generator fills it. Not part of the
  // CSV layout.
  std::vector<UnitQuaternion> device_orientations;

  std::size_t size() const { return timestamps.size(); }
  double dt() const { return 1.0 / meta.sample_rate_hz; }

  /// Throws DataError when any ImuSequence invariant is violated.
  void validate() const;
};

/// Picks the orientation source for a dataset and phase. The policy per
/// dataset: RIDI always integrates the IMU; OxIOD uses ground truth for
/// train/validate and the device estimate for test; RoNIN uses the device
/// estimate for test and ground truth otherwise (the end-of-sequence 20 degree
/// alignment rule cannot be evaluated without device data); IDOL, CTIN and
/// synthetic data use ground truth everywhere.
OrientationSource select_orientation(DatasetKind kind, Phase phase);

/// Orientation stream for the chosen source. ImuIntegrated propagates the
/// gyro from the first ground-truth sample. Throws DataError when the source
/// has no channel in this sequence.
std::vector<UnitQuaternion> orientation_stream(const ImuSequence& seq,
                                               OrientationSource source);

// Canonical CSV: `t,gx,gy,gz,ax,ay,az,qw,qx,qy,qz,px,py,pz` plus a
// `<stem>.meta.json` sidecar next to it.
ImuSequence load_sequence(const std::filesystem::path& csv_path);
void save_sequence(const ImuSequence& seq, const std::filesystem::path& csv_path);
std::filesystem::path sidecar_path(const std::filesystem::path& csv_path);

/// All `*.csv` sequence files in `dir`, sorted by name.
std::vector<std::filesystem::path> list_sequences(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Synthetic generation

enum class TrajectoryKind { kLine, kCircle, kFigureEight, kRandomHeadingWalk };

TrajectoryKind parse_trajectory_kind(std::string_view name);
std::string to_string(TrajectoryKind kind);

/// Periodic walking motion layered on the path. All zeros means a rigid,
/// constant-speed carrier.
struct GaitProfile {
  double step_frequency_hz = 0.0;
  double surge_fraction = 0.0;      // speed oscillates as v (1 + s sin(phase))
  double bounce_amplitude_m = 0.0;  // vertical z = a sin(phase)
  double pitch_sway_rad = 0.0;      // device pitch = p sin(phase)
};

struct SyntheticSpec {
  TrajectoryKind trajectory_kind = TrajectoryKind::kLine;
  double duration_s = 60.0;
  double sample_rate_hz = 200.0;
  double speed_mps = 1.0;
  double radius_m = 5.0;  // circle and figure-eight
  double initial_heading_rad = 0.0;
  Vec3 gyro_bias = Vec3::Zero();
  Vec3 accel_bias = Vec3::Zero();
  double gyro_noise_std = 0.0;
  double accel_noise_std = 0.0;
  std::uint64_t rng_seed = 0;
  GaitProfile gait;
  // Per-sqrt-second std of the yaw random walk applied to the device
  // orientation channel. Zero leaves the channel equal to ground truth.
  double device_yaw_walk_std = 0.0;
  double gravity = 9.81;
  std::string subject = "synthetic";

  void validate() const;
};

/// Synthesizes an IMU stream by differentiating an analytic trajectory twice
/// and applying the sensor model measured = true + bias + N(0, std^2).
/// Ground-truth positions and orientations are the exact analytic values.
ImuSequence gen_synthetic(const SyntheticSpec& spec);

/// A seeded corpus mixing circles, lines, figure-eights and random-heading
/// walks with walking gait, per-sequence sensor bias and white noise.
std::vector<SyntheticSpec> make_corpus_specs(int count, double duration_s,
                                             std::uint64_t seed);

nlohmann::json to_json(const SyntheticSpec& spec);
/// Missing keys keep their defaults; unknown keys throw ConfigError.
SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j);

/// Generation request: either {"corpus": {"count", "duration_s", "seed"}} or
/// {"sequences": [spec, ...]}.
std::vector<SyntheticSpec> generation_plan_from_json(const nlohmann::json& j);

}  // namespace ctin
