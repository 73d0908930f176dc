#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "ctin/dataio.hpp"
#include "ctin/geometry.hpp"

namespace ctin {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// One training/evaluation slice. `imu` columns are gyro xyz then accel xyz,
/// expressed in the navigation frame of the anchor orientation.
struct Window {
  RowMatrix imu;     // m x 6
  RowMatrix gt_vel;  // m x 2, m/s
  RowMatrix gt_pos;  // m x 2, m
  double dt = 0.0;
  std::size_t origin_index = 0;
  UnitQuaternion anchor_orientation;

  std::size_t length() const { return static_cast<std::size_t>(imu.rows()); }
};

struct WindowOptions {
  std::size_t window_len = 200;
  std::size_t step = 10;
  std::size_t random_shift_max = 0;
  std::uint64_t seed = 0;  // per-window shift streams derive from this
};

/// Default sliding-window step for a dataset: 20 for OxIOD, 50 for RIDI and
/// 10 for everything else.
std::size_t default_step(DatasetKind kind);

/// Window start indices: i * step + shift_i, shift_i ~ U{0..random_shift_max}
/// drawn from a stream keyed on (seed, i), clipped to fit.
std::vector<std::size_t> window_starts(std::size_t sequence_len, const WindowOptions& opts);

/// Cuts windows, rotating IMU rows into the navigation frame with the
/// orientation at each window's first sample.
std::vector<Window> make_windows(const ImuSequence& seq,
                                 std::span<const UnitQuaternion> orientations,
                                 const WindowOptions& opts);
std::vector<Window> make_windows(const ImuSequence& seq, const WindowOptions& opts);

/// Builds a single window starting at `start`.
Window make_window(const ImuSequence& seq, std::span<const UnitQuaternion> orientations,
                   std::size_t start, std::size_t len);

std::pair<Vec3, Vec3> rotate_to_nav_frame(const Vec3& gyro_body, const Vec3& accel_body,
                                          const UnitQuaternion& q0);

/// Rotates every IMU triplet and the planar ground truth by `theta` about +Z.
Window augment_yaw(const Window& w, double theta);

enum class BiasFrame {
  kNavigation,  // offsets added to the rotated rows (default)
  kBody,        // offsets drawn in the body frame, then rotated by the anchor
};

struct BiasOffsets {
  Vec3 gyro = Vec3::Zero();
  Vec3 accel = Vec3::Zero();
};

/// Draws one constant offset per window, uniform in [-0.05, 0.05] rad/s per
/// gyro axis and [-0.2, 0.2] m/s^2 per accel axis.
BiasOffsets draw_bias(std::mt19937_64& rng);

Window perturb_bias(const Window& w, std::mt19937_64& rng,
                    BiasFrame frame = BiasFrame::kNavigation);
Window apply_bias(const Window& w, const BiasOffsets& bias, BiasFrame frame);

struct WindowTruth {
  RowMatrix gt_vel;
  RowMatrix gt_pos;
};

/// Horizontal positions sliced from the sequence and forward-difference
/// velocities v_t = (p_{t+1} - p_t) / dt, last row repeated.
WindowTruth window_ground_truth(const ImuSequence& seq, std::size_t start, std::size_t m,
                                double dt);

}  // namespace ctin
