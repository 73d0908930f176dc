#include "ctin/pipeline.hpp"

#include <cmath>
#include <string>

#include "ctin/errors.hpp"

namespace ctin {

std::size_t default_step(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::kOxiod: return 20;
    case DatasetKind::kRidi: return 50;
    default: return 10;
  }
}

std::vector<std::size_t> window_starts(std::size_t sequence_len, const WindowOptions& opts) {
  if (opts.window_len == 0) throw ConfigError("window length must be positive");
  if (opts.step < 1) throw ConfigError("window step must be at least 1");
  if (opts.random_shift_max >= opts.step) {
    throw ConfigError("random shift must be smaller than the window step");
  }
  if (opts.window_len > sequence_len) {
    throw DataError("window length " + std::to_string(opts.window_len) +
                    " exceeds sequence length " + std::to_string(sequence_len));
  }
  const std::size_t last = sequence_len - opts.window_len;
  const std::size_t count = last / opts.step + 1;
  std::vector<std::size_t> starts;
  starts.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t shift = 0;
    if (opts.random_shift_max > 0) {
      std::seed_seq seq{static_cast<std::uint32_t>(opts.seed),
                        static_cast<std::uint32_t>(opts.seed >> 32),
                        static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i >> 32)};
      std::mt19937_64 rng(seq);
      std::uniform_int_distribution<std::size_t> dist(0, opts.random_shift_max);
      shift = dist(rng);
    }
    starts.push_back(std::min(i * opts.step + shift, last));
  }
  return starts;
}

std::pair<Vec3, Vec3> rotate_to_nav_frame(const Vec3& gyro_body, const Vec3& accel_body,
                                          const UnitQuaternion& q0) {
  return {rotate_vec(q0, gyro_body), rotate_vec(q0, accel_body)};
}

WindowTruth window_ground_truth(const ImuSequence& seq, std::size_t start, std::size_t m,
                                double dt) {
  if (m == 0 || start + m > seq.size()) {
    throw DataError("ground-truth slice [" + std::to_string(start) + ", " +
                    std::to_string(start + m) + ") outside sequence of length " +
                    std::to_string(seq.size()));
  }
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  WindowTruth out{RowMatrix(m, 2), RowMatrix(m, 2)};
  for (std::size_t t = 0; t < m; ++t) {
    out.gt_pos(t, 0) = seq.gt_positions[start + t].x();
    out.gt_pos(t, 1) = seq.gt_positions[start + t].y();
  }
  for (std::size_t t = 0; t + 1 < m; ++t) {
    out.gt_vel.row(t) = (out.gt_pos.row(t + 1) - out.gt_pos.row(t)) / dt;
  }
  if (m >= 2) {
    out.gt_vel.row(m - 1) = out.gt_vel.row(m - 2);
  } else {
    out.gt_vel.row(0).setZero();
  }
  return out;
}

Window make_window(const ImuSequence& seq, std::span<const UnitQuaternion> orientations,
                   std::size_t start, std::size_t len) {
  if (orientations.size() != seq.size()) {
    throw DataError("orientation stream length differs from sequence length");
  }
  Window w;
  w.dt = seq.dt();
  w.origin_index = start;
  w.anchor_orientation = orientations[start];
  w.imu.resize(static_cast<Eigen::Index>(len), 6);
  for (std::size_t t = 0; t < len; ++t) {
    const auto [g, a] =
        rotate_to_nav_frame(seq.gyro[start + t], seq.accel[start + t], w.anchor_orientation);
    w.imu.row(static_cast<Eigen::Index>(t)) << g.x(), g.y(), g.z(), a.x(), a.y(), a.z();
  }
  auto truth = window_ground_truth(seq, start, len, w.dt);
  w.gt_vel = std::move(truth.gt_vel);
  w.gt_pos = std::move(truth.gt_pos);
  return w;
}

std::vector<Window> make_windows(const ImuSequence& seq,
                                 std::span<const UnitQuaternion> orientations,
                                 const WindowOptions& opts) {
  std::vector<Window> out;
  for (std::size_t start : window_starts(seq.size(), opts)) {
    out.push_back(make_window(seq, orientations, start, opts.window_len));
  }
  return out;
}

std::vector<Window> make_windows(const ImuSequence& seq, const WindowOptions& opts) {
  return make_windows(seq, std::span<const UnitQuaternion>(seq.orientations), opts);
}

Window augment_yaw(const Window& w, double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Window out = w;
  for (Eigen::Index t = 0; t < w.imu.rows(); ++t) {
    for (int base : {0, 3}) {
      const double x = w.imu(t, base);
      const double y = w.imu(t, base + 1);
      out.imu(t, base) = c * x - s * y;
      out.imu(t, base + 1) = s * x + c * y;
    }
    for (const auto* src : {&w.gt_vel, &w.gt_pos}) {
      RowMatrix& dst = (src == &w.gt_vel) ? out.gt_vel : out.gt_pos;
      const double x = (*src)(t, 0);
      const double y = (*src)(t, 1);
      dst(t, 0) = c * x - s * y;
      dst(t, 1) = s * x + c * y;
    }
  }
  out.anchor_orientation = quat_mul(yaw_rotation(theta), w.anchor_orientation);
  return out;
}

BiasOffsets draw_bias(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> gyro(-0.05, 0.05);
  std::uniform_real_distribution<double> accel(-0.2, 0.2);
  BiasOffsets b;
  for (int i = 0; i < 3; ++i) b.gyro[i] = gyro(rng);
  for (int i = 0; i < 3; ++i) b.accel[i] = accel(rng);
  return b;
}

Window apply_bias(const Window& w, const BiasOffsets& bias, BiasFrame frame) {
  Vec3 g = bias.gyro;
  Vec3 a = bias.accel;
  if (frame == BiasFrame::kBody) {
    g = rotate_vec(w.anchor_orientation, g);
    a = rotate_vec(w.anchor_orientation, a);
  }
  Window out = w;
  for (Eigen::Index t = 0; t < w.imu.rows(); ++t) {
    for (int i = 0; i < 3; ++i) {
      out.imu(t, i) += g[i];
      out.imu(t, 3 + i) += a[i];
    }
  }
  return out;
}

Window perturb_bias(const Window& w, std::mt19937_64& rng, BiasFrame frame) {
  return apply_bias(w, draw_bias(rng), frame);
}

}  // namespace ctin
