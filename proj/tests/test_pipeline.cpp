#include <gtest/gtest.h>

#include <numbers>

#include "ctin/dataio.hpp"
#include "ctin/errors.hpp"
#include "ctin/pipeline.hpp"
#include "test_util.hpp"

using namespace ctin;

namespace {

constexpr double kPi = std::numbers::pi;

ImuSequence circle(double duration = 10.0) {
  SyntheticSpec s;
  s.trajectory_kind = TrajectoryKind::kCircle;
  s.duration_s = duration;
  s.gait.step_frequency_hz = 2.0;
  s.gait.pitch_sway_rad = 0.05;
  s.gait.surge_fraction = 0.2;
  s.accel_noise_std = 0.05;
  s.gyro_noise_std = 0.005;
  s.rng_seed = 4;
  return gen_synthetic(s);
}

}  // namespace

TEST(Windows, Counting) {
  WindowOptions o;
  o.window_len = 200;
  o.step = 10;
  EXPECT_EQ(window_starts(1000, o).size(), 81u);
  o.step = 37;
  EXPECT_EQ(window_starts(200, o).size(), 1u);
  for (std::size_t len : {200u, 201u, 399u, 400u, 1234u}) {
    for (std::size_t step : {1u, 7u, 50u}) {
      o.step = step;
      EXPECT_EQ(window_starts(len, o).size(), (len - 200) / step + 1);
    }
  }
}

TEST(Windows, CoverageAndShift) {
  WindowOptions o;
  o.step = 50;
  const auto tiles = window_starts(1000, o);
  EXPECT_EQ(tiles.front(), 0u);
  for (std::size_t i = 1; i < tiles.size(); ++i) EXPECT_EQ(tiles[i] - tiles[i - 1], 50u);
  o.random_shift_max = 49;
  o.seed = 3;
  const auto shifted = window_starts(1000, o);
  ASSERT_EQ(shifted.size(), tiles.size());
  bool any = false;
  for (std::size_t i = 0; i < shifted.size(); ++i) {
    EXPECT_GE(shifted[i], tiles[i]);
    EXPECT_LE(shifted[i], std::min<std::size_t>(tiles[i] + 49, 800));
    any = any || shifted[i] != tiles[i];
  }
  EXPECT_TRUE(any);
  EXPECT_EQ(window_starts(1000, o), shifted);
}

TEST(Windows, Errors) {
  WindowOptions o;
  EXPECT_THROW(window_starts(199, o), DataError);
  o.step = 0;
  EXPECT_THROW(window_starts(1000, o), ConfigError);
  o.step = 10;
  o.random_shift_max = 10;
  EXPECT_THROW(window_starts(1000, o), ConfigError);
}

TEST(Windows, DefaultSteps) {
  EXPECT_EQ(default_step(DatasetKind::kOxiod), 20u);
  EXPECT_EQ(default_step(DatasetKind::kRidi), 50u);
  EXPECT_EQ(default_step(DatasetKind::kRonin), 10u);
  EXPECT_EQ(default_step(DatasetKind::kSynthetic), 10u);
}

TEST(Windows, ContentsRotatedWithAnchor) {
  const ImuSequence seq = circle();
  WindowOptions o;
  o.step = 100;
  const auto ws = make_windows(seq, o);
  ASSERT_FALSE(ws.empty());
  for (const auto& w : ws) {
    ASSERT_EQ(w.length(), 200u);
    const UnitQuaternion q0 = seq.orientations[w.origin_index];
    EXPECT_EQ(w.anchor_orientation, q0);
    for (std::size_t r = 0; r < 200; r += 37) {
      const std::size_t i = w.origin_index + r;
      const Vec3 g = rotate_vec(q0, seq.gyro[i]);
      const Vec3 a = rotate_vec(q0, seq.accel[i]);
      for (int k = 0; k < 3; ++k) {
        EXPECT_NEAR(w.imu(static_cast<Eigen::Index>(r), k), g[k], 1e-12);
        EXPECT_NEAR(w.imu(static_cast<Eigen::Index>(r), 3 + k), a[k], 1e-12);
      }
      EXPECT_NEAR(w.gt_pos(static_cast<Eigen::Index>(r), 0), seq.gt_positions[i].x(), 1e-15);
    }
  }
}

TEST(Windows, RotateToNavFrame) {
  const auto [g0, a0] = rotate_to_nav_frame(Vec3(1, 2, 3), Vec3(4, 5, 6), UnitQuaternion());
  EXPECT_EQ(g0, Vec3(1, 2, 3));
  EXPECT_EQ(a0, Vec3(4, 5, 6));
  const auto [g, a] = rotate_to_nav_frame(Vec3(1, 0, 0), Vec3(0, 0, 9.81), yaw_rotation(kPi / 2));
  EXPECT_LT((g - Vec3(0, 1, 0)).norm(), 1e-9);
  EXPECT_LT((a - Vec3(0, 0, 9.81)).norm(), 1e-9);
  std::mt19937_64 rng(2);
  for (int i = 0; i < 100; ++i) {
    const Vec3 x = ctin::testing::random_vec(rng, 3), y = ctin::testing::random_vec(rng, 3);
    const auto [rx, ry] = rotate_to_nav_frame(x, y, ctin::testing::random_quat(rng));
    EXPECT_NEAR(rx.norm(), x.norm(), 1e-9);
    EXPECT_NEAR(ry.norm(), y.norm(), 1e-9);
  }
}

TEST(Windows, GroundTruthIntegralInvariant) {
  const ImuSequence seq = circle();
  WindowOptions o;
  o.step = 70;
  for (const auto& w : make_windows(seq, o)) {
    Vec2 p = w.gt_pos.row(0).transpose();
    for (Eigen::Index t = 1; t < w.gt_pos.rows(); ++t) {
      p += w.gt_vel.row(t - 1).transpose() * w.dt;
      EXPECT_LT((p - w.gt_pos.row(t).transpose()).norm(), 1e-9);
    }
  }
}

TEST(GroundTruth, ClosedForms) {
  SyntheticSpec s;
  s.duration_s = 3.0;
  const ImuSequence line = gen_synthetic(s);
  const WindowTruth lt = window_ground_truth(line, 100, 200, line.dt());
  for (Eigen::Index t = 0; t < 200; ++t) {
    EXPECT_NEAR(lt.gt_vel(t, 0), 1.0, 1e-9);
    EXPECT_NEAR(lt.gt_vel(t, 1), 0.0, 1e-12);
  }
  s.speed_mps = 0.0;
  const ImuSequence still = gen_synthetic(s);
  const WindowTruth st = window_ground_truth(still, 0, 200, still.dt());
  EXPECT_EQ(st.gt_vel.norm(), 0.0);
  EXPECT_EQ((st.gt_pos.rowwise() - st.gt_pos.row(0)).norm(), 0.0);
  SyntheticSpec c;
  c.trajectory_kind = TrajectoryKind::kCircle;
  c.duration_s = 5.0;
  const ImuSequence circ = gen_synthetic(c);
  const WindowTruth ct = window_ground_truth(circ, 0, circ.size(), circ.dt());
  for (Eigen::Index t = 0; t < ct.gt_vel.rows(); ++t) {
    EXPECT_NEAR(ct.gt_vel.row(t).norm(), 1.0, 2 * circ.dt());
  }
  EXPECT_THROW(window_ground_truth(circ, circ.size() - 10, 20, circ.dt()), DataError);
}

TEST(Augment, YawRotation) {
  const ImuSequence seq = circle();
  WindowOptions o;
  o.step = 500;
  const Window w = make_windows(seq, o).front();
  const Window same = augment_yaw(w, 0.0);
  EXPECT_EQ((same.imu - w.imu).norm(), 0.0);
  EXPECT_EQ((same.gt_vel - w.gt_vel).norm(), 0.0);

  Window unit = w;
  unit.gt_vel.row(0) << 1.0, 0.0;
  const Window quarter = augment_yaw(unit, kPi / 2);
  EXPECT_NEAR(quarter.gt_vel(0, 0), 0.0, 1e-12);
  EXPECT_NEAR(quarter.gt_vel(0, 1), 1.0, 1e-12);

  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 2 * kPi);
  for (int i = 0; i < 20; ++i) {
    const double a = u(rng), b = u(rng);
    const Window r = augment_yaw(w, a);
    for (Eigen::Index t = 0; t < w.gt_vel.rows(); ++t) {
      EXPECT_NEAR(r.gt_vel.row(t).norm(), w.gt_vel.row(t).norm(), 1e-9);
      EXPECT_NEAR(r.imu.row(t).head<3>().norm(), w.imu.row(t).head<3>().norm(), 1e-9);
      EXPECT_NEAR(r.imu(t, 5), w.imu(t, 5), 1e-12);
    }
    const Window ab = augment_yaw(augment_yaw(w, a), b);
    const Window direct = augment_yaw(w, a + b);
    EXPECT_LT((ab.imu - direct.imu).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((ab.gt_pos - direct.gt_pos).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_EQ(r.dt, w.dt);
  }
}

TEST(Augment, BiasPerturbation) {
  const ImuSequence seq = circle();
  WindowOptions o;
  o.step = 500;
  const Window w = make_windows(seq, o).front();
  std::mt19937_64 rng(11);
  const Window p = perturb_bias(w, rng);
  const RowMatrix diff = p.imu - w.imu;
  for (Eigen::Index t = 1; t < diff.rows(); ++t) {
    EXPECT_LT((diff.row(t) - diff.row(0)).cwiseAbs().maxCoeff(), 1e-12);
  }
  EXPECT_EQ((p.gt_vel - w.gt_vel).norm(), 0.0);
  EXPECT_EQ((p.gt_pos - w.gt_pos).norm(), 0.0);
  std::mt19937_64 again(11);
  EXPECT_EQ((perturb_bias(w, again).imu - p.imu).norm(), 0.0);

  std::mt19937_64 draws(12);
  double gmax = 0.0, amax = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const BiasOffsets b = draw_bias(draws);
    gmax = std::max(gmax, b.gyro.cwiseAbs().maxCoeff());
    amax = std::max(amax, b.accel.cwiseAbs().maxCoeff());
  }
  EXPECT_LE(gmax, 0.05);
  EXPECT_LE(amax, 0.2);
  EXPECT_GT(gmax, 0.049);
  EXPECT_GT(amax, 0.199);
}

TEST(Augment, BodyFrameBiasIsRotated) {
  const ImuSequence seq = circle();
  WindowOptions o;
  o.step = 500;
  const Window w = make_windows(seq, o)[1];
  BiasOffsets b;
  b.gyro = Vec3(0.01, 0.02, 0.03);
  b.accel = Vec3(0.1, -0.1, 0.05);
  const Window nav = apply_bias(w, b, BiasFrame::kNavigation);
  const Window body = apply_bias(w, b, BiasFrame::kBody);
  const Vec3 g = rotate_vec(w.anchor_orientation, b.gyro);
  EXPECT_LT((nav.imu.row(0).head<3>() - w.imu.row(0).head<3>() - b.gyro.transpose()).norm(), 1e-15);
  EXPECT_LT((body.imu.row(0).head<3>() - w.imu.row(0).head<3>() - g.transpose()).norm(), 1e-15);
}
