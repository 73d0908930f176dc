#include <gtest/gtest.h>

#include <numbers>

#include "ctin/baselines.hpp"
#include "ctin/errors.hpp"
#include "ctin/metrics.hpp"
#include "test_util.hpp"

using namespace ctin;

namespace {

constexpr double kPi = std::numbers::pi;
const Vec3 kG(0, 0, 9.81);

ImuSequence clean_circle(double duration) {
  SyntheticSpec s;
  s.trajectory_kind = TrajectoryKind::kCircle;
  s.radius_m = 5.0;
  s.speed_mps = 1.0;
  s.duration_s = duration;
  return gen_synthetic(s);
}

double sins_ate(const ImuSequence& seq, OrientationSource src) {
  const Trajectory tr = sins_integrate(seq, src, initial_state_from_truth(seq));
  return ate(Trajectory{seq.timestamps, seq.gt_positions}.planar(), tr.planar());
}

ImuSequence with_gyro_bias(ImuSequence seq, const Vec3& b) {
  for (auto& w : seq.gyro) w += b;
  return seq;
}

}  // namespace

TEST(Sins, StationaryEquilibrium) {
  KinematicState s;
  s.position = Vec3(1, 2, 3);
  for (int i = 0; i < 1000; ++i) s = sins_step(s, Vec3::Zero(), kG, 0.005, kG);
  EXPECT_EQ(s.position, Vec3(1, 2, 3));
  EXPECT_EQ(s.velocity, Vec3::Zero());
  EXPECT_EQ(s.orientation, UnitQuaternion());
}

TEST(Sins, ConstantAcceleration) {
  KinematicState s;
  const double dt = 0.01;
  for (int k = 1; k <= 50; ++k) {
    const KinematicState prev = s;
    s = sins_step(s, Vec3::Zero(), kG + Vec3(1, 0, 0), dt, kG);
    EXPECT_NEAR(s.velocity.x(), k * dt, 1e-12);
    EXPECT_EQ(s.position, prev.position + prev.velocity * dt);
  }
}

TEST(Sins, HeadingFlip) {
  const KinematicState s = sins_step(KinematicState{}, Vec3(0, 0, kPi), kG, 1.0, kG);
  EXPECT_LT(ctin::testing::quat_distance(s.orientation, UnitQuaternion(0, 0, 0, 1)), 1e-12);
}

TEST(Sins, LinearInAcceleration) {
  std::mt19937_64 rng(3);
  KinematicState s0;
  s0.orientation = ctin::testing::random_quat(rng);
  s0.velocity = ctin::testing::random_vec(rng);
  const Vec3 w = ctin::testing::random_vec(rng), a = ctin::testing::random_vec(rng),
             b = ctin::testing::random_vec(rng);
  const double dt = 0.005;
  const auto sa = sins_step(s0, w, a, dt, kG), sb = sins_step(s0, w, b, dt, kG),
             sab = sins_step(s0, w, a + b, dt, kG);
  // The velocity increment is additive in the measured acceleration.
  EXPECT_LT(((sab.velocity - s0.velocity) - (sa.velocity - s0.velocity) -
             (sb.velocity - s0.velocity) - kG * dt)
                .norm(),
            1e-14);
}

TEST(Sins, CleanCircleTruncation) {
  const ImuSequence seq = clean_circle(60.0);
  // Forward-Euler truncation on a 5 m circle: a few millimeters.
  EXPECT_LT(sins_ate(seq, OrientationSource::kGroundTruth), 0.01);
}

TEST(Sins, BiasDriftIsSuperlinear) {
  const ImuSequence long_seq = with_gyro_bias(clean_circle(60.0), Vec3(0, 0, 0.05));
  const ImuSequence short_seq = with_gyro_bias(clean_circle(10.0), Vec3(0, 0, 0.05));
  const double a60 = sins_ate(long_seq, OrientationSource::kImuIntegrated);
  const double a10 = sins_ate(short_seq, OrientationSource::kImuIntegrated);
  EXPECT_GT(a60, 10.0 * a10);
}

TEST(Sins, ZeroInputsStayPut) {
  ImuSequence seq = clean_circle(1.0);
  for (auto& g : seq.gyro) g.setZero();
  for (auto& a : seq.accel) a = kG;
  KinematicState init;
  init.position = Vec3(4, 5, 0);
  const Trajectory t = sins_integrate(seq, OrientationSource::kImuIntegrated, init);
  ASSERT_EQ(t.size(), seq.size());
  for (const auto& p : t.positions) EXPECT_EQ(p, Vec3(4, 5, 0));
}

TEST(Sins, TranslationEquivariant) {
  const ImuSequence seq = clean_circle(5.0);
  KinematicState a = initial_state_from_truth(seq), b = a;
  b.position += Vec3(10, -3, 1);
  const Trajectory ta = sins_integrate(seq, OrientationSource::kGroundTruth, a);
  const Trajectory tb = sins_integrate(seq, OrientationSource::kGroundTruth, b);
  for (std::size_t i = 0; i < ta.size(); i += 50) {
    EXPECT_LT((tb.positions[i] - ta.positions[i] - Vec3(10, -3, 1)).norm(), 1e-9);
  }
}

TEST(Sins, MissingChannel) {
  ImuSequence seq = clean_circle(1.0);
  seq.device_orientations.clear();
  EXPECT_THROW(sins_integrate(seq, OrientationSource::kDeviceEstimated, KinematicState{}),
               DataError);
}

TEST(Steps, ConstantAccelHasNone) {
  std::vector<Vec3> acc(2000, kG);
  EXPECT_TRUE(detect_steps(acc, 200.0).empty());
}

TEST(Steps, TwoHertzBounce) {
  std::vector<Vec3> acc;
  for (int i = 0; i < 2000; ++i) {
    const double t = i / 200.0;
    acc.emplace_back(0, 0, 9.81 + 2.0 * std::sin(2 * kPi * 2.0 * t));
  }
  const auto steps = detect_steps(acc, 200.0);
  EXPECT_GE(steps.size(), 19u);
  EXPECT_LE(steps.size(), 21u);
}

TEST(Steps, RefractoryGap) {
  std::vector<Vec3> acc(400, kG);
  // Two sharp bumps 0.1 s apart merge into one step.
  for (int c : {200, 220}) {
    for (int d = -6; d <= 6; ++d) acc[static_cast<std::size_t>(c + d)].z() += 8.0 * std::exp(-d * d / 8.0);
  }
  EXPECT_EQ(detect_steps(acc, 200.0).size(), 1u);
}

TEST(Pdr, FixedHeading) {
  std::vector<double> ts;
  for (int i = 0; i < 100; ++i) ts.push_back(i * 0.01);
  std::vector<std::size_t> steps;
  for (std::size_t i = 5; i < 100; i += 10) steps.push_back(i);
  const Trajectory t = pdr_from_steps(ts, steps, std::vector<double>(10, 0.0), Vec3::Zero(), 0.67);
  EXPECT_LT((t.positions.back() - Vec3(6.7, 0, 0)).norm(), 1e-12);
  EXPECT_NEAR(path_length(t), 0.67 * 10, 1e-12);
}

TEST(Pdr, ClosedSquare) {
  std::vector<double> ts{0, 1, 2, 3, 4};
  const Trajectory t =
      pdr_from_steps(ts, {1, 2, 3, 4}, {0.0, kPi / 2, kPi, 3 * kPi / 2}, Vec3::Zero(), 0.67);
  EXPECT_LT(t.positions.back().norm(), 1e-9);
}

TEST(Pdr, NoStepsIsConstant) {
  SyntheticSpec s;
  s.duration_s = 5.0;
  const ImuSequence seq = gen_synthetic(s);
  const Trajectory t = pdr_track(seq);
  for (const auto& p : t.positions) EXPECT_EQ(p, seq.gt_positions.front());
}

TEST(Pdr, WalkingLine) {
  SyntheticSpec s;
  s.duration_s = 20.0;
  s.speed_mps = 1.34;
  s.gait.step_frequency_hz = 2.0;
  s.gait.bounce_amplitude_m = 0.05;
  const ImuSequence seq = gen_synthetic(s);
  const Trajectory t = pdr_track(seq);
  const auto steps = detect_steps(seq.accel, seq.meta.sample_rate_hz);
  EXPECT_NEAR(static_cast<double>(steps.size()), 40.0, 2.0);
  EXPECT_NEAR(path_length(t), 0.67 * static_cast<double>(steps.size()), 1e-9);
  EXPECT_GT(t.positions.back().x(), 20.0);
}
