#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "ctin/geometry.hpp"

namespace ctin::testing {

inline UnitQuaternion random_quat(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return {n(rng), n(rng), n(rng), n(rng)};
}

inline Vec3 random_vec(std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return {u(rng), u(rng), u(rng)};
}

inline double quat_distance(const UnitQuaternion& a, const UnitQuaternion& b) {
  // q and -q are the same rotation.
  const double plus = std::abs(a.w() - b.w()) + std::abs(a.x() - b.x()) +
                      std::abs(a.y() - b.y()) + std::abs(a.z() - b.z());
  const double minus = std::abs(a.w() + b.w()) + std::abs(a.x() + b.x()) +
                       std::abs(a.y() + b.y()) + std::abs(a.z() + b.z());
  return std::min(plus, minus);
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    std::string name = "ctin_test";
    if (info) name += std::string("_") + info->test_suite_name() + "_" + info->name();
    path_ = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  std::filesystem::path path_;
};

}  // namespace ctin::testing
