#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace ctin::ad {

using Shape = std::vector<int>;

std::string shape_str(const Shape& shape);
std::size_t shape_size(const Shape& shape);

using RowMajorMap =
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstRowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
// Vectorized Eigen reductions peel an unaligned head, so the summation order
// would otherwise depend on where malloc placed the buffer.
using Storage = std::vector<double, Eigen::aligned_allocator<double>>;

using ArrayMap = Eigen::Map<Eigen::ArrayXd>;
using ConstArrayMap = Eigen::Map<const Eigen::ArrayXd>;

/// Dense row-major array of doubles with rank 0..3 (batch x time x channel).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor(Shape{}, v); }

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  /// Axis size; negative indices count from the end.
  int dim(int axis) const;
  std::size_t size() const { return data_.size(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  Storage& values() { return data_; }
  const Storage& values() const { return data_; }

  double item() const;

  ArrayMap array() { return {data_.data(), static_cast<Eigen::Index>(data_.size())}; }
  ConstArrayMap array() const {
    return {data_.data(), static_cast<Eigen::Index>(data_.size())};
  }
  /// View as (size / last) x last.
  RowMajorMap matrix();
  ConstRowMajorMap matrix() const;

  void fill(double v);
  Tensor reshaped(Shape shape) const;

 private:
  Shape shape_;
  Storage data_ = Storage(1, 0.0);
};

}  // namespace ctin::ad
