#include "ctin/autodiff/tensor.hpp"

#include <algorithm>

#include "ctin/errors.hpp"

namespace ctin::ad {

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw DimensionError("negative dimension in " + shape_str(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {
  if (shape_.size() > 3) throw DimensionError("rank above 3: " + shape_str(shape_));
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(values.begin(), values.end()) {
  if (shape_.size() > 3) throw DimensionError("rank above 3: " + shape_str(shape_));
  if (data_.size() != shape_size(shape_)) {
    throw DimensionError("tensor of shape " + shape_str(shape_) + " given " +
                         std::to_string(data_.size()) + " values");
  }
}

int Tensor::dim(int axis) const {
  const int r = rank();
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " +
                         shape_str(shape_));
  }
  return shape_[static_cast<std::size_t>(a)];
}

double Tensor::item() const {
  if (data_.size() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape_));
  return data_[0];
}

RowMajorMap Tensor::matrix() {
  const Eigen::Index cols = shape_.empty() ? 1 : shape_.back();
  const Eigen::Index rows = cols == 0 ? 0 : static_cast<Eigen::Index>(data_.size()) / cols;
  return {data_.data(), rows, cols};
}

ConstRowMajorMap Tensor::matrix() const {
  const Eigen::Index cols = shape_.empty() ? 1 : shape_.back();
  const Eigen::Index rows = cols == 0 ? 0 : static_cast<Eigen::Index>(data_.size()) / cols;
  return {data_.data(), rows, cols};
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw DimensionError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  }
  Tensor out = *this;
  out.shape_ = std::move(shape);
  return out;
}

}  // namespace ctin::ad
