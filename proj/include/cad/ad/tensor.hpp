#pragma once

#include <Eigen/Core>

#include <numeric>
#include <string>
#include <vector>

#include "cad/core/error.hpp"

namespace cad::ad {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Index numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

// Dense row-major array with a runtime shape. A rank-0 shape holds a scalar.
template <typename T>
class Tensor {
 public:
  using Scalar = T;
  using Array = Eigen::Array<T, Eigen::Dynamic, 1>;

  Tensor() : shape_{0}, values_() {}
  explicit Tensor(Shape shape, T fill = T(0)) : shape_(std::move(shape)) {
    for (Index d : shape_) {
      if (d <= 0) fail(ErrorCode::ShapeMismatch, "tensor dims must be positive: " + shape_str(shape_));
    }
    values_ = Array::Constant(numel(shape_), fill);
  }
  Tensor(Shape shape, Array values) : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != numel(shape_)) {
      fail(ErrorCode::ShapeMismatch, "value count does not match shape " + shape_str(shape_));
    }
  }
  Tensor(Shape shape, const std::vector<T>& values)
      : Tensor(std::move(shape), Array(Eigen::Map<const Array>(values.data(), values.size()))) {}

  static Tensor scalar(T v) { return Tensor(Shape{}, v); }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index dim(Index i) const { return shape_[static_cast<std::size_t>(i)]; }
  Index size() const { return values_.size(); }
  bool empty() const { return values_.size() == 0; }

  T* data() { return values_.data(); }
  const T* data() const { return values_.data(); }
  Array& array() { return values_; }
  const Array& array() const { return values_; }

  T& operator[](Index i) { return values_[i]; }
  const T& operator[](Index i) const { return values_[i]; }

  T item() const {
    if (size() != 1) fail(ErrorCode::ShapeMismatch, "item() on tensor of shape " + shape_str(shape_));
    return values_[0];
  }

  Eigen::Map<RowMatrix<T>> matrix(Index rows, Index cols) { return {data(), rows, cols}; }
  Eigen::Map<const RowMatrix<T>> matrix(Index rows, Index cols) const { return {data(), rows, cols}; }

  void reshape(Shape shape) {
    if (numel(shape) != size()) fail(ErrorCode::ShapeMismatch, "cannot reshape to " + shape_str(shape));
    shape_ = std::move(shape);
  }

  bool all_finite() const { return values_.allFinite(); }

  template <typename U>
  Tensor<U> cast() const {
    return Tensor<U>(shape_, values_.template cast<U>().eval());
  }

  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && (values_ == other.values_).all();
  }

 private:
  Shape shape_;
  Array values_;
};

}  // namespace cad::ad
