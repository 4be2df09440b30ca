#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>

#include "mustan/error.hpp"

namespace mustan {

// NCHW extents. Convolution weights reuse the same struct as
// (out_channels, in_channels, kernel_h, kernel_w).
struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  Eigen::Index size() const {
    return static_cast<Eigen::Index>(n) * c * h * w;
  }
  Eigen::Index plane() const { return static_cast<Eigen::Index>(h) * w; }
  Eigen::Index sample() const { return static_cast<Eigen::Index>(c) * h * w; }

  friend bool operator==(const Shape&, const Shape&) = default;

  std::string str() const {
    return std::to_string(n) + "x" + std::to_string(c) + "x" +
           std::to_string(h) + "x" + std::to_string(w);
  }
};

template <typename Scalar>
using RowMatrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Binary or small-integer image planes (masks, ignore maps, instance ids).
using Mask =
    Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Dense contiguous NCHW tensor. Sample n is stored as a row-major
// C x (H*W) matrix, which is what the convolution GEMMs consume.
template <typename Scalar>
class Tensor {
 public:
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  using SampleMap = Eigen::Map<RowMatrix<Scalar>>;
  using ConstSampleMap = Eigen::Map<const RowMatrix<Scalar>>;

  Tensor() = default;
  explicit Tensor(Shape shape) : shape_(shape), data_(Array::Zero(shape.size())) {}
  Tensor(Shape shape, Scalar fill)
      : shape_(shape), data_(Array::Constant(shape.size(), fill)) {}
  Tensor(Shape shape, Array data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.size())
      throw ShapeError("tensor data size " + std::to_string(data_.size()) +
                       " does not match shape " + shape_.str());
  }

  const Shape& shape() const { return shape_; }
  int n() const { return shape_.n; }
  int c() const { return shape_.c; }
  int h() const { return shape_.h; }
  int w() const { return shape_.w; }
  Eigen::Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  Array& array() { return data_; }
  const Array& array() const { return data_; }
  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  Scalar& operator()(int n, int c, int y, int x) { return data_[index(n, c, y, x)]; }
  Scalar operator()(int n, int c, int y, int x) const { return data_[index(n, c, y, x)]; }

  SampleMap sample(int n) {
    return SampleMap(data_.data() + n * shape_.sample(), shape_.c, shape_.plane());
  }
  ConstSampleMap sample(int n) const {
    return ConstSampleMap(data_.data() + n * shape_.sample(), shape_.c, shape_.plane());
  }

  Scalar* plane_data(int n, int c) { return data_.data() + n * shape_.sample() + c * shape_.plane(); }
  const Scalar* plane_data(int n, int c) const {
    return data_.data() + n * shape_.sample() + c * shape_.plane();
  }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, data_.template cast<Other>());
  }

  void set_zero() { data_.setZero(); }

 private:
  Eigen::Index index(int n, int c, int y, int x) const {
    return ((static_cast<Eigen::Index>(n) * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }

  Shape shape_;
  Array data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace mustan
