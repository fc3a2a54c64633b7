#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <vector>

#include "spectral/common.hpp"

namespace spectral {

/// Dense row-major tensor of 64-bit floats. Rank 1 or 2 in practice.
/// Values are immutable by convention once a forward pass has produced
/// them; gradient buffers are the only mutated tensors.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
    std::size_t n = 1;
    for (auto e : shape_) n *= e;
    data_.assign(n, 0.0);
  }

  Tensor(std::initializer_list<std::size_t> shape)
      : Tensor(std::vector<std::size_t>(shape)) {}

  static Tensor zeros(std::vector<std::size_t> shape) {
    return Tensor(std::move(shape));
  }

  static Tensor full(std::vector<std::size_t> shape, double v) {
    Tensor t(std::move(shape));
    t.fill(v);
    return t;
  }

  static Tensor scalar(double v) { return full({1}, v); }

  static Tensor from_vector(std::vector<double> v) {
    Tensor t;
    t.shape_ = {v.size()};
    t.data_ = std::move(v);
    return t;
  }

  static Tensor from_matrix(std::size_t rows, std::size_t cols,
                            std::vector<double> v) {
    require(v.size() == rows * cols, "tensor: data length != rows*cols");
    Tensor t;
    t.shape_ = {rows, cols};
    t.data_ = std::move(v);
    return t;
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t ndim() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t rows() const { return ndim() == 2 ? shape_[0] : 1; }
  std::size_t cols() const { return ndim() == 2 ? shape_[1] : size(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double at(std::size_t r, std::size_t c) const {
    return data_[r * shape_[1] + c];
  }

  void fill(double v) {
    for (auto& x : data_) x = v;
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (double x : data_)
      if (!std::isfinite(x)) return false;
    return true;
  }

  void add_inplace(const Tensor& o) {
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  }

  void scale_inplace(double s) {
    for (auto& x : data_) x *= s;
  }

  double sum() const {
    double s = 0.0;
    for (double x : data_) s += x;
    return s;
  }

  const std::vector<double>& vec() const { return data_; }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

}  // namespace spectral
