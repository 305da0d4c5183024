#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "tscd/core/error.hpp"

namespace tscd {

// Dense row-major tensor. Rank-3 tensors are interpreted as H x W x C
// (pixel vectors contiguous), rank-2 as rows x cols.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    std::size_t n = 1;
    for (int d : shape_) {
      TSCD_CHECK(d >= 0, InvalidArgumentError, "tensor dim must be >= 0");
      n *= static_cast<std::size_t>(d);
    }
    data_.assign(n, T(0));
  }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<int> shape, T v) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), v);
    return t;
  }

  static Tensor from(std::vector<int> shape, std::vector<T> values) {
    Tensor t;
    t.shape_ = std::move(shape);
    std::size_t n = 1;
    for (int d : t.shape_) n *= static_cast<std::size_t>(d);
    TSCD_CHECK(n == values.size(), ShapeMismatchError, "value count does not match shape");
    t.data_ = std::move(values);
    return t;
  }

  static Tensor scalar(T v) { return full({1}, v); }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& raw() { return data_; }
  const std::vector<T>& raw() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  // H x W x C accessors.
  int h() const { return dim(0); }
  int w() const { return dim(1); }
  int c() const { return rank() == 3 ? dim(2) : 1; }

  T& at(int y, int x, int ch) {
    return data_[(static_cast<std::size_t>(y) * shape_[1] + x) * shape_[2] + ch];
  }
  const T& at(int y, int x, int ch) const {
    return data_[(static_cast<std::size_t>(y) * shape_[1] + x) * shape_[2] + ch];
  }
  T* px(int y, int x) {
    return data_.data() + (static_cast<std::size_t>(y) * shape_[1] + x) * shape_[2];
  }
  const T* px(int y, int x) const {
    return data_.data() + (static_cast<std::size_t>(y) * shape_[1] + x) * shape_[2];
  }

  // rows x cols accessors.
  T& at(int r, int col) { return data_[static_cast<std::size_t>(r) * shape_[1] + col]; }
  const T& at(int r, int col) const {
    return data_[static_cast<std::size_t>(r) * shape_[1] + col];
  }
  T* row(int r) { return data_.data() + static_cast<std::size_t>(r) * shape_[1]; }
  const T* row(int r) const { return data_.data() + static_cast<std::size_t>(r) * shape_[1]; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (const T& v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  Tensor reshaped(std::vector<int> shape) const {
    Tensor t = *this;
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    TSCD_CHECK(n == data_.size(), ShapeMismatchError, "reshape size mismatch");
    t.shape_ = std::move(shape);
    return t;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> t(shape_);
    for (std::size_t i = 0; i < data_.size(); ++i) t[i] = static_cast<U>(data_[i]);
    return t;
  }

  std::string shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape_[i]);
    }
    return s + "]";
  }

 private:
  std::vector<int> shape_;
  std::vector<T> data_;
};

}  // namespace tscd
