#ifndef RMP_TENSOR_HPP_
#define RMP_TENSOR_HPP_

#include <array>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "rmp/errors.hpp"

namespace rmp {

// Build-time precision switch: default is 64-bit (used by all gradient
// checks); define RMP_SCALAR32 for 32-bit training builds.
#ifdef RMP_SCALAR32
using scalar = float;
#else
using scalar = double;
#endif

// Dense extents, up to 4 axes. Canonical image layout is H x W x C
// (row-major, channel fastest); conv kernels are K x K x Cin x Cout.
class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<int> dims) {
    RMP_CHECK(dims.size() >= 1 && dims.size() <= 4, "Shape: 1..4 axes supported");
    for (int d : dims) {
      RMP_CHECK(d > 0, "Shape: extents must be positive");
      d_[n_++] = d;
    }
  }

  int ndim() const { return n_; }
  int operator[](int i) const { return d_[i]; }
  std::int64_t numel() const {
    std::int64_t n = 1;
    for (int i = 0; i < n_; ++i) n *= d_[i];
    return n;
  }

  bool operator==(const Shape& o) const {
    if (n_ != o.n_) return false;
    for (int i = 0; i < n_; ++i)
      if (d_[i] != o.d_[i]) return false;
    return true;
  }
  bool operator!=(const Shape& o) const { return !(*this == o); }

  std::string str() const {
    std::string s = "[";
    for (int i = 0; i < n_; ++i) {
      if (i) s += "x";
      s += std::to_string(d_[i]);
    }
    return s + "]";
  }

 private:
  std::array<int, 4> d_{};
  int n_ = 0;
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(const Shape& s, scalar fill = scalar(0))
      : shape_(s), data_(static_cast<std::size_t>(s.numel()), fill) {}

  static Tensor from(const Shape& s, std::vector<scalar> values) {
    RMP_CHECK(static_cast<std::int64_t>(values.size()) == s.numel(),
              "Tensor::from: data length " + std::to_string(values.size()) +
                  " does not match shape " + s.str());
    Tensor t;
    t.shape_ = s;
    t.data_ = std::move(values);
    return t;
  }

  const Shape& shape() const { return shape_; }
  std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  scalar* data() { return data_.data(); }
  const scalar* data() const { return data_.data(); }
  std::vector<scalar>& vec() { return data_; }
  const std::vector<scalar>& vec() const { return data_; }

  scalar& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  scalar operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  // H x W x C accessors.
  scalar& at(int y, int x, int c) {
    return data_[static_cast<std::size_t>((static_cast<std::int64_t>(y) * shape_[1] + x) * shape_[2] + c)];
  }
  scalar at(int y, int x, int c) const {
    return data_[static_cast<std::size_t>((static_cast<std::int64_t>(y) * shape_[1] + x) * shape_[2] + c)];
  }

  bool all_finite() const;
  Tensor& fill(scalar v) {
    for (auto& e : data_) e = v;
    return *this;
  }

 private:
  Shape shape_;
  std::vector<scalar> data_;
};

}  // namespace rmp

#endif  // RMP_TENSOR_HPP_
