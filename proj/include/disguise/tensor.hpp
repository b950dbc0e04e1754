#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "disguise/errors.hpp"

namespace disguise {

inline constexpr int kMaxRank = 4;

// Dimensions of a tensor, outermost first. Images and latents are H x W x C.
class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<int> dims) {
    if (dims.size() == 0 || dims.size() > kMaxRank)
      throw ShapeError("shape rank must be in [1, 4], got " + std::to_string(dims.size()));
    for (int d : dims) push(d);
  }

  static Shape scalar() { return Shape{1}; }
  static Shape image(int h, int w, int c) { return Shape{h, w, c}; }

  int rank() const noexcept { return rank_; }
  int operator[](int axis) const { return dims_.at(static_cast<std::size_t>(axis)); }

  std::size_t numel() const noexcept {
    std::size_t n = 1;
    for (int i = 0; i < rank_; ++i) n *= static_cast<std::size_t>(dims_[i]);
    return rank_ == 0 ? 0 : n;
  }

  bool is_scalar() const noexcept {
    if (rank_ == 0) return false;
    for (int i = 0; i < rank_; ++i)
      if (dims_[i] != 1) return false;
    return true;
  }

  void push(int d) {
    if (rank_ == kMaxRank) throw ShapeError("shape rank exceeds 4");
    if (d < 1) throw ShapeError("shape dimension must be >= 1, got " + std::to_string(d));
    dims_[static_cast<std::size_t>(rank_++)] = d;
  }

  std::string str() const {
    std::string s = "[";
    for (int i = 0; i < rank_; ++i) {
      if (i) s += "x";
      s += std::to_string(dims_[i]);
    }
    return s + "]";
  }

  friend bool operator==(const Shape& a, const Shape& b) noexcept {
    if (a.rank_ != b.rank_) return false;
    for (int i = 0; i < a.rank_; ++i)
      if (a.dims_[i] != b.dims_[i]) return false;
    return true;
  }

 private:
  std::array<int, kMaxRank> dims_{1, 1, 1, 1};
  int rank_ = 0;
};

// Dense row-major tensor, innermost axis last (channel for images).
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{0}) : shape_(shape), data_(shape.numel(), fill) {}
  Tensor(Shape shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.numel())
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_.str());
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  // Rank-3 accessors (H x W x C).
  T& at(int y, int x, int c) { return data_[index(y, x, c)]; }
  const T& at(int y, int x, int c) const { return data_[index(y, x, c)]; }

  int height() const { return shape_[0]; }
  int width() const { return shape_[1]; }
  int channels() const { return shape_[2]; }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.size());
    std::transform(data_.begin(), data_.end(), out.begin(),
                   [](T v) { return static_cast<U>(v); });
    return Tensor<U>(shape_, std::move(out));
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  bool within_unit_interval() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](T v) { return v >= T{0} && v <= T{1}; });
  }

  // Bitwise equality for finite data; NaNs compare unequal.
  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(shape_[1]) +
            static_cast<std::size_t>(x)) *
               static_cast<std::size_t>(shape_[2]) +
           static_cast<std::size_t>(c);
  }

  Shape shape_;
  std::vector<T> data_;
};

using Image = Tensor<float>;
using Latent = Tensor<float>;

inline void require_image(const Shape& s, const char* what) {
  if (s.rank() != 3)
    throw ShapeError(std::string(what) + ": expected H x W x C tensor, got " + s.str());
}

}  // namespace disguise
