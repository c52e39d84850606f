// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gdres/error.hpp"

namespace gdres {

/// How samples outside the image domain are obtained.
///
/// Mirror is whole-sample reflection that does not repeat the edge pixel
/// (row [a b c] continues as ... c b [a b c] b a ...). Zero pads with 0.
enum class Boundary { Mirror, Zero };

/// Dense H x W x C feature map of 64-bit reals.
///
/// Layout is planar (channel-outermost) and row-major inside each channel:
/// element (c, y, x) lives at `(c * height + y) * width + x`. The first
/// spatial coordinate x1 runs along a row (the column index `x`), the second
/// coordinate x2 runs down the image (the row index `y`).
class Tensor {
 public:
  Tensor() = default;

  Tensor(int height, int width, int channels, Boundary boundary = Boundary::Mirror)
      : height_(height), width_(width), channels_(channels), boundary_(boundary) {
    detail::require(height > 0 && width > 0 && channels > 0,
                    "tensor dimensions must be positive");
    data_.assign(static_cast<std::size_t>(height) * width * channels, 0.0);
  }

  Tensor(int height, int width, int channels, std::vector<double> data,
         Boundary boundary = Boundary::Mirror)
      : height_(height), width_(width), channels_(channels), boundary_(boundary),
        data_(std::move(data)) {
    detail::require(height > 0 && width > 0 && channels > 0,
                    "tensor dimensions must be positive");
    detail::require_shape(data_.size() == static_cast<std::size_t>(height) * width * channels,
                          "tensor data length does not match dimensions");
  }

  /// Tensor with the same shape and boundary policy, all zeros.
  static Tensor zeros_like(const Tensor& other) {
    return Tensor(other.height_, other.width_, other.channels_, other.boundary_);
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  int plane_size() const noexcept { return height_ * width_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  Boundary boundary() const noexcept { return boundary_; }
  void set_boundary(Boundary b) noexcept { boundary_ = b; }

  double& at(int c, int y, int x) { return data_[index(c, y, x)]; }
  double at(int c, int y, int x) const { return data_[index(c, y, x)]; }

  std::span<double> channel(int c) {
    return {data_.data() + static_cast<std::size_t>(c) * plane_size(),
            static_cast<std::size_t>(plane_size())};
  }
  std::span<const double> channel(int c) const {
    return {data_.data() + static_cast<std::size_t>(c) * plane_size(),
            static_cast<std::size_t>(plane_size())};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::vector<double>& storage() noexcept { return data_; }

  bool same_shape(const Tensor& o) const noexcept {
    return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  Tensor& operator+=(const Tensor& o) {
    detail::require_shape(same_shape(o), "tensor shapes differ in +=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  Tensor& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
  }

  bool operator==(const Tensor& o) const {
    return same_shape(o) && data_ == o.data_;
  }

 private:
  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  Boundary boundary_ = Boundary::Mirror;
  std::vector<double> data_;
};

inline Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
inline Tensor operator*(double s, Tensor a) { return a *= s; }

inline Tensor operator-(const Tensor& a, const Tensor& b) {
  detail::require_shape(a.same_shape(b), "tensor shapes differ in -");
  Tensor r = a;
  auto rd = r.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < rd.size(); ++i) rd[i] -= bd[i];
  return r;
}

/// Copy of a single channel as a one-channel tensor.
inline Tensor extract_channel(const Tensor& t, int c) {
  Tensor r(t.height(), t.width(), 1, t.boundary());
  auto src = t.channel(c);
  std::copy(src.begin(), src.end(), r.data().begin());
  return r;
}

/// Mirror the image left-right (negates the x1 axis).
inline Tensor flip_horizontal(const Tensor& t) {
  Tensor r = Tensor::zeros_like(t);
  for (int c = 0; c < t.channels(); ++c)
    for (int y = 0; y < t.height(); ++y)
      for (int x = 0; x < t.width(); ++x) r.at(c, y, t.width() - 1 - x) = t.at(c, y, x);
  return r;
}

}  // namespace gdres
