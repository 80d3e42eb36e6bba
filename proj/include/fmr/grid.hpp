// Copyright 2026 The fmr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "fmr/error.hpp"

namespace fmr {

using Complex = std::complex<double>;

// Row-major 2D grid. Holds images, feature maps, gradients and spectra.
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;

  Grid(std::size_t height, std::size_t width, T fill = T{})
      : height_(height), width_(width), data_(height * width, fill) {
    check_shape(height, width);
  }

  Grid(std::size_t height, std::size_t width, std::vector<T> data)
      : height_(height), width_(width), data_(std::move(data)) {
    check_shape(height, width);
    if (data_.size() != height * width) {
      throw DimensionError(detail::concat("grid data length ", data_.size(),
                                          " does not match ", height, "x",
                                          width));
    }
  }

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t row, std::size_t col) noexcept {
    return data_[row * width_ + col];
  }
  const T& operator()(std::size_t row, std::size_t col) const noexcept {
    return data_[row * width_ + col];
  }
  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  bool same_shape(const Grid& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

  Grid& operator+=(const Grid& rhs) {
    require_same_shape(*this, rhs, "operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += rhs.data_[i];
    return *this;
  }
  Grid& operator-=(const Grid& rhs) {
    require_same_shape(*this, rhs, "operator-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= rhs.data_[i];
    return *this;
  }
  Grid& operator*=(T s) {
    for (auto& v : data_) v *= s;
    return *this;
  }

  friend Grid operator+(Grid lhs, const Grid& rhs) { return lhs += rhs; }
  friend Grid operator-(Grid lhs, const Grid& rhs) { return lhs -= rhs; }
  friend Grid operator*(Grid lhs, T s) { return lhs *= s; }
  friend Grid operator*(T s, Grid rhs) { return rhs *= s; }

  friend bool operator==(const Grid&, const Grid&) = default;

  static void require_same_shape(const Grid& a, const Grid& b,
                                 const char* where) {
    if (!a.same_shape(b)) {
      throw DimensionError(detail::concat(where, ": shape mismatch ",
                                          a.height_, "x", a.width_, " vs ",
                                          b.height_, "x", b.width_));
    }
  }

 private:
  static void check_shape(std::size_t height, std::size_t width) {
    if (height == 0 || width == 0) {
      throw DimensionError(
          detail::concat("grid must be non-empty, got ", height, "x", width));
    }
  }

  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<T> data_;
};

// Real image or feature map.
using FeatureGrid = Grid<double>;
// Fourier coefficients on the DFT grid, index (u, v).
using SpectrumGrid = Grid<Complex>;

// Square convolution kernel with odd side; tap (size/2, size/2) is the origin.
class Kernel2D {
 public:
  Kernel2D() : Kernel2D(1) {}

  explicit Kernel2D(std::size_t size) : size_(size), taps_(size * size, 0.0) {
    check_size(size);
  }

  Kernel2D(std::size_t size, std::vector<double> taps)
      : size_(size), taps_(std::move(taps)) {
    check_size(size);
    if (taps_.size() != size * size) {
      throw DimensionError(detail::concat("kernel needs ", size * size,
                                          " taps, got ", taps_.size()));
    }
  }

  static Kernel2D identity(std::size_t size = 1) {
    Kernel2D k(size);
    k(size / 2, size / 2) = 1.0;
    return k;
  }

  static Kernel2D box(std::size_t size) {
    Kernel2D k(size);
    std::fill(k.taps_.begin(), k.taps_.end(),
              1.0 / static_cast<double>(size * size));
    return k;
  }

  // Sampled isotropic Gaussian normalized to unit sum.
  static Kernel2D gaussian(std::size_t size, double sigma) {
    if (!(sigma > 0.0)) throw ConfigError("gaussian kernel sigma must be > 0");
    Kernel2D k(size);
    const double c = static_cast<double>(size / 2);
    double total = 0.0;
    for (std::size_t a = 0; a < size; ++a) {
      for (std::size_t b = 0; b < size; ++b) {
        const double dy = static_cast<double>(a) - c;
        const double dx = static_cast<double>(b) - c;
        k(a, b) = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
        total += k(a, b);
      }
    }
    for (auto& t : k.taps_) t /= total;
    return k;
  }

  std::size_t size() const noexcept { return size_; }
  int radius() const noexcept { return static_cast<int>(size_ / 2); }

  double& operator()(std::size_t row, std::size_t col) noexcept {
    return taps_[row * size_ + col];
  }
  double operator()(std::size_t row, std::size_t col) const noexcept {
    return taps_[row * size_ + col];
  }

  std::span<double> taps() noexcept { return taps_; }
  std::span<const double> taps() const noexcept { return taps_; }

  // Point reflection through the center tap.
  Kernel2D flipped() const {
    Kernel2D out(size_);
    for (std::size_t a = 0; a < size_; ++a)
      for (std::size_t b = 0; b < size_; ++b)
        out(a, b) = (*this)(size_ - 1 - a, size_ - 1 - b);
    return out;
  }

  friend bool operator==(const Kernel2D&, const Kernel2D&) = default;

 private:
  static void check_size(std::size_t size) {
    if (size == 0 || size % 2 == 0) {
      throw DimensionError(
          detail::concat("kernel side must be odd and positive, got ", size));
    }
  }

  std::size_t size_;
  std::vector<double> taps_;
};

// Real inner product <a, b>.
inline double dot(const FeatureGrid& a, const FeatureGrid& b) {
  FeatureGrid::require_same_shape(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double l2_norm(const FeatureGrid& a) { return std::sqrt(dot(a, a)); }

inline double l2_norm(const SpectrumGrid& a) {
  double s = 0.0;
  for (const auto& v : a.values()) s += std::norm(v);
  return std::sqrt(s);
}

inline double max_abs(const FeatureGrid& a) {
  double m = 0.0;
  for (double v : a.values()) m = std::max(m, std::abs(v));
  return m;
}

inline double max_abs_diff(const FeatureGrid& a, const FeatureGrid& b) {
  FeatureGrid::require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double max_abs_diff(const SpectrumGrid& a, const SpectrumGrid& b) {
  SpectrumGrid::require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double mean(const FeatureGrid& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return s / static_cast<double>(a.size());
}

// Elementwise product.
template <typename T>
Grid<T> hadamard(const Grid<T>& a, const Grid<T>& b) {
  Grid<T>::require_same_shape(a, b, "hadamard");
  Grid<T> out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  return out;
}

}  // namespace fmr
