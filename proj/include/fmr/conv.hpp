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

#include <cmath>
#include <cstddef>

#include "fmr/error.hpp"
#include "fmr/fft.hpp"
#include "fmr/grid.hpp"

// Periodic-boundary convolution. With wrap-around boundaries the
// convolution theorem is exact:
//
//   fft2(conv2_periodic(x, k)) == transfer(k, H, W) * fft2(x)
//
// for the unitary fft2 in fft.hpp.

namespace fmr {

namespace detail {

inline void require_kernel_fits(const Kernel2D& k, std::size_t h,
                                std::size_t w) {
  if (k.size() > h || k.size() > w) {
    throw DimensionError(detail::concat("kernel side ", k.size(),
                                        " exceeds grid ", h, "x", w));
  }
}

inline std::size_t wrap(long i, std::size_t n) {
  const long m = static_cast<long>(n);
  return static_cast<std::size_t>(((i % m) + m) % m);
}

inline FeatureGrid periodic_filter(const FeatureGrid& x, const Kernel2D& k) {
  require_kernel_fits(k, x.height(), x.width());
  const std::size_t h = x.height();
  const std::size_t w = x.width();
  const int r = k.radius();
  FeatureGrid out(h, w);
  for (std::size_t a = 0; a < k.size(); ++a) {
    for (std::size_t b = 0; b < k.size(); ++b) {
      const double tap = k(a, b);
      if (tap == 0.0) continue;
      const long dy = static_cast<long>(a) - r;
      const long dx = static_cast<long>(b) - r;
      for (std::size_t i = 0; i < h; ++i) {
        const std::size_t si = wrap(static_cast<long>(i) - dy, h);
        const double* src = &x(si, 0);
        double* dst = &out(i, 0);
        for (std::size_t j = 0; j < w; ++j) {
          dst[j] += tap * src[wrap(static_cast<long>(j) - dx, w)];
        }
      }
    }
  }
  return out;
}

}  // namespace detail

// out(i, j) = sum_{a,b} k(a, b) * x(i - (a - r), j - (b - r)), indices mod H/W.
inline FeatureGrid conv2_periodic(const FeatureGrid& x, const Kernel2D& k) {
  return detail::periodic_filter(x, k);
}

// Adjoint of conv2_periodic in the first argument:
// <conv2_periodic(x, k), y> == <x, corr2_periodic(y, k)>. Implemented as
// convolution with the flipped kernel, so symmetric kernels give identical
// results bit for bit.
inline FeatureGrid corr2_periodic(const FeatureGrid& x, const Kernel2D& k) {
  return detail::periodic_filter(x, k.flipped());
}

// Kernel laid out on an h x w grid with its center tap at (0, 0).
inline FeatureGrid embed_kernel(const Kernel2D& k, std::size_t h,
                                std::size_t w) {
  detail::require_kernel_fits(k, h, w);
  FeatureGrid out(h, w);
  const int r = k.radius();
  for (std::size_t a = 0; a < k.size(); ++a) {
    for (std::size_t b = 0; b < k.size(); ++b) {
      out(detail::wrap(static_cast<long>(a) - r, h),
          detail::wrap(static_cast<long>(b) - r, w)) += k(a, b);
    }
  }
  return out;
}

// Transfer function of k on the h x w DFT grid (sqrt(HW) * unitary DFT of
// the centered kernel). The identity kernel maps to all ones.
inline SpectrumGrid transfer(const Kernel2D& k, std::size_t h, std::size_t w) {
  SpectrumGrid t = fft2(embed_kernel(k, h, w));
  t *= Complex(std::sqrt(static_cast<double>(h * w)), 0.0);
  return t;
}

// Gradient of <g, conv2_periodic(x, k)> with respect to the kernel taps.
inline Kernel2D conv2_kernel_grad(const FeatureGrid& x, const FeatureGrid& g,
                                  std::size_t kernel_size) {
  FeatureGrid::require_same_shape(x, g, "conv2_kernel_grad");
  Kernel2D out(kernel_size);
  detail::require_kernel_fits(out, x.height(), x.width());
  const std::size_t h = x.height();
  const std::size_t w = x.width();
  const int r = out.radius();
  for (std::size_t a = 0; a < kernel_size; ++a) {
    for (std::size_t b = 0; b < kernel_size; ++b) {
      const long dy = static_cast<long>(a) - r;
      const long dx = static_cast<long>(b) - r;
      double s = 0.0;
      for (std::size_t i = 0; i < h; ++i) {
        const double* src = &x(detail::wrap(static_cast<long>(i) - dy, h), 0);
        const double* gi = &g(i, 0);
        for (std::size_t j = 0; j < w; ++j) {
          s += gi[j] * src[detail::wrap(static_cast<long>(j) - dx, w)];
        }
      }
      out(a, b) = s;
    }
  }
  return out;
}

}  // namespace fmr
