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
#include <numbers>
#include <span>
#include <vector>

#include "fmr/error.hpp"
#include "fmr/grid.hpp"

namespace fmr {

// 1D discrete Fourier transform of fixed length, unnormalized.
//
// Powers of two go through an iterative radix-2 Cooley-Tukey pass. Every
// other length is rewritten as a circular convolution with a chirp
// (Bluestein) and evaluated with a power-of-two transform, so any length is
// O(n log n). A plan is immutable after construction and can be shared.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n) : n_(n) {
    if (n == 0) throw DimensionError("fft length must be positive");
    if (is_pow2(n)) {
      build_radix2(n, twiddle_, bitrev_);
      return;
    }
    m_ = 1;
    while (m_ < 2 * n - 1) m_ <<= 1;
    build_radix2(m_, twiddle_, bitrev_);
    chirp_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      // k^2 mod 2n keeps the phase argument small for large k.
      const std::size_t k2 = (k * k) % (2 * n);
      const double phase = std::numbers::pi * static_cast<double>(k2) /
                           static_cast<double>(n);
      chirp_[k] = Complex(std::cos(phase), -std::sin(phase));
    }
    // Spectrum of the conjugate chirp, laid out circularly on m_ points.
    chirp_hat_.assign(m_, Complex{});
    chirp_hat_[0] = std::conj(chirp_[0]);
    for (std::size_t k = 1; k < n; ++k) {
      chirp_hat_[k] = std::conj(chirp_[k]);
      chirp_hat_[m_ - k] = std::conj(chirp_[k]);
    }
    radix2(chirp_hat_, false);
  }

  std::size_t size() const noexcept { return n_; }

  // In-place transform; sign -1 (forward) unless inverse. No scaling.
  void transform(std::span<Complex> data, bool inverse) const {
    if (data.size() != n_) {
      throw DimensionError(
          detail::concat("fft plan of length ", n_, " got ", data.size()));
    }
    if (m_ == 0) {
      radix2(data, inverse);
      return;
    }
    if (inverse) {
      for (auto& v : data) v = std::conj(v);
    }
    std::vector<Complex> work(m_, Complex{});
    for (std::size_t k = 0; k < n_; ++k) work[k] = data[k] * chirp_[k];
    radix2(work, false);
    for (std::size_t k = 0; k < m_; ++k) work[k] *= chirp_hat_[k];
    radix2(work, true);
    const double inv_m = 1.0 / static_cast<double>(m_);
    for (std::size_t k = 0; k < n_; ++k) data[k] = work[k] * chirp_[k] * inv_m;
    if (inverse) {
      for (auto& v : data) v = std::conj(v);
    }
  }

 private:
  static bool is_pow2(std::size_t n) { return (n & (n - 1)) == 0; }

  static void build_radix2(std::size_t n, std::vector<Complex>& twiddle,
                           std::vector<std::size_t>& bitrev) {
    twiddle.resize(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k) {
      const double phase =
          -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
      twiddle[k] = Complex(std::cos(phase), std::sin(phase));
    }
    bitrev.resize(n);
    std::size_t bits = 0;
    while ((std::size_t{1} << bits) < n) ++bits;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t r = 0;
      for (std::size_t b = 0; b < bits; ++b)
        if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
      bitrev[i] = r;
    }
  }

  void radix2(std::span<Complex> a, bool inverse) const {
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) {
      if (i < bitrev_[i]) std::swap(a[i], a[bitrev_[i]]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
      const std::size_t half = len / 2;
      const std::size_t stride = n / len;
      for (std::size_t start = 0; start < n; start += len) {
        for (std::size_t j = 0; j < half; ++j) {
          Complex w = twiddle_[j * stride];
          if (inverse) w = std::conj(w);
          const Complex t = w * a[start + j + half];
          a[start + j + half] = a[start + j] - t;
          a[start + j] += t;
        }
      }
    }
  }

  std::size_t n_;
  std::size_t m_ = 0;  // Bluestein padded length, 0 for direct radix-2
  std::vector<Complex> twiddle_;
  std::vector<std::size_t> bitrev_;
  std::vector<Complex> chirp_;
  std::vector<Complex> chirp_hat_;
};

namespace detail {

// Separable 2D transform with unitary 1/sqrt(HW) scaling.
inline void fft2_inplace(SpectrumGrid& g, bool inverse) {
  const std::size_t h = g.height();
  const std::size_t w = g.width();
  const FftPlan row_plan(w);
  for (std::size_t r = 0; r < h; ++r) {
    row_plan.transform(g.values().subspan(r * w, w), inverse);
  }
  const FftPlan col_plan(h);
  std::vector<Complex> col(h);
  for (std::size_t c = 0; c < w; ++c) {
    for (std::size_t r = 0; r < h; ++r) col[r] = g(r, c);
    col_plan.transform(col, inverse);
    for (std::size_t r = 0; r < h; ++r) g(r, c) = col[r];
  }
  g *= Complex(1.0 / std::sqrt(static_cast<double>(h * w)), 0.0);
}

}  // namespace detail

// Unitary forward DFT of a complex grid.
inline SpectrumGrid fft2(const SpectrumGrid& x) {
  if (x.empty()) throw DimensionError("fft2 of an empty grid");
  SpectrumGrid out = x;
  detail::fft2_inplace(out, false);
  return out;
}

// Unitary forward DFT of a real grid.
inline SpectrumGrid fft2(const FeatureGrid& x) {
  if (x.empty()) throw DimensionError("fft2 of an empty grid");
  SpectrumGrid out(x.height(), x.width());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = Complex(x[i], 0.0);
  detail::fft2_inplace(out, false);
  return out;
}

// Unitary inverse DFT without discarding the imaginary part.
inline SpectrumGrid ifft2_complex(const SpectrumGrid& u) {
  if (u.empty()) throw DimensionError("ifft2 of an empty grid");
  SpectrumGrid out = u;
  detail::fft2_inplace(out, true);
  return out;
}

// Relative imaginary residue tolerated by ifft2 before it refuses the input.
inline constexpr double kImagResidueTol = 1e-6;

// Unitary inverse DFT returning the real part. The input must be
// (numerically) Hermitian-symmetric: an imaginary residue larger than
// kImagResidueTol relative to the real norm raises NumericError.
//
// `reference_norm` is the scale of the data the spectrum was derived from
// (e.g. the spectrum before masking). Round-off relative to that scale is
// tolerated even when the result itself is close to zero.
inline FeatureGrid ifft2(const SpectrumGrid& u, double reference_norm = 0.0) {
  const SpectrumGrid z = ifft2_complex(u);
  FeatureGrid out(z.height(), z.width());
  double re2 = 0.0;
  double im2 = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = z[i].real();
    re2 += z[i].real() * z[i].real();
    im2 += z[i].imag() * z[i].imag();
  }
  const double re = std::sqrt(re2);
  const double im = std::sqrt(im2);
  if (!std::isfinite(re) || !std::isfinite(im)) {
    throw NumericError("ifft2 produced non-finite values");
  }
  const double floor = 1e-12 * std::max(l2_norm(u), reference_norm);
  if (im > kImagResidueTol * re + floor) {
    throw NumericError(detail::concat(
        "ifft2 imaginary residue ", im, " exceeds tolerance for real norm ", re,
        " (spectrum is not Hermitian-symmetric)"));
  }
  return out;
}

// Index of the frequency mirrored through the origin: (-u mod H, -v mod W).
inline std::size_t mirror_index(std::size_t h, std::size_t w, std::size_t row,
                                std::size_t col) {
  return ((h - row) % h) * w + (w - col) % w;
}

}  // namespace fmr
