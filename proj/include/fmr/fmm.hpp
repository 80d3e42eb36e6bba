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
#include <cstddef>
#include <string>
#include <vector>

#include "fmr/conv.hpp"
#include "fmr/error.hpp"
#include "fmr/fft.hpp"
#include "fmr/grid.hpp"

// Frequency-modulated restoration operator.
//
//   x_l = G_L * x_f                        band split, periodic convolution
//   x_h = x_f - x_l
//   x_l~ = ifft2(M(xi) . fft2(x_l))        spectral gate, M in [0, 1]
//   x_h~ = m_h . x_h                       spatial gate, no transform
//   y    = x_l~ + x_h~                     fusion
//
// Every learnable quantity enters through a sigmoid so both masks stay in
// [0, 1]. The operator is small enough that its gradients are written out
// by hand in fmm_backward.

namespace fmr {

enum class MaskMode { PerFrequency = 0, RadialBins = 1 };
enum class SpatialMode { PerPixel = 0, GapAffine = 1 };

inline double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Derivative of the sigmoid expressed through its value.
inline double sigmoid_slope(double s) { return s * (1.0 - s); }

struct FmmParams {
  // Grid the per-frequency / per-pixel logits are shaped for. Zero when both
  // modes are compact, in which case any grid size is accepted.
  std::size_t height = 0;
  std::size_t width = 0;

  Kernel2D lowpass = Kernel2D::identity();

  MaskMode mask_mode = MaskMode::PerFrequency;
  // PerFrequency: height*width logits, row-major over (u, v).
  // RadialBins: one logit per radial bin.
  std::vector<double> spectral_logits;

  SpatialMode spatial_mode = SpatialMode::PerPixel;
  // PerPixel: height*width logits. GapAffine: {a, b}.
  std::vector<double> spatial_logits;

  std::size_t n_bins() const noexcept {
    return mask_mode == MaskMode::RadialBins ? spectral_logits.size() : 0;
  }

  bool needs_grid_shape() const noexcept {
    return mask_mode == MaskMode::PerFrequency ||
           spatial_mode == SpatialMode::PerPixel;
  }

  void validate() const {
    if (mask_mode == MaskMode::RadialBins) {
      if (spectral_logits.size() < 2) {
        throw ConfigError("radial spectral mask needs at least 2 bins");
      }
    } else if (spectral_logits.size() != height * width) {
      throw DimensionError(detail::concat(
          "per-frequency logits: expected ", height * width, ", got ",
          spectral_logits.size()));
    }
    if (spatial_mode == SpatialMode::GapAffine) {
      if (spatial_logits.size() != 2) {
        throw DimensionError("GAP-affine spatial mask needs exactly {a, b}");
      }
    } else if (spatial_logits.size() != height * width) {
      throw DimensionError(detail::concat("per-pixel logits: expected ",
                                          height * width, ", got ",
                                          spatial_logits.size()));
    }
    if (needs_grid_shape() && (height == 0 || width == 0)) {
      throw DimensionError("per-grid mask modes need a grid shape");
    }
    for (double v : lowpass.taps())
      if (!std::isfinite(v)) throw NumericError("non-finite kernel tap");
    for (double v : spectral_logits)
      if (std::isnan(v)) throw NumericError("NaN spectral logit");
    for (double v : spatial_logits)
      if (std::isnan(v)) throw NumericError("NaN spatial logit");
  }

  void require_grid(std::size_t h, std::size_t w) const {
    if (needs_grid_shape() && (h != height || w != width)) {
      throw DimensionError(detail::concat("parameters shaped for ", height,
                                          "x", width, ", input is ", h, "x",
                                          w));
    }
    detail::require_kernel_fits(lowpass, h, w);
  }

  friend bool operator==(const FmmParams&, const FmmParams&) = default;
};

struct FmmOptions {
  MaskMode mask_mode = MaskMode::PerFrequency;
  std::size_t n_bins = 8;
  SpatialMode spatial_mode = SpatialMode::PerPixel;
  std::size_t kernel_size = 5;
  double kernel_sigma = 1.0;
  double spectral_logit = 0.0;
  double spatial_logit = 0.0;
};

// Normalized Gaussian low-pass and constant logits.
inline FmmParams make_fmm_params(std::size_t height, std::size_t width,
                                 const FmmOptions& opt = {}) {
  FmmParams p;
  p.lowpass = Kernel2D::gaussian(opt.kernel_size, opt.kernel_sigma);
  p.mask_mode = opt.mask_mode;
  p.spatial_mode = opt.spatial_mode;
  if (p.needs_grid_shape()) {
    p.height = height;
    p.width = width;
  }
  if (opt.mask_mode == MaskMode::RadialBins) {
    p.spectral_logits.assign(opt.n_bins, opt.spectral_logit);
  } else {
    p.spectral_logits.assign(height * width, opt.spectral_logit);
  }
  if (opt.spatial_mode == SpatialMode::GapAffine) {
    p.spatial_logits = {0.0, opt.spatial_logit};
  } else {
    p.spatial_logits.assign(height * width, opt.spatial_logit);
  }
  p.validate();
  p.require_grid(height, width);
  return p;
}

// Radial frequency of DFT index (u, v) in cycles per pixel, in [0, sqrt(1/2)].
inline double radial_frequency(std::size_t u, std::size_t v, std::size_t h,
                               std::size_t w) {
  const double fu = static_cast<double>(std::min(u, h - u)) / static_cast<double>(h);
  const double fv = static_cast<double>(std::min(v, w - v)) / static_cast<double>(w);
  return std::sqrt(fu * fu + fv * fv);
}

inline constexpr double kMaxRadialFrequency = 0.70710678118654752440;

// Bins split [0, r_max] into n equal, contiguous radius intervals.
inline std::size_t radial_bin(std::size_t u, std::size_t v, std::size_t h,
                              std::size_t w, std::size_t n_bins) {
  const double r = radial_frequency(u, v, h, w) / kMaxRadialFrequency;
  const auto b = static_cast<std::size_t>(r * static_cast<double>(n_bins));
  return std::min(b, n_bins - 1);
}

// Materialized spectral mask on an h x w DFT grid. Symmetric under
// xi -> -xi, so gating a real signal's spectrum keeps it Hermitian.
inline FeatureGrid spectral_mask(const FmmParams& p, std::size_t h,
                                 std::size_t w) {
  FeatureGrid mask(h, w);
  if (p.mask_mode == MaskMode::RadialBins) {
    for (std::size_t u = 0; u < h; ++u)
      for (std::size_t v = 0; v < w; ++v)
        mask(u, v) = sigmoid(p.spectral_logits[radial_bin(u, v, h, w, p.n_bins())]);
    return mask;
  }
  if (h != p.height || w != p.width) {
    throw DimensionError("per-frequency mask shaped for a different grid");
  }
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const std::size_t j = mirror_index(h, w, i / w, i % w);
    mask[i] = 0.5 * (sigmoid(p.spectral_logits[i]) + sigmoid(p.spectral_logits[j]));
  }
  return mask;
}

inline double mean_abs(const FeatureGrid& x) {
  double s = 0.0;
  for (double v : x.values()) s += std::abs(v);
  return s / static_cast<double>(x.size());
}

// Materialized spatial mask for a given high-frequency branch.
inline FeatureGrid spatial_mask(const FmmParams& p, const FeatureGrid& high) {
  if (p.spatial_mode == SpatialMode::GapAffine) {
    const double m = sigmoid(p.spatial_logits[0] * mean_abs(high) + p.spatial_logits[1]);
    return FeatureGrid(high.height(), high.width(), m);
  }
  if (high.height() != p.height || high.width() != p.width) {
    throw DimensionError("per-pixel mask shaped for a different grid");
  }
  FeatureGrid mask(high.height(), high.width());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = sigmoid(p.spatial_logits[i]);
  return mask;
}

struct BandSplit {
  FeatureGrid low;
  FeatureGrid high;
};

inline BandSplit band_split(const FeatureGrid& x, const FmmParams& p) {
  detail::require_kernel_fits(p.lowpass, x.height(), x.width());
  BandSplit out{conv2_periodic(x, p.lowpass), x};
  out.high -= out.low;
  return out;
}

struct SpectralGateResult {
  FeatureGrid refined;
  SpectrumGrid u_l;
};

// Gates the spectrum of `low` with an explicit (already materialized) mask.
inline SpectralGateResult spectral_gate_with_mask(const FeatureGrid& low,
                                                  const FeatureGrid& mask) {
  FeatureGrid::require_same_shape(low, mask, "spectral_gate");
  SpectralGateResult out{FeatureGrid{}, fft2(low)};
  SpectrumGrid gated = out.u_l;
  for (std::size_t i = 0; i < gated.size(); ++i) gated[i] *= mask[i];
  out.refined = ifft2(gated, l2_norm(out.u_l));
  return out;
}

inline SpectralGateResult spectral_gate(const FeatureGrid& low,
                                        const FmmParams& p) {
  return spectral_gate_with_mask(low, spectral_mask(p, low.height(), low.width()));
}

inline FeatureGrid spatial_gate_with_mask(const FeatureGrid& high,
                                          const FeatureGrid& mask) {
  return hadamard(high, mask);
}

inline FeatureGrid spatial_gate(const FeatureGrid& high, const FmmParams& p) {
  return spatial_gate_with_mask(high, spatial_mask(p, high));
}

struct FmmActivations {
  FeatureGrid x_f;
  FeatureGrid x_l;
  FeatureGrid x_h;
  SpectrumGrid u_l;
  FeatureGrid x_l_refined;
  FeatureGrid x_h_refined;
  FeatureGrid y_hat;
  // Masks as applied, kept for the backward pass.
  FeatureGrid spectral_mask;
  FeatureGrid spatial_mask;
};

inline FmmActivations fmm_forward(const FeatureGrid& x, const FmmParams& p) {
  p.require_grid(x.height(), x.width());
  FmmActivations a;
  a.x_f = x;
  auto split = band_split(x, p);
  a.x_l = std::move(split.low);
  a.x_h = std::move(split.high);
  a.spectral_mask = spectral_mask(p, x.height(), x.width());
  auto gated = spectral_gate_with_mask(a.x_l, a.spectral_mask);
  a.u_l = std::move(gated.u_l);
  a.x_l_refined = std::move(gated.refined);
  a.spatial_mask = spatial_mask(p, a.x_h);
  a.x_h_refined = spatial_gate_with_mask(a.x_h, a.spatial_mask);
  a.y_hat = a.x_l_refined + a.x_h_refined;
  return a;
}

// Restored image only.
inline FeatureGrid fmm_apply(const FeatureGrid& x, const FmmParams& p) {
  return fmm_forward(x, p).y_hat;
}

// Gradients with the same layout as FmmParams.
struct FmmGrads {
  Kernel2D lowpass;
  std::vector<double> spectral_logits;
  std::vector<double> spatial_logits;
  FeatureGrid input;  // dL/dx_f

  static FmmGrads zeros_like(const FmmParams& p) {
    FmmGrads g;
    g.lowpass = Kernel2D(p.lowpass.size());
    g.spectral_logits.assign(p.spectral_logits.size(), 0.0);
    g.spatial_logits.assign(p.spatial_logits.size(), 0.0);
    return g;
  }

  // Accumulates parameter gradients; the input gradient is not summed.
  FmmGrads& operator+=(const FmmGrads& o) {
    if (o.lowpass.size() != lowpass.size() ||
        o.spectral_logits.size() != spectral_logits.size() ||
        o.spatial_logits.size() != spatial_logits.size()) {
      throw DimensionError("accumulating gradients of different layouts");
    }
    for (std::size_t i = 0; i < lowpass.taps().size(); ++i)
      lowpass.taps()[i] += o.lowpass.taps()[i];
    for (std::size_t i = 0; i < spectral_logits.size(); ++i)
      spectral_logits[i] += o.spectral_logits[i];
    for (std::size_t i = 0; i < spatial_logits.size(); ++i)
      spatial_logits[i] += o.spatial_logits[i];
    return *this;
  }

  FmmGrads& operator*=(double s) {
    for (auto& v : lowpass.taps()) v *= s;
    for (auto& v : spectral_logits) v *= s;
    for (auto& v : spatial_logits) v *= s;
    return *this;
  }
};

// Which parameter classes a training step may change.
struct TrainableSet {
  bool lowpass = true;
  bool spectral = true;
  bool spatial = true;
};

// p <- p - lr * g over the enabled classes.
inline void descend(FmmParams& p, const FmmGrads& g, double lr,
                    const TrainableSet& which = {}) {
  if (which.lowpass) {
    for (std::size_t i = 0; i < p.lowpass.taps().size(); ++i)
      p.lowpass.taps()[i] -= lr * g.lowpass.taps()[i];
  }
  if (which.spectral) {
    for (std::size_t i = 0; i < p.spectral_logits.size(); ++i)
      p.spectral_logits[i] -= lr * g.spectral_logits[i];
  }
  if (which.spatial) {
    for (std::size_t i = 0; i < p.spatial_logits.size(); ++i)
      p.spatial_logits[i] -= lr * g.spatial_logits[i];
  }
}

// Exact gradients of a scalar loss L given grad_out = dL/dy_hat.
//
// The low path sees G_L through x_l directly, the high path through
// x_h = x_f - x_l (and, for GapAffine, through mean|x_h| inside the mask),
// so the kernel gradient collects both with opposite signs.
inline FmmGrads fmm_backward(const FmmActivations& a, const FmmParams& p,
                             const FeatureGrid& grad_out) {
  FeatureGrid::require_same_shape(a.y_hat, grad_out, "fmm_backward");
  const std::size_t h = grad_out.height();
  const std::size_t w = grad_out.width();
  const std::size_t n = grad_out.size();
  FmmGrads g = FmmGrads::zeros_like(p);

  // Spatial gate.
  FeatureGrid d_high = hadamard(grad_out, a.spatial_mask);
  if (p.spatial_mode == SpatialMode::PerPixel) {
    for (std::size_t i = 0; i < n; ++i) {
      g.spatial_logits[i] =
          grad_out[i] * a.x_h[i] * sigmoid_slope(a.spatial_mask[i]);
    }
  } else {
    const double m = a.spatial_mask[0];
    const double d_mask = dot(grad_out, a.x_h);
    const double d_z = d_mask * sigmoid_slope(m);
    const double gap = mean_abs(a.x_h);
    g.spatial_logits[0] = d_z * gap;
    g.spatial_logits[1] = d_z;
    const double coupling = d_z * p.spatial_logits[0] / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double sgn = a.x_h[i] > 0.0 ? 1.0 : (a.x_h[i] < 0.0 ? -1.0 : 0.0);
      d_high[i] += coupling * sgn;
    }
  }

  // Spectral gate: dL/dM(xi) = Re[conj(U_L(xi)) * G(xi)], G = fft2(grad_out).
  const SpectrumGrid g_hat = fft2(grad_out);
  FeatureGrid d_mask(h, w);
  for (std::size_t i = 0; i < n; ++i) {
    d_mask[i] = (std::conj(a.u_l[i]) * g_hat[i]).real();
  }
  if (p.mask_mode == MaskMode::PerFrequency) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = mirror_index(h, w, i / w, i % w);
      const double s = sigmoid(p.spectral_logits[i]);
      g.spectral_logits[i] = 0.5 * sigmoid_slope(s) * (d_mask[i] + d_mask[j]);
    }
  } else {
    const std::size_t bins = p.n_bins();
    std::vector<double> acc(bins, 0.0);
    for (std::size_t u = 0; u < h; ++u)
      for (std::size_t v = 0; v < w; ++v)
        acc[radial_bin(u, v, h, w, bins)] += d_mask(u, v);
    for (std::size_t b = 0; b < bins; ++b) {
      g.spectral_logits[b] = acc[b] * sigmoid_slope(sigmoid(p.spectral_logits[b]));
    }
  }

  // The masked inverse transform is self-adjoint for a real symmetric mask.
  SpectrumGrid back = g_hat;
  for (std::size_t i = 0; i < n; ++i) back[i] *= a.spectral_mask[i];
  FeatureGrid d_low = ifft2(back, l2_norm(g_hat));
  d_low -= d_high;

  g.lowpass = conv2_kernel_grad(a.x_f, d_low, p.lowpass.size());
  g.input = corr2_periodic(d_low, p.lowpass);
  g.input += d_high;
  return g;
}

}  // namespace fmr
