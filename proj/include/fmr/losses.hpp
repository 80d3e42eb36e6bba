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
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <vector>

#include "fmr/error.hpp"
#include "fmr/grid.hpp"
#include "fmr/simplex.hpp"

namespace fmr {

inline constexpr double kCharbonnierEps = 1e-3;

struct ValueAndGrad {
  double value = 0.0;
  FeatureGrid grad;
};

// mean(sqrt((pred - target)^2 + eps^2)) and its gradient w.r.t. pred.
inline ValueAndGrad charbonnier(const FeatureGrid& pred,
                                const FeatureGrid& target,
                                double eps = kCharbonnierEps) {
  FeatureGrid::require_same_shape(pred, target, "charbonnier");
  if (!(eps > 0.0)) throw ConfigError("charbonnier eps must be > 0");
  const double n = static_cast<double>(pred.size());
  ValueAndGrad out{0.0, FeatureGrid(pred.height(), pred.width())};
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    const double r = std::sqrt(d * d + eps * eps);
    total += r;
    out.grad[i] = d / (n * r);
  }
  out.value = total / n;
  return out;
}

// ---------------------------------------------------------------------------
// SSIM / MS-SSIM
//
// Gaussian window applied with "valid" extent (no padding), 2x2 average
// pooling between scales. Contrast-structure means at every scale but the
// last, full SSIM mean at the last, combined as a weighted geometric mean.

inline constexpr std::array<double, 5> kMsSsimWeights = {0.0448, 0.2856, 0.3001,
                                                         0.2363, 0.1333};

struct MsSsimConfig {
  std::size_t scales = 5;
  std::size_t window = 11;
  double sigma = 1.5;
  double c1 = 0.01 * 0.01;
  double c2 = 0.03 * 0.03;
  // Per-scale exponents. Empty means the canonical five weights, or for
  // fewer scales their leading entries renormalized to sum to one.
  std::vector<double> weights;

  std::vector<double> exponents() const {
    if (!weights.empty()) {
      if (weights.size() != scales) {
        throw ConfigError("ms-ssim weights must have one entry per scale");
      }
      return weights;
    }
    if (scales == 0 || scales > kMsSsimWeights.size()) {
      throw ConfigError(detail::concat("ms-ssim scales must be in [1, ",
                                       kMsSsimWeights.size(), "]"));
    }
    std::vector<double> w(kMsSsimWeights.begin(),
                          kMsSsimWeights.begin() + static_cast<long>(scales));
    if (scales == kMsSsimWeights.size()) return w;
    const double s = std::accumulate(w.begin(), w.end(), 0.0);
    for (auto& v : w) v /= s;
    return w;
  }

  // Smallest side that supports every requested scale.
  std::size_t min_side() const { return window << (scales - 1); }

  void require_fits(std::size_t h, std::size_t w) const {
    if (scales == 0) throw ConfigError("ms-ssim needs at least one scale");
    if (h < min_side() || w < min_side()) {
      throw ConfigError(detail::concat(
          "image ", h, "x", w, " too small for ", scales,
          "-scale ms-ssim (needs ", min_side(), " px); reduce scales"));
    }
  }

  // Five scales when the image supports them, otherwise three.
  static MsSsimConfig for_size(std::size_t h, std::size_t w) {
    MsSsimConfig cfg;
    if (std::min(h, w) < cfg.min_side()) cfg.scales = 3;
    return cfg;
  }
};

namespace detail {

inline std::vector<double> gaussian_window(std::size_t size, double sigma) {
  std::vector<double> g(size);
  const double c = static_cast<double>(size / 2);
  double s = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double d = static_cast<double>(i) - c;
    g[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    s += g[i];
  }
  for (auto& v : g) v /= s;
  return g;
}

// Separable valid-extent filter: (H - K + 1) x (W - K + 1).
inline FeatureGrid filter_valid(const FeatureGrid& x,
                                const std::vector<double>& g) {
  const std::size_t k = g.size();
  const std::size_t oh = x.height() - k + 1;
  const std::size_t ow = x.width() - k + 1;
  FeatureGrid tmp(x.height(), ow);
  for (std::size_t i = 0; i < x.height(); ++i) {
    const double* row = &x(i, 0);
    for (std::size_t j = 0; j < ow; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < k; ++t) s += g[t] * row[j + t];
      tmp(i, j) = s;
    }
  }
  FeatureGrid out(oh, ow);
  for (std::size_t i = 0; i < oh; ++i) {
    for (std::size_t t = 0; t < k; ++t) {
      const double gt = g[t];
      const double* row = &tmp(i + t, 0);
      double* dst = &out(i, 0);
      for (std::size_t j = 0; j < ow; ++j) dst[j] += gt * row[j];
    }
  }
  return out;
}

// Adjoint of filter_valid: scatters a valid-extent map back to h x w.
inline FeatureGrid filter_valid_adjoint(const FeatureGrid& d,
                                        const std::vector<double>& g,
                                        std::size_t h, std::size_t w) {
  const std::size_t k = g.size();
  FeatureGrid tmp(h, d.width());
  for (std::size_t i = 0; i < d.height(); ++i) {
    for (std::size_t t = 0; t < k; ++t) {
      const double gt = g[t];
      const double* src = &d(i, 0);
      double* dst = &tmp(i + t, 0);
      for (std::size_t j = 0; j < d.width(); ++j) dst[j] += gt * src[j];
    }
  }
  FeatureGrid out(h, w);
  for (std::size_t i = 0; i < h; ++i) {
    const double* src = &tmp(i, 0);
    double* dst = &out(i, 0);
    for (std::size_t j = 0; j < d.width(); ++j) {
      for (std::size_t t = 0; t < k; ++t) dst[j + t] += g[t] * src[j];
    }
  }
  return out;
}

inline FeatureGrid avg_pool2(const FeatureGrid& x) {
  const std::size_t h = x.height() / 2;
  const std::size_t w = x.width() / 2;
  FeatureGrid out(h, w);
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j)
      out(i, j) = 0.25 * (x(2 * i, 2 * j) + x(2 * i, 2 * j + 1) +
                          x(2 * i + 1, 2 * j) + x(2 * i + 1, 2 * j + 1));
  return out;
}

inline FeatureGrid avg_pool2_adjoint(const FeatureGrid& d, std::size_t h,
                                     std::size_t w) {
  FeatureGrid out(h, w);
  for (std::size_t i = 0; i < d.height(); ++i)
    for (std::size_t j = 0; j < d.width(); ++j) {
      const double v = 0.25 * d(i, j);
      out(2 * i, 2 * j) = v;
      out(2 * i, 2 * j + 1) = v;
      out(2 * i + 1, 2 * j) = v;
      out(2 * i + 1, 2 * j + 1) = v;
    }
  return out;
}

enum class SsimTerm { ContrastStructure, Full };

// Mean of the cs (or l * cs) map at one scale, with optional gradient
// w.r.t. x.
inline double ssim_scale(const FeatureGrid& x, const FeatureGrid& y,
                         const std::vector<double>& g, double c1, double c2,
                         SsimTerm term, FeatureGrid* grad_x) {
  const FeatureGrid mx = filter_valid(x, g);
  const FeatureGrid my = filter_valid(y, g);
  const FeatureGrid exx = filter_valid(hadamard(x, x), g);
  const FeatureGrid eyy = filter_valid(hadamard(y, y), g);
  const FeatureGrid exy = filter_valid(hadamard(x, y), g);
  const std::size_t n = mx.size();
  const double inv_n = 1.0 / static_cast<double>(n);

  FeatureGrid d_mx, d_exx, d_exy;
  if (grad_x) {
    d_mx = FeatureGrid(mx.height(), mx.width());
    d_exx = d_mx;
    d_exy = d_mx;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double vx = exx[i] - mx[i] * mx[i];
    const double vy = eyy[i] - my[i] * my[i];
    const double cxy = exy[i] - mx[i] * my[i];
    const double cs_num = 2.0 * cxy + c2;
    const double cs_den = vx + vy + c2;
    const double cs = cs_num / cs_den;
    double l = 1.0;
    double l_den = 1.0;
    if (term == SsimTerm::Full) {
      l_den = mx[i] * mx[i] + my[i] * my[i] + c1;
      l = (2.0 * mx[i] * my[i] + c1) / l_den;
    }
    total += l * cs;
    if (!grad_x) continue;
    // d(l*cs)/dcs = l, d(l*cs)/dl = cs.
    const double d_cs = l * inv_n;
    const double d_cxy = d_cs * 2.0 / cs_den;
    const double d_vx = -d_cs * cs / cs_den;
    double dm = -2.0 * mx[i] * d_vx - my[i] * d_cxy;
    if (term == SsimTerm::Full) {
      const double d_l = cs * inv_n;
      dm += d_l * (2.0 * my[i] - 2.0 * mx[i] * l) / l_den;
    }
    d_mx[i] = dm;
    d_exx[i] = d_vx;
    d_exy[i] = d_cxy;
  }
  if (grad_x) {
    const std::size_t h = x.height();
    const std::size_t w = x.width();
    FeatureGrid gx = filter_valid_adjoint(d_mx, g, h, w);
    const FeatureGrid gxx = filter_valid_adjoint(d_exx, g, h, w);
    const FeatureGrid gxy = filter_valid_adjoint(d_exy, g, h, w);
    for (std::size_t i = 0; i < gx.size(); ++i) {
      gx[i] += 2.0 * x[i] * gxx[i] + y[i] * gxy[i];
    }
    *grad_x = std::move(gx);
  }
  return total * inv_n;
}

}  // namespace detail

// Multi-scale SSIM of pred against target, with the gradient w.r.t. pred
// when requested. Returns a value in [0, 1] for [0, 1] inputs.
inline ValueAndGrad ms_ssim(const FeatureGrid& pred, const FeatureGrid& target,
                            const MsSsimConfig& cfg, bool with_grad = true) {
  FeatureGrid::require_same_shape(pred, target, "ms_ssim");
  cfg.require_fits(pred.height(), pred.width());
  const std::vector<double> expo = cfg.exponents();
  const std::vector<double> g = detail::gaussian_window(cfg.window, cfg.sigma);
  const std::size_t scales = cfg.scales;

  std::vector<FeatureGrid> xs{pred};
  std::vector<FeatureGrid> ys{target};
  for (std::size_t s = 1; s < scales; ++s) {
    xs.push_back(detail::avg_pool2(xs.back()));
    ys.push_back(detail::avg_pool2(ys.back()));
  }

  std::vector<double> vals(scales);
  std::vector<FeatureGrid> grads(with_grad ? scales : 0);
  bool clipped = false;
  for (std::size_t s = 0; s < scales; ++s) {
    const auto term = s + 1 == scales ? detail::SsimTerm::Full
                                      : detail::SsimTerm::ContrastStructure;
    vals[s] = detail::ssim_scale(xs[s], ys[s], g, cfg.c1, cfg.c2, term,
                                 with_grad ? &grads[s] : nullptr);
    if (!(vals[s] > 0.0)) clipped = true;
  }

  ValueAndGrad out{0.0, FeatureGrid(pred.height(), pred.width())};
  // A non-positive factor clips the product to zero (flat gradient).
  if (clipped) return out;
  double value = 1.0;
  for (std::size_t s = 0; s < scales; ++s) value *= std::pow(vals[s], expo[s]);
  out.value = value;
  if (!with_grad) return out;

  // Walk from coarsest to finest, pulling each scale's gradient back
  // through the pooling chain.
  FeatureGrid acc;
  for (std::size_t s = scales; s-- > 0;) {
    FeatureGrid here = grads[s];
    here *= value * expo[s] / vals[s];
    if (!acc.empty()) here += acc;
    if (s == 0) {
      out.grad = std::move(here);
    } else {
      acc = detail::avg_pool2_adjoint(here, xs[s - 1].height(),
                                      xs[s - 1].width());
    }
  }
  return out;
}

// Single-scale SSIM with the same window and constants.
inline double ssim(const FeatureGrid& pred, const FeatureGrid& target,
                   const MsSsimConfig& cfg = {}) {
  FeatureGrid::require_same_shape(pred, target, "ssim");
  MsSsimConfig one = cfg;
  one.scales = 1;
  one.weights.clear();
  one.require_fits(pred.height(), pred.width());
  const auto g = detail::gaussian_window(one.window, one.sigma);
  return detail::ssim_scale(pred, target, g, one.c1, one.c2,
                            detail::SsimTerm::Full, nullptr);
}

struct LossValue {
  double fidelity = 0.0;
  double perceptual = 0.0;  // 1 - MS-SSIM
  double combined = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
};

struct LossSettings {
  double charbonnier_eps = kCharbonnierEps;
  // Unset: chosen from the image size by MsSsimConfig::for_size.
  std::optional<MsSsimConfig> ms_ssim;

  MsSsimConfig ms_ssim_for(std::size_t h, std::size_t w) const {
    return ms_ssim ? *ms_ssim : MsSsimConfig::for_size(h, w);
  }
};

struct LossTerms {
  double fidelity = 0.0;
  double perceptual = 0.0;
};

// Fidelity and perceptual terms without gradients.
inline LossTerms loss_terms(const FeatureGrid& pred, const FeatureGrid& target,
                            const LossSettings& s = {}) {
  const auto cfg = s.ms_ssim_for(pred.height(), pred.width());
  return {charbonnier(pred, target, s.charbonnier_eps).value,
          1.0 - ms_ssim(pred, target, cfg, false).value};
}

struct CombinedLoss {
  LossValue value;
  FeatureGrid grad;
};

// alpha * Charbonnier + beta * (1 - MS-SSIM), with gradient w.r.t. pred.
inline CombinedLoss combined_loss(const FeatureGrid& pred,
                                  const FeatureGrid& target,
                                  const WeightPair& w,
                                  const LossSettings& s = {}) {
  w.require_on_simplex();
  const auto fid = charbonnier(pred, target, s.charbonnier_eps);
  const auto sim = ms_ssim(pred, target, s.ms_ssim_for(pred.height(), pred.width()));
  CombinedLoss out;
  out.value.fidelity = fid.value;
  out.value.perceptual = 1.0 - sim.value;
  out.value.alpha = w.alpha;
  out.value.beta = w.beta;
  out.value.combined = w.alpha * out.value.fidelity + w.beta * out.value.perceptual;
  out.grad = fid.grad * w.alpha;
  for (std::size_t i = 0; i < out.grad.size(); ++i) {
    out.grad[i] -= w.beta * sim.grad[i];
  }
  return out;
}

}  // namespace fmr
