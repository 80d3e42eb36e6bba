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

// Reference computations that deliberately avoid the library's fast paths.
// Nothing here calls fft2, conv2_periodic or the analytic gradients: the
// point is to check those against something written independently.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "fmr/grid.hpp"

namespace fmr::oracle {

// Direct O((HW)^2) unitary DFT.
inline SpectrumGrid naive_dft2(const FeatureGrid& x) {
  const std::size_t h = x.height();
  const std::size_t w = x.width();
  SpectrumGrid out(h, w);
  const double scale = 1.0 / std::sqrt(static_cast<double>(h * w));
  auto roots = [](std::size_t n) {
    std::vector<Complex> t(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double phase = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
      t[k] = Complex(std::cos(phase), std::sin(phase));
    }
    return t;
  };
  const auto eh = roots(h);
  const auto ew = roots(w);
  for (std::size_t u = 0; u < h; ++u) {
    for (std::size_t v = 0; v < w; ++v) {
      Complex s{};
      for (std::size_t r = 0; r < h; ++r) {
        const Complex row = eh[u * r % h];
        for (std::size_t c = 0; c < w; ++c) {
          s += x(r, c) * (row * ew[v * c % w]);
        }
      }
      out(u, v) = s * scale;
    }
  }
  return out;
}

// Double loop over output pixels and kernel taps with explicit wrap-around.
inline FeatureGrid brute_conv2_periodic(const FeatureGrid& x,
                                        const Kernel2D& k) {
  const long h = static_cast<long>(x.height());
  const long w = static_cast<long>(x.width());
  const long r = k.radius();
  FeatureGrid out(x.height(), x.width());
  for (long i = 0; i < h; ++i) {
    for (long j = 0; j < w; ++j) {
      double s = 0.0;
      for (long a = -r; a <= r; ++a) {
        for (long b = -r; b <= r; ++b) {
          const long si = ((i - a) % h + h) % h;
          const long sj = ((j - b) % w + w) % w;
          s += k(static_cast<std::size_t>(a + r), static_cast<std::size_t>(b + r)) *
               x(static_cast<std::size_t>(si), static_cast<std::size_t>(sj));
        }
      }
      out(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = s;
    }
  }
  return out;
}

// Central difference of f around params[i].
inline double central_difference(const std::function<double()>& f,
                                 double& param, double step) {
  const double saved = param;
  param = saved + step;
  const double up = f();
  param = saved - step;
  const double down = f();
  param = saved;
  return (up - down) / (2.0 * step);
}

// Central differences for every entry of a parameter block.
inline std::vector<double> numeric_gradient(const std::function<double()>& f,
                                            std::span<double> params,
                                            double step) {
  std::vector<double> g(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    g[i] = central_difference(f, params[i], step);
  }
  return g;
}

// ||a - b|| / max(||a||, ||b||, floor): symmetric relative error.
inline double relative_error(std::span<const double> a,
                             std::span<const double> b, double floor = 1e-12) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

// Per-frequency MMSE (Wiener) gain for a signal with expected unitary power
// spectrum S(xi) observed in white noise of per-pixel variance sigma^2. With
// the unitary transform the noise power is sigma^2 at every frequency.
inline FeatureGrid wiener_mask(const FeatureGrid& signal_power,
                               double noise_sigma) {
  FeatureGrid m(signal_power.height(), signal_power.width());
  const double n = noise_sigma * noise_sigma;
  for (std::size_t i = 0; i < m.size(); ++i) {
    m[i] = signal_power[i] / (signal_power[i] + n);
  }
  return m;
}

// Brute-force version of the same gain: minimizes sum over samples of
// |m * Y - X|^2 per frequency, i.e. m = sum Re(conj(Y) X) / sum |Y|^2, from
// explicit sample spectra. Converges to wiener_mask as samples grow.
inline FeatureGrid empirical_wiener_mask(
    const std::vector<SpectrumGrid>& clean,
    const std::vector<SpectrumGrid>& noisy) {
  FeatureGrid num(clean.front().height(), clean.front().width());
  FeatureGrid den = num;
  for (std::size_t s = 0; s < clean.size(); ++s) {
    for (std::size_t i = 0; i < num.size(); ++i) {
      num[i] += (std::conj(noisy[s][i]) * clean[s][i]).real();
      den[i] += std::norm(noisy[s][i]);
    }
  }
  for (std::size_t i = 0; i < num.size(); ++i) num[i] /= den[i];
  return num;
}

// Nearest point of the segment {(t, 1 - t) : t in [0, 1]} to (a, b),
// by minimizing (t - a)^2 + (1 - t - b)^2 over t and clamping.
inline std::pair<double, double> simplex_projection_closed_form(double a, double b) {
  const double t = std::clamp(0.5 * (1.0 + a - b), 0.0, 1.0);
  return {t, 1.0 - t};
}

}  // namespace fmr::oracle
