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

// Spectral-mask recovery experiment: images with a known power spectrum in
// white Gaussian noise, a pass-through low-pass and a trainable
// per-frequency mask. Trained on fidelity only, the mask should approach the
// per-frequency MMSE gain S / (S + sigma^2).

#include <cmath>
#include <cstdint>

#include "fmr/degrade.hpp"
#include "fmr/fft.hpp"
#include "fmr/fmm.hpp"
#include "fmr/rng.hpp"
#include "fmr/testing/oracles.hpp"
#include "fmr/trainer.hpp"

namespace fmr::oracle {

struct WienerSetup {
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t n_train = 800;
  std::size_t n_test = 100;
  double noise_sigma = 25.0 / 255.0;
  double corner = 0.08;  // r0 in cycles/pixel
  double pixel_std = 0.15;
  double mean = 0.5;
  long iterations = 200;
  double learning_rate = 300.0;
  std::uint64_t seed = 1;
  std::size_t workers = 1;
};

struct WienerOutcome {
  FeatureGrid learned;
  FeatureGrid oracle;
  FeatureGrid empirical;
  FeatureGrid signal_power;
  double linf = 0.0;            // learned vs oracle over the support
  double empirical_linf = 0.0;  // sample MMSE gain vs oracle over the support
  std::size_t support = 0;
  double psnr_noisy = 0.0;
  double psnr_denoised = 0.0;
  double final_loss = 0.0;
};

// Expected unitary power of the random part, A / (1 + (r / r0)^2)^1.5, with
// A chosen so the pixel standard deviation is `pixel_std`.
inline FeatureGrid field_power(const WienerSetup& s) {
  FeatureGrid p(s.height, s.width);
  for (std::size_t u = 0; u < s.height; ++u)
    for (std::size_t v = 0; v < s.width; ++v) {
      const double r = radial_frequency(u, v, s.height, s.width) / s.corner;
      p(u, v) = std::pow(1.0 + r * r, -1.5);
    }
  // Pixel variance is the mean of the unitary power.
  const double var = mean(p);
  p *= s.pixel_std * s.pixel_std / var;
  return p;
}

inline FeatureGrid random_field(const WienerSetup& s, const FeatureGrid& power, Rng& rng) {
  FeatureGrid white(s.height, s.width);
  for (auto& v : white.values()) v = rng.normal();
  SpectrumGrid spec = fft2(white);
  for (std::size_t i = 0; i < spec.size(); ++i) spec[i] *= std::sqrt(power[i]);
  FeatureGrid x = ifft2(spec);
  for (auto& v : x.values()) v += s.mean;
  return x;
}

inline WienerOutcome run_wiener_recovery(const WienerSetup& s) {
  const auto power = field_power(s);
  Rng rng(s.seed);
  PairedDataset ds;
  std::vector<SpectrumGrid> clean_spec;
  std::vector<SpectrumGrid> noisy_spec;
  for (std::size_t i = 0; i < s.n_train + s.n_test; ++i) {
    auto clean = random_field(s, power, rng);
    auto noisy = clean;
    for (auto& v : noisy.values()) v += s.noise_sigma * rng.normal();
    if (i < s.n_train) {
      clean_spec.push_back(fft2(clean));
      noisy_spec.push_back(fft2(noisy));
      ds.train.push_back(i);
    } else {
      ds.validation.push_back(i);
    }
    ds.pairs.push_back({std::move(clean), std::move(noisy), "noise", s.seed, i});
  }

  TrainConfig cfg;
  cfg.iterations = s.iterations;
  cfg.learning_rate = s.learning_rate;
  cfg.batch_size = s.n_train;
  cfg.init_weights = {1.0, 0.0};
  cfg.eos_enabled = false;
  cfg.eval_every = s.iterations;
  cfg.trainable = {false, true, false};
  cfg.workers = s.workers;
  MsSsimConfig ms;
  ms.scales = 1;
  cfg.loss.ms_ssim = ms;
  FmmOptions opt;
  opt.kernel_size = 1;
  auto model = make_fmm_params(s.height, s.width, opt);
  model.lowpass = Kernel2D::identity();
  const auto result = train(ds, cfg, model);

  WienerOutcome out;
  out.signal_power = power;
  out.learned = spectral_mask(result.model, s.height, s.width);
  // DC also carries the deterministic mean.
  FeatureGrid full_power = power;
  full_power[0] += static_cast<double>(s.height * s.width) * s.mean * s.mean;
  out.oracle = wiener_mask(full_power, s.noise_sigma);
  out.empirical = empirical_wiener_mask(clean_spec, noisy_spec);
  const double floor = s.noise_sigma * s.noise_sigma;
  for (std::size_t i = 0; i < power.size(); ++i) {
    if (full_power[i] <= floor) continue;
    ++out.support;
    out.linf = std::max(out.linf, std::abs(out.learned[i] - out.oracle[i]));
    out.empirical_linf = std::max(out.empirical_linf, std::abs(out.empirical[i] - out.oracle[i]));
  }
  double pn = 0.0;
  double pd = 0.0;
  for (std::size_t i : ds.validation) {
    const auto& pair = ds.pairs[i];
    pn += psnr(pair.degraded, pair.clean);
    pd += psnr(fmm_apply(pair.degraded, result.model), pair.clean);
  }
  out.psnr_noisy = pn / static_cast<double>(ds.validation.size());
  out.psnr_denoised = pd / static_cast<double>(ds.validation.size());
  out.final_loss = result.trace.iterations.back().loss.combined;
  return out;
}

}  // namespace fmr::oracle
