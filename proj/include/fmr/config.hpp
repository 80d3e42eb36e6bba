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

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fmr/degrade.hpp"
#include "fmr/error.hpp"
#include "fmr/trainer.hpp"

// Line-oriented `key = value` configuration. Blank lines and text after '#'
// are ignored. Unknown keys and malformed values are errors.

namespace fmr {

struct DegradationSettings {
  std::vector<std::string> kinds = {"noise", "blur"};
  double noise_sigma = 25.0 / 255.0;
  double blur_sigma = 1.5;
  double haze_t0 = 0.6;
  double haze_airlight = 0.8;
  double lowlight_gamma = 2.2;
  double lowlight_scale = 0.5;
  long rain_count = 40;
  double rain_angle_deg = 75.0;
  double rain_intensity = 0.3;
  std::uint64_t seed = 0;

  std::vector<DegradationSpec> specs() const {
    std::vector<DegradationSpec> out;
    for (std::size_t i = 0; i < kinds.size(); ++i) {
      const auto& k = kinds[i];
      DegradationSpec s;
      s.seed = mix_seed(seed, i);
      if (k == "noise") {
        s.kind = GaussianNoise{noise_sigma};
      } else if (k == "blur") {
        s.kind = GaussianBlur{blur_sigma};
      } else if (k == "haze") {
        s.kind = HazeAttenuation{haze_t0, haze_airlight};
      } else if (k == "lowlight") {
        s.kind = LowLightGamma{lowlight_gamma, lowlight_scale};
      } else if (k == "rain") {
        s.kind = RainStreaks{rain_count, rain_angle_deg, rain_intensity};
      } else {
        throw ConfigError("unknown degradation kind '" + k +
                          "' (noise|blur|haze|lowlight|rain)");
      }
      s.validate();
      out.push_back(s);
    }
    if (out.empty()) throw ConfigError("degradation.kinds is empty");
    return out;
  }
};

struct DatasetSettings {
  std::string manifest;   // used by train / eval / eos-trace
  std::string image_dir;  // source images for degrade; empty = synthetic scenes
  std::size_t synthetic_count = 20;
  std::size_t synthetic_height = 32;
  std::size_t synthetic_width = 32;
  std::uint64_t synthetic_seed = 0;
  SplitConfig split;
};

struct RunConfig {
  TrainConfig trainer;
  DegradationSettings degradation;
  DatasetSettings dataset;
  std::size_t workers = 1;
};

struct ConfigKey {
  std::string name;
  std::string description;
  std::function<void(RunConfig&, const std::string&)> set;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const char* end = v.data() + v.size();
  const auto res = std::from_chars(v.data(), end, out);
  if (v.empty() || res.ec != std::errc{} || res.ptr != end) {
    throw ConfigError("invalid value '" + v + "' for key '" + key + "'");
  }
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("invalid boolean '" + v + "' for key '" + key + "'");
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

#define FMR_NUM(KEY, TYPE, FIELD, DOC)                                          \
  {KEY, DOC, [](RunConfig& c, const std::string& v) {                           \
     c.FIELD = ::fmr::detail::parse_number<TYPE>(KEY, v);                       \
   }}

inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      FMR_NUM("trainer.iterations", long, trainer.iterations, "training iterations"),
      FMR_NUM("trainer.learning_rate", double, trainer.learning_rate, "initial step size"),
      {"trainer.lr_halve_at", "iteration from which the step size is halved, or 'none'",
       [](RunConfig& c, const std::string& v) {
         if (v == "none") {
           c.trainer.lr_halve_at.reset();
         } else {
           c.trainer.lr_halve_at = parse_number<long>("trainer.lr_halve_at", v);
         }
       }},
      FMR_NUM("trainer.batch_size", std::size_t, trainer.batch_size, "images per step"),
      {"trainer.init_alpha", "initial fidelity weight; beta = 1 - alpha",
       [](RunConfig& c, const std::string& v) {
         const double a = parse_number<double>("trainer.init_alpha", v);
         c.trainer.init_weights = {a, 1.0 - a};
       }},
      FMR_NUM("trainer.eval_every", long, trainer.eval_every,
              "validation period in iterations"),
      FMR_NUM("trainer.seed", std::uint64_t, trainer.seed, "batch sampling seed"),
      FMR_NUM("trainer.checkpoint_every", long, trainer.checkpoint_every,
              "checkpoint period in iterations; 0 = final only"),
      {"trainer.eos_enabled", "run the weight search at trigger boundaries",
       [](RunConfig& c, const std::string& v) {
         c.trainer.eos_enabled = parse_bool("trainer.eos_enabled", v);
       }},
      {"trainer.trainable", "comma list from lowpass,spectral,spatial",
       [](RunConfig& c, const std::string& v) {
         TrainableSet t{false, false, false};
         for (const auto& s : split_list(v)) {
           if (s == "lowpass") {
             t.lowpass = true;
           } else if (s == "spectral") {
             t.spectral = true;
           } else if (s == "spatial") {
             t.spatial = true;
           } else {
             throw ConfigError("unknown parameter class '" + s + "' in trainer.trainable");
           }
         }
         c.trainer.trainable = t;
       }},
      {"model.mask_mode", "per_frequency | radial_bins",
       [](RunConfig& c, const std::string& v) {
         if (v == "per_frequency") {
           c.trainer.model.mask_mode = MaskMode::PerFrequency;
         } else if (v == "radial_bins") {
           c.trainer.model.mask_mode = MaskMode::RadialBins;
         } else {
           throw ConfigError("model.mask_mode must be per_frequency or radial_bins");
         }
       }},
      FMR_NUM("model.n_bins", std::size_t, trainer.model.n_bins, "radial bins"),
      {"model.spatial_mode", "per_pixel | gap_affine",
       [](RunConfig& c, const std::string& v) {
         if (v == "per_pixel") {
           c.trainer.model.spatial_mode = SpatialMode::PerPixel;
         } else if (v == "gap_affine") {
           c.trainer.model.spatial_mode = SpatialMode::GapAffine;
         } else {
           throw ConfigError("model.spatial_mode must be per_pixel or gap_affine");
         }
       }},
      FMR_NUM("model.kernel_size", std::size_t, trainer.model.kernel_size,
              "low-pass side (odd)"),
      FMR_NUM("model.kernel_sigma", double, trainer.model.kernel_sigma,
              "initial Gaussian low-pass width"),
      FMR_NUM("model.spectral_logit", double, trainer.model.spectral_logit,
              "initial spectral logit"),
      FMR_NUM("model.spatial_logit", double, trainer.model.spatial_logit,
              "initial spatial logit"),
      FMR_NUM("eos.population", std::size_t, trainer.eos.population, "candidates P"),
      FMR_NUM("eos.generations", std::size_t, trainer.eos.generations, "generations G"),
      FMR_NUM("eos.elites", std::size_t, trainer.eos.elites, "survivors k"),
      FMR_NUM("eos.mutation_sigma", double, trainer.eos.mutation_sigma,
              "mutation standard deviation"),
      FMR_NUM("eos.trigger_interval", long, trainer.eos.trigger_interval,
              "iterations T between searches"),
      FMR_NUM("eos.seed", std::uint64_t, trainer.eos.seed, "search seed"),
      {"eos.crossover_lambda", "fixed crossover weight in [0,1], or 'random'",
       [](RunConfig& c, const std::string& v) {
         if (v == "random") {
           c.trainer.eos.crossover_lambda.reset();
         } else {
           c.trainer.eos.crossover_lambda = parse_number<double>("eos.crossover_lambda", v);
         }
       }},
      FMR_NUM("eos.subset_per_kind", std::size_t, trainer.eos.subset_per_kind,
              "validation images per kind used for fitness"),
      FMR_NUM("loss.charbonnier_eps", double, trainer.loss.charbonnier_eps,
              "Charbonnier epsilon"),
      {"loss.ms_ssim_scales", "MS-SSIM scales 1..5, or 0 to choose from the image size",
       [](RunConfig& c, const std::string& v) {
         const auto n = parse_number<std::size_t>("loss.ms_ssim_scales", v);
         if (n == 0) {
           c.trainer.loss.ms_ssim.reset();
         } else if (n > kMsSsimWeights.size()) {
           throw ConfigError("loss.ms_ssim_scales must be at most 5");
         } else {
           MsSsimConfig m;
           m.scales = n;
           c.trainer.loss.ms_ssim = m;
         }
       }},
      {"degradation.kinds", "comma list from noise,blur,haze,lowlight,rain",
       [](RunConfig& c, const std::string& v) { c.degradation.kinds = split_list(v); }},
      FMR_NUM("degradation.noise_sigma", double, degradation.noise_sigma,
              "noise standard deviation"),
      FMR_NUM("degradation.blur_sigma", double, degradation.blur_sigma, "blur width"),
      FMR_NUM("degradation.haze_t0", double, degradation.haze_t0, "haze transmission"),
      FMR_NUM("degradation.haze_airlight", double, degradation.haze_airlight,
              "haze airlight"),
      FMR_NUM("degradation.lowlight_gamma", double, degradation.lowlight_gamma,
              "low-light gamma"),
      FMR_NUM("degradation.lowlight_scale", double, degradation.lowlight_scale,
              "low-light scale"),
      FMR_NUM("degradation.rain_count", long, degradation.rain_count, "rain streaks"),
      FMR_NUM("degradation.rain_angle_deg", double, degradation.rain_angle_deg,
              "rain angle in degrees"),
      FMR_NUM("degradation.rain_intensity", double, degradation.rain_intensity,
              "rain brightness"),
      FMR_NUM("degradation.seed", std::uint64_t, degradation.seed, "degradation seed"),
      {"dataset.manifest", "manifest path (relative paths resolve against the config)",
       [](RunConfig& c, const std::string& v) { c.dataset.manifest = v; }},
      {"dataset.image_dir", "directory of clean PGM/FGRID images; empty = synthetic",
       [](RunConfig& c, const std::string& v) { c.dataset.image_dir = v; }},
      FMR_NUM("dataset.synthetic_count", std::size_t, dataset.synthetic_count,
              "synthetic clean images"),
      FMR_NUM("dataset.synthetic_height", std::size_t, dataset.synthetic_height,
              "synthetic image height"),
      FMR_NUM("dataset.synthetic_width", std::size_t, dataset.synthetic_width,
              "synthetic image width"),
      FMR_NUM("dataset.synthetic_seed", std::uint64_t, dataset.synthetic_seed,
              "synthetic scene seed"),
      FMR_NUM("dataset.validation_fraction", double, dataset.split.validation_fraction,
              "held-out validation share per kind"),
      FMR_NUM("dataset.test_fraction", double, dataset.split.test_fraction,
              "held-out test share per kind"),
      FMR_NUM("dataset.seed", std::uint64_t, dataset.split.seed, "split seed"),
      FMR_NUM("run.workers", std::size_t, workers, "evaluation threads"),
  };
  return keys;
}

#undef FMR_NUM

}  // namespace detail

using detail::config_keys;

// Sets one key. Unknown keys raise ConfigError.
inline void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& k : config_keys()) {
    if (k.name == key) {
      k.set(cfg, value);
      return;
    }
  }
  throw ConfigError("unknown configuration key '" + key + "'");
}

// Applies a `key=value` override.
inline void apply_override(RunConfig& cfg, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override '" + kv + "' is not of the form key=value");
  }
  apply_setting(cfg, detail::trim(kv.substr(0, eq)), detail::trim(kv.substr(eq + 1)));
}

inline void parse_config(std::istream& is, RunConfig& cfg, const std::string& origin = "config") {
  std::string line;
  long n = 0;
  while (std::getline(is, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(detail::concat(origin, ":", n, ": expected key = value"));
    }
    try {
      apply_setting(cfg, detail::trim(t.substr(0, eq)), detail::trim(t.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(detail::concat(origin, ":", n, ": ", e.what()));
    }
  }
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config file " + path.string());
  RunConfig cfg;
  parse_config(is, cfg, path.string());
  if (!cfg.dataset.manifest.empty() &&
      std::filesystem::path(cfg.dataset.manifest).is_relative()) {
    cfg.dataset.manifest = (path.parent_path() / cfg.dataset.manifest).string();
  }
  if (!cfg.dataset.image_dir.empty() &&
      std::filesystem::path(cfg.dataset.image_dir).is_relative()) {
    cfg.dataset.image_dir = (path.parent_path() / cfg.dataset.image_dir).string();
  }
  return cfg;
}

// Run-level settings copied into the trainer (worker count).
inline TrainConfig effective_train_config(const RunConfig& cfg) {
  TrainConfig t = cfg.trainer;
  t.workers = cfg.workers;
  t.eos.workers = cfg.workers;
  return t;
}

}  // namespace fmr
