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
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "fmr/conv.hpp"
#include "fmr/error.hpp"
#include "fmr/grid.hpp"
#include "fmr/grid_io.hpp"
#include "fmr/losses.hpp"
#include "fmr/rng.hpp"

// Synthetic degradations standing in for the noise / blur / haze / low-light
// / rain benchmark suites, plus PSNR/SSIM and paired-dataset assembly.

namespace fmr {

struct GaussianNoise {
  double sigma = 25.0 / 255.0;
};
struct GaussianBlur {
  double kernel_sigma = 1.5;
};
struct HazeAttenuation {
  double t0 = 0.6;
  double airlight = 0.8;
};
struct LowLightGamma {
  double gamma = 2.2;
  double scale = 0.5;
};
struct RainStreaks {
  long count = 40;
  double angle_deg = 75.0;
  double intensity = 0.3;
};

using DegradationKind =
    std::variant<GaussianNoise, GaussianBlur, HazeAttenuation, LowLightGamma, RainStreaks>;

struct DegradationSpec {
  DegradationKind kind = GaussianNoise{};
  std::uint64_t seed = 0;

  std::string tag() const {
    static constexpr const char* kTags[] = {"noise", "blur", "haze", "lowlight", "rain"};
    return kTags[kind.index()];
  }

  void validate() const {
    std::visit(
        [](const auto& k) {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, GaussianNoise>) {
            if (!(k.sigma > 0.0)) throw ConfigError("noise sigma must be > 0");
          } else if constexpr (std::is_same_v<K, GaussianBlur>) {
            if (!(k.kernel_sigma > 0.0)) throw ConfigError("blur sigma must be > 0");
          } else if constexpr (std::is_same_v<K, HazeAttenuation>) {
            if (!(k.t0 > 0.0 && k.t0 <= 1.0)) throw ConfigError("haze t0 must be in (0, 1]");
            if (!(k.airlight >= 0.0 && k.airlight <= 1.0))
              throw ConfigError("haze airlight must be in [0, 1]");
          } else if constexpr (std::is_same_v<K, LowLightGamma>) {
            if (!(k.gamma > 1.0)) throw ConfigError("low-light gamma must be > 1");
            if (!(k.scale > 0.0 && k.scale <= 1.0))
              throw ConfigError("low-light scale must be in (0, 1]");
          } else {
            if (k.count < 0) throw ConfigError("rain streak count must be >= 0");
            if (!(k.intensity >= 0.0)) throw ConfigError("rain intensity must be >= 0");
          }
        },
        kind);
  }
};

namespace detail {

inline void clamp_unit(FeatureGrid& g) {
  for (auto& v : g.values()) v = std::clamp(v, 0.0, 1.0);
}

inline Kernel2D blur_kernel(double sigma, std::size_t h, std::size_t w) {
  std::size_t size = 2 * static_cast<std::size_t>(std::ceil(3.0 * sigma)) + 1;
  const std::size_t limit = std::min(h, w) % 2 == 1 ? std::min(h, w) : std::min(h, w) - 1;
  return Kernel2D::gaussian(std::min(size, std::max<std::size_t>(limit, 1)), sigma);
}

}  // namespace detail

// Applies one degradation and clamps the result to [0, 1]. Same (clean,
// spec) always gives the same output.
inline FeatureGrid apply_degradation(const FeatureGrid& clean,
                                     const DegradationSpec& spec) {
  spec.validate();
  for (double v : clean.values()) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ConfigError("clean image must lie in [0, 1]");
    }
  }
  Rng rng(spec.seed);
  FeatureGrid out = clean;
  std::visit(
      [&](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, GaussianNoise>) {
          for (auto& v : out.values()) v += k.sigma * rng.normal();
        } else if constexpr (std::is_same_v<K, GaussianBlur>) {
          out = conv2_periodic(clean,
                               detail::blur_kernel(k.kernel_sigma, clean.height(), clean.width()));
        } else if constexpr (std::is_same_v<K, HazeAttenuation>) {
          for (auto& v : out.values()) v = k.t0 * v + (1.0 - k.t0) * k.airlight;
        } else if constexpr (std::is_same_v<K, LowLightGamma>) {
          for (auto& v : out.values()) v = k.scale * std::pow(v, k.gamma);
        } else {
          // Straight bright streaks at a common angle with small jitter,
          // wrapped around the borders.
          const double h = static_cast<double>(clean.height());
          const double w = static_cast<double>(clean.width());
          for (long s = 0; s < k.count; ++s) {
            const double y0 = rng.uniform(0.0, h);
            const double x0 = rng.uniform(0.0, w);
            const double len = rng.uniform(h / 8.0, h / 3.0);
            const double angle =
                (k.angle_deg + rng.uniform(-5.0, 5.0)) * std::numbers::pi / 180.0;
            const double amp = k.intensity * rng.uniform(0.5, 1.0);
            const double dy = std::sin(angle);
            const double dx = std::cos(angle);
            for (double t = 0.0; t < len; t += 1.0) {
              const auto r = detail::wrap(static_cast<long>(std::floor(y0 + t * dy)),
                                          clean.height());
              const auto c = detail::wrap(static_cast<long>(std::floor(x0 + t * dx)),
                                          clean.width());
              out(r, c) += amp;
            }
          }
        }
      },
      spec.kind);
  detail::clamp_unit(out);
  return out;
}

// Reported in place of +infinity for identical images.
inline constexpr double kPsnrCap = 99.0;

// 10 log10(1 / MSE) on unit dynamic range; +infinity for identical inputs.
inline double psnr(const FeatureGrid& pred, const FeatureGrid& target) {
  FeatureGrid::require_same_shape(pred, target, "psnr");
  double mse = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    mse += d * d;
  }
  mse /= static_cast<double>(pred.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

inline double psnr_capped(double value) { return std::min(value, kPsnrCap); }

// Piecewise-smooth test scene: shaded background, a few flat-shaded
// ellipses and rectangles, and mild low-frequency texture. Values stay in
// [0.05, 0.95].
inline FeatureGrid synthetic_scene(std::size_t h, std::size_t w, std::uint64_t seed) {
  Rng rng(seed);
  FeatureGrid g(h, w);
  const double gy = rng.uniform(-0.3, 0.3);
  const double gx = rng.uniform(-0.3, 0.3);
  const double base = rng.uniform(0.35, 0.65);
  const double H = static_cast<double>(h);
  const double W = static_cast<double>(w);
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j)
      g(i, j) = base + gy * (static_cast<double>(i) / H - 0.5) +
                gx * (static_cast<double>(j) / W - 0.5);
  const int shapes = 3 + static_cast<int>(rng.index(4));
  for (int s = 0; s < shapes; ++s) {
    const double cy = rng.uniform(0.0, H);
    const double cx = rng.uniform(0.0, W);
    const double ry = rng.uniform(H / 10.0, H / 3.0);
    const double rx = rng.uniform(W / 10.0, W / 3.0);
    const double level = rng.uniform(0.1, 0.9);
    const bool ellipse = rng.uniform() < 0.5;
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j) {
        const double dy = (static_cast<double>(i) - cy) / ry;
        const double dx = (static_cast<double>(j) - cx) / rx;
        const bool inside = ellipse ? dy * dy + dx * dx <= 1.0
                                    : std::abs(dy) <= 1.0 && std::abs(dx) <= 1.0;
        if (inside) g(i, j) = level;
      }
  }
  for (int t = 0; t < 3; ++t) {
    const double fy = rng.uniform(1.0, 4.0) / H;
    const double fx = rng.uniform(1.0, 4.0) / W;
    const double ph = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double amp = rng.uniform(0.01, 0.04);
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j)
        g(i, j) += amp * std::sin(2.0 * std::numbers::pi *
                                      (fy * static_cast<double>(i) + fx * static_cast<double>(j)) +
                                  ph);
  }
  for (auto& v : g.values()) v = std::clamp(v, 0.05, 0.95);
  return g;
}

// ---------------------------------------------------------------------------
// Paired datasets

struct ImagePair {
  FeatureGrid clean;
  FeatureGrid degraded;
  std::string kind;
  std::uint64_t seed = 0;
  std::size_t source = 0;  // index of the clean source image
};

struct SplitConfig {
  double validation_fraction = 0.2;
  double test_fraction = 0.0;
  std::uint64_t seed = 0;
};

enum class Split { Train, Validation, Test, All };

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "validation" || s == "val") return Split::Validation;
  if (s == "test") return Split::Test;
  if (s == "all") return Split::All;
  throw ConfigError("unknown split '" + s + "' (train|validation|test|all)");
}

struct PairedDataset {
  std::vector<ImagePair> pairs;
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;

  std::vector<std::size_t> indices(Split s) const {
    switch (s) {
      case Split::Train: return train;
      case Split::Validation: return validation;
      case Split::Test: return test;
      case Split::All: break;
    }
    std::vector<std::size_t> all(pairs.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
  }
};

// Assigns pairs to train / validation / test, stratified by kind: every kind
// contributes round(fraction * count) pairs to each held-out split.
inline void assign_splits(PairedDataset& ds, const SplitConfig& cfg) {
  if (cfg.validation_fraction < 0.0 || cfg.test_fraction < 0.0 ||
      cfg.validation_fraction + cfg.test_fraction >= 1.0) {
    throw ConfigError("split fractions must be >= 0 and sum to < 1");
  }
  ds.train.clear();
  ds.validation.clear();
  ds.test.clear();
  std::map<std::string, std::vector<std::size_t>> by_kind;
  for (std::size_t i = 0; i < ds.pairs.size(); ++i) by_kind[ds.pairs[i].kind].push_back(i);
  std::uint64_t tag = 0;
  for (auto& [kind, members] : by_kind) {
    Rng rng(mix_seed(cfg.seed, tag++));
    rng.shuffle(members);
    const double n = static_cast<double>(members.size());
    const auto n_val = static_cast<std::size_t>(std::lround(cfg.validation_fraction * n));
    const auto n_test = static_cast<std::size_t>(std::lround(cfg.test_fraction * n));
    if (n_val + n_test >= members.size()) {
      throw ConfigError(detail::concat("not enough images of kind '", kind, "' (",
                                       members.size(), ") for the requested splits"));
    }
    for (std::size_t j = 0; j < members.size(); ++j) {
      auto& dst = j < n_val ? ds.validation : (j < n_val + n_test ? ds.test : ds.train);
      dst.push_back(members[j]);
    }
  }
  std::sort(ds.train.begin(), ds.train.end());
  std::sort(ds.validation.begin(), ds.validation.end());
  std::sort(ds.test.begin(), ds.test.end());
}

// Every source image degraded by every spec. Pair seeds are derived from
// the spec seed and the source index.
inline PairedDataset build_dataset(const std::vector<FeatureGrid>& sources,
                                   const std::vector<DegradationSpec>& specs,
                                   const SplitConfig& split) {
  if (sources.empty()) throw ConfigError("build_dataset: no source images");
  if (specs.empty()) throw ConfigError("build_dataset: no degradation specs");
  PairedDataset ds;
  for (const auto& spec : specs) {
    for (std::size_t i = 0; i < sources.size(); ++i) {
      DegradationSpec s = spec;
      s.seed = mix_seed(spec.seed, i);
      ds.pairs.push_back({sources[i], apply_degradation(sources[i], s), spec.tag(), s.seed, i});
    }
  }
  assign_splits(ds, split);
  return ds;
}

// Up to `per_kind` validation pairs of every kind, in index order.
inline std::vector<std::size_t> stratified_subset(const PairedDataset& ds,
                                                  const std::vector<std::size_t>& pool,
                                                  std::size_t per_kind) {
  std::map<std::string, std::size_t> taken;
  std::vector<std::size_t> out;
  for (std::size_t i : pool) {
    auto& n = taken[ds.pairs[i].kind];
    if (n < per_kind) {
      out.push_back(i);
      ++n;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Manifest: header "index,kind,seed,clean_path,degraded_path", one row per
// pair. Paths are relative to the manifest's directory.

struct ManifestRow {
  std::size_t index = 0;
  std::string kind;
  std::uint64_t seed = 0;
  std::string clean_path;
  std::string degraded_path;
};

inline constexpr const char* kManifestHeader = "index,kind,seed,clean_path,degraded_path";

inline void write_manifest(std::ostream& os, const std::vector<ManifestRow>& rows) {
  os << kManifestHeader << '\n';
  for (const auto& r : rows) {
    os << r.index << ',' << r.kind << ',' << r.seed << ',' << r.clean_path << ','
       << r.degraded_path << '\n';
  }
}

inline std::vector<ManifestRow> read_manifest(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kManifestHeader) {
    throw IoError("manifest must start with '" + std::string(kManifestHeader) + "'");
  }
  std::vector<ManifestRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 5) throw IoError("malformed manifest row '" + line + "'");
    try {
      rows.push_back({std::stoul(f[0]), f[1], std::stoull(f[2]), f[3], f[4]});
    } catch (const std::logic_error&) {
      throw IoError("malformed manifest row '" + line + "'");
    }
  }
  return rows;
}

// Loads every pair listed in a manifest and assigns splits.
inline PairedDataset load_dataset(const std::filesystem::path& manifest,
                                  const SplitConfig& split) {
  std::ifstream is(manifest);
  if (!is) throw IoError("cannot open manifest " + manifest.string());
  const auto rows = read_manifest(is);
  if (rows.empty()) throw ConfigError("manifest " + manifest.string() + " lists no pairs");
  const auto dir = manifest.parent_path();
  PairedDataset ds;
  std::map<std::string, std::size_t> source_ids;
  for (const auto& r : rows) {
    auto [it, inserted] = source_ids.try_emplace(r.clean_path, source_ids.size());
    ds.pairs.push_back({io::load_image(dir / r.clean_path), io::load_image(dir / r.degraded_path),
                        r.kind, r.seed, it->second});
    if (!ds.pairs.back().clean.same_shape(ds.pairs.back().degraded)) {
      throw DimensionError("pair " + std::to_string(r.index) + " has mismatched shapes");
    }
  }
  assign_splits(ds, split);
  return ds;
}

}  // namespace fmr
