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


#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "fmr/degrade.hpp"
#include "test_util.hpp"

namespace fmr {
namespace {

FeatureGrid constant(std::size_t h, std::size_t w, double v) { return FeatureGrid(h, w, v); }

TEST(Degrade, NoiseStatisticsOnConstantImage) {
  const double sigma = 25.0 / 255.0;
  const auto out = apply_degradation(constant(128, 128, 0.5), {GaussianNoise{sigma}, 7});
  const double n = static_cast<double>(out.size());
  double m = 0.0;
  for (double v : out.values()) m += v;
  m /= n;
  double var = 0.0;
  for (double v : out.values()) var += (v - m) * (v - m);
  const double sd = std::sqrt(var / (n - 1.0));
  EXPECT_LT(std::abs(m - 0.5), 3.0 * sigma / std::sqrt(n));
  EXPECT_LT(std::abs(sd - sigma), 0.1 * sigma);
}

TEST(Degrade, HazeWithUnitTransmissionIsIdentity) {
  const auto clean = test::random_grid(16, 16, 3);
  EXPECT_EQ(apply_degradation(clean, {HazeAttenuation{1.0, 0.37}, 1}), clean);
}

TEST(Degrade, HazeFormula) {
  const auto out = apply_degradation(constant(4, 4, 0.2), {HazeAttenuation{0.5, 0.8}, 0});
  for (double v : out.values()) EXPECT_DOUBLE_EQ(v, 0.5 * 0.2 + 0.5 * 0.8);
}

TEST(Degrade, LowLightOnWhitePixel) {
  const auto out = apply_degradation(constant(4, 4, 1.0), {LowLightGamma{2.2, 0.5}, 0});
  for (double v : out.values()) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(Degrade, BlurPreservesConstantAndSmooths) {
  const auto flat = apply_degradation(constant(16, 16, 0.3), {GaussianBlur{1.0}, 0});
  for (double v : flat.values()) EXPECT_NEAR(v, 0.3, 1e-12);
  const auto clean = test::random_grid(32, 32, 5);
  const auto blurred = apply_degradation(clean, {GaussianBlur{1.5}, 0});
  double tv_clean = 0.0;
  double tv_blur = 0.0;
  for (std::size_t i = 0; i < 32; ++i)
    for (std::size_t j = 0; j + 1 < 32; ++j) {
      tv_clean += std::abs(clean(i, j + 1) - clean(i, j));
      tv_blur += std::abs(blurred(i, j + 1) - blurred(i, j));
    }
  EXPECT_LT(tv_blur, 0.5 * tv_clean);
}

TEST(Degrade, RainOnlyBrightens) {
  const auto clean = constant(32, 32, 0.2);
  const auto out = apply_degradation(clean, {RainStreaks{20, 75.0, 0.4}, 9});
  std::size_t changed = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    EXPECT_GE(out[i], clean[i]);
    if (out[i] > clean[i]) ++changed;
  }
  EXPECT_GT(changed, 0u);
  EXPECT_EQ(apply_degradation(clean, {RainStreaks{0, 75.0, 0.4}, 9}), clean);
}

TEST(Degrade, OutputsStayInUnitRange) {
  const auto clean = synthetic_scene(32, 32, 11);
  const std::vector<DegradationKind> kinds = {GaussianNoise{50.0 / 255.0}, GaussianBlur{2.0},
                                              HazeAttenuation{0.3, 1.0},
                                              LowLightGamma{3.0, 0.2}, RainStreaks{80, 60.0, 1.5}};
  for (const auto& k : kinds) {
    const auto out = apply_degradation(clean, {k, 4});
    for (double v : out.values()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Degrade, DeterministicPerSeed) {
  const auto clean = synthetic_scene(24, 24, 2);
  for (const DegradationKind& k : std::vector<DegradationKind>{GaussianNoise{}, RainStreaks{}}) {
    const auto a = apply_degradation(clean, {k, 42});
    const auto b = apply_degradation(clean, {k, 42});
    EXPECT_EQ(a.storage(), b.storage());
    EXPECT_NE(apply_degradation(clean, {k, 43}).storage(), a.storage());
  }
}

TEST(Degrade, InvariantViolationsAreConfigErrors) {
  const auto clean = constant(8, 8, 0.5);
  EXPECT_THROW(apply_degradation(clean, {GaussianNoise{0.0}, 0}), ConfigError);
  EXPECT_THROW(apply_degradation(clean, {GaussianBlur{-1.0}, 0}), ConfigError);
  EXPECT_THROW(apply_degradation(clean, {HazeAttenuation{0.0, 0.5}, 0}), ConfigError);
  EXPECT_THROW(apply_degradation(clean, {HazeAttenuation{0.5, 1.5}, 0}), ConfigError);
  EXPECT_THROW(apply_degradation(clean, {LowLightGamma{1.0, 0.5}, 0}), ConfigError);
  EXPECT_THROW(apply_degradation(clean, {LowLightGamma{2.0, 0.0}, 0}), ConfigError);
  EXPECT_THROW(apply_degradation(clean, {RainStreaks{-1, 0.0, 0.1}, 0}), ConfigError);
  EXPECT_THROW(apply_degradation(constant(8, 8, 1.5), {GaussianNoise{}, 0}), ConfigError);
}

TEST(Metrics, PsnrKnownValues) {
  EXPECT_NEAR(psnr(constant(8, 8, 0.5), constant(8, 8, 0.6)), 20.0, 1e-9);
  const auto x = test::random_grid(8, 8, 1);
  EXPECT_EQ(psnr(x, x), std::numeric_limits<double>::infinity());
  EXPECT_EQ(psnr_capped(psnr(x, x)), kPsnrCap);
  EXPECT_THROW(psnr(constant(8, 8, 0), constant(8, 9, 0)), DimensionError);
}

TEST(Metrics, SsimIdentityAndSymmetry) {
  const auto a = synthetic_scene(32, 32, 1);
  const auto b = apply_degradation(a, {GaussianNoise{}, 3});
  EXPECT_EQ(ssim(a, a), 1.0);
  EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-12);
  EXPECT_LT(ssim(a, b), 1.0);
}

TEST(Metrics, PsnrDecreasesWithNoiseLevel) {
  const auto clean = synthetic_scene(64, 64, 8);
  double prev = std::numeric_limits<double>::infinity();
  for (double s : {5.0, 15.0, 25.0, 50.0}) {
    const double p = psnr(apply_degradation(clean, {GaussianNoise{s / 255.0}, 21}), clean);
    EXPECT_LT(p, prev) << "sigma " << s;
    prev = p;
  }
}

TEST(SyntheticScene, RangeAndDeterminism) {
  const auto a = synthetic_scene(40, 30, 5);
  EXPECT_EQ(a.height(), 40u);
  EXPECT_EQ(a.width(), 30u);
  for (double v : a.values()) {
    EXPECT_GE(v, 0.05);
    EXPECT_LE(v, 0.95);
  }
  EXPECT_EQ(a, synthetic_scene(40, 30, 5));
  EXPECT_NE(a, synthetic_scene(40, 30, 6));
}

std::vector<FeatureGrid> scenes(std::size_t n) {
  std::vector<FeatureGrid> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(synthetic_scene(16, 16, 100 + i));
  return out;
}

TEST(Dataset, StratifiedValidationCounts) {
  const auto ds = build_dataset(scenes(10), {{GaussianNoise{}, 1}, {GaussianBlur{}, 2}},
                                SplitConfig{0.2, 0.0, 3});
  ASSERT_EQ(ds.pairs.size(), 20u);
  std::map<std::string, int> per_kind;
  for (auto i : ds.validation) ++per_kind[ds.pairs[i].kind];
  EXPECT_EQ(per_kind["noise"], 2);
  EXPECT_EQ(per_kind["blur"], 2);
  EXPECT_EQ(ds.train.size(), 16u);
}

TEST(Dataset, SplitsAreDisjointAndCover) {
  const auto ds = build_dataset(
      scenes(12), {{GaussianNoise{}, 1}, {HazeAttenuation{}, 2}, {RainStreaks{}, 3}},
      SplitConfig{0.25, 0.25, 9});
  std::set<std::size_t> seen;
  for (const auto* s : {&ds.train, &ds.validation, &ds.test})
    for (auto i : *s) EXPECT_TRUE(seen.insert(i).second) << "index " << i << " repeated";
  EXPECT_EQ(seen.size(), ds.pairs.size());
}

TEST(Dataset, IdenticalSeedsGiveIdenticalData) {
  const std::vector<DegradationSpec> specs = {{GaussianNoise{}, 5}, {RainStreaks{}, 6}};
  const auto a = build_dataset(scenes(5), specs, {});
  const auto b = build_dataset(scenes(5), specs, {});
  ASSERT_EQ(a.pairs.size(), b.pairs.size());
  for (std::size_t i = 0; i < a.pairs.size(); ++i)
    EXPECT_EQ(a.pairs[i].degraded.storage(), b.pairs[i].degraded.storage());
  EXPECT_EQ(a.validation, b.validation);
  EXPECT_EQ(a.train, b.train);
}

TEST(Dataset, InsufficientImagesIsConfigError) {
  EXPECT_THROW(build_dataset({}, {{GaussianNoise{}, 1}}, {}), ConfigError);
  EXPECT_THROW(build_dataset(scenes(3), {}, {}), ConfigError);
  EXPECT_THROW(build_dataset(scenes(1), {{GaussianNoise{}, 1}}, SplitConfig{0.5, 0.0, 0}),
               ConfigError);
  EXPECT_THROW(build_dataset(scenes(4), {{GaussianNoise{}, 1}}, SplitConfig{0.6, 0.5, 0}),
               ConfigError);
}

TEST(Dataset, StratifiedSubsetCapsPerKind) {
  const auto ds = build_dataset(scenes(10), {{GaussianNoise{}, 1}, {GaussianBlur{}, 2}},
                                SplitConfig{0.5, 0.0, 1});
  const auto sub = stratified_subset(ds, ds.validation, 3);
  std::map<std::string, int> per_kind;
  for (auto i : sub) ++per_kind[ds.pairs[i].kind];
  EXPECT_EQ(per_kind["noise"], 3);
  EXPECT_EQ(per_kind["blur"], 3);
}

TEST(Manifest, RoundTrip) {
  const std::vector<ManifestRow> rows = {{0, "noise", 17, "clean/0.fgrid", "noise/0.fgrid"},
                                         {1, "rain", 99, "clean/1.pgm", "rain/1.pgm"}};
  std::stringstream ss;
  write_manifest(ss, rows);
  EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')), kManifestHeader);
  const auto back = read_manifest(ss);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].kind, "rain");
  EXPECT_EQ(back[1].seed, 99u);
  EXPECT_EQ(back[1].degraded_path, "rain/1.pgm");
}

TEST(Manifest, RejectsMalformedInput) {
  std::stringstream no_header("0,noise,1,a,b\n");
  EXPECT_THROW(read_manifest(no_header), IoError);
  std::stringstream short_row(std::string(kManifestHeader) + "\n0,noise,1,a\n");
  EXPECT_THROW(read_manifest(short_row), IoError);
  std::stringstream bad_num(std::string(kManifestHeader) + "\nx,noise,1,a,b\n");
  EXPECT_THROW(read_manifest(bad_num), IoError);
}

TEST(Manifest, LoadDatasetFromDisk) {
  const auto dir = std::filesystem::temp_directory_path() / "fmr_manifest_test";
  std::filesystem::create_directories(dir);
  std::vector<ManifestRow> rows;
  for (std::size_t i = 0; i < 5; ++i) {
    const auto clean = synthetic_scene(16, 16, i);
    const auto deg = apply_degradation(clean, {GaussianNoise{}, i});
    io::save_fgrid(dir / ("c" + std::to_string(i) + ".fgrid"), clean);
    io::save_fgrid(dir / ("d" + std::to_string(i) + ".fgrid"), deg);
    rows.push_back({i, "noise", i, "c" + std::to_string(i) + ".fgrid",
                    "d" + std::to_string(i) + ".fgrid"});
  }
  {
    std::ofstream os(dir / "manifest.csv");
    write_manifest(os, rows);
  }
  const auto ds = load_dataset(dir / "manifest.csv", SplitConfig{0.2, 0.0, 0});
  ASSERT_EQ(ds.pairs.size(), 5u);
  EXPECT_EQ(ds.validation.size(), 1u);
  EXPECT_EQ(ds.pairs[3].clean, synthetic_scene(16, 16, 3));
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace fmr
