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

#include <sstream>

#include "fmr/fmm_io.hpp"
#include "fmr/trainer.hpp"

namespace fmr {
namespace {

LossSettings single_scale() {
  LossSettings s;
  MsSsimConfig c;
  c.scales = 1;
  s.ms_ssim = c;
  return s;
}

PairedDataset small_dataset(std::size_t n = 10, std::uint64_t seed = 1) {
  std::vector<FeatureGrid> src;
  for (std::size_t i = 0; i < n; ++i) src.push_back(synthetic_scene(16, 16, seed * 100 + i));
  return build_dataset(src, {{GaussianNoise{}, seed}, {GaussianBlur{1.0}, seed + 1}},
                       SplitConfig{0.2, 0.0, seed});
}

TrainConfig small_config() {
  TrainConfig c;
  c.iterations = 12;
  c.learning_rate = 0.5;
  c.batch_size = 4;
  c.eval_every = 4;
  c.eos.trigger_interval = 5;
  c.eos.subset_per_kind = 2;
  c.model.kernel_size = 3;
  c.loss = single_scale();
  return c;
}

std::string csv_of(const TrainTrace& t) {
  std::ostringstream os;
  write_train_csv(os, t);
  write_eval_csv(os, t);
  write_eos_trace_csv(os, t.eos);
  return os.str();
}

std::string bytes_of(const FmmParams& p) {
  std::ostringstream os;
  io::write_fmmp(os, p);
  return os.str();
}

TEST(Train, LongTriggerIntervalMeansNoSearch) {
  auto cfg = small_config();
  cfg.eos.trigger_interval = 1000000;
  const auto r = train(small_dataset(), cfg);
  EXPECT_TRUE(r.trace.eos.empty());
  ASSERT_EQ(r.trace.weight_timeline.size(), 1u);
  for (const auto& it : r.trace.iterations) {
    EXPECT_EQ(it.loss.alpha, 0.8);
    EXPECT_EQ(it.loss.beta, 0.2);
  }
}

TEST(Train, TriggersEveryIntervalAndWeightsChangeOnlyThere) {
  auto cfg = small_config();
  cfg.eos.trigger_interval = 3;
  cfg.iterations = 10;
  const auto r = train(small_dataset(), cfg);
  ASSERT_EQ(r.trace.eos.size(), 3u);  // before iterations 3, 6, 9
  ASSERT_EQ(r.trace.weight_timeline.size(), 4u);
  ASSERT_EQ(r.trace.eos_wall_ms.size(), 3u);
  EXPECT_EQ(r.trace.weight_timeline[1].first, 3);
  EXPECT_EQ(r.trace.weight_timeline[3].first, 9);
  for (std::size_t t = 0; t < r.trace.eos.size(); ++t) {
    EXPECT_EQ(r.trace.eos[t].trigger_index, static_cast<long>(t));
    EXPECT_EQ(r.trace.eos[t].evaluations, 15u);
    EXPECT_TRUE(r.trace.eos[t].best_fitness_non_decreasing());
    EXPECT_EQ(r.trace.eos[t].winner, r.trace.weight_timeline[t + 1].second);
    EXPECT_GE(r.trace.eos_wall_ms[t], r.trace.eos[t].total_ms);
  }
  EXPECT_LE(r.trace.eos_ms, r.trace.train_ms);
  for (std::size_t k = 1; k < r.trace.iterations.size(); ++k) {
    const auto& prev = r.trace.iterations[k - 1].loss;
    const auto& cur = r.trace.iterations[k].loss;
    const WeightPair wp{prev.alpha, prev.beta};
    const WeightPair wc{cur.alpha, cur.beta};
    EXPECT_TRUE(wc.on_simplex());
    if (k % 3 != 0) {
      EXPECT_EQ(wp, wc) << "weights changed inside a stage at " << k;
    }
  }
}

TEST(Train, SearchWarmStartsFromActiveWeights) {
  auto cfg = small_config();
  cfg.eos.trigger_interval = 4;
  const auto r = train(small_dataset(), cfg);
  ASSERT_GE(r.trace.eos.size(), 2u);
  EXPECT_EQ(r.trace.eos[0].candidates[0].weights, (WeightPair{0.8, 0.2}));
  EXPECT_EQ(r.trace.eos[1].candidates[0].weights, r.trace.eos[0].winner);
}

TEST(Train, ReproducibleWithSameSeed) {
  const auto ds = small_dataset();
  const auto a = train(ds, small_config());
  const auto b = train(ds, small_config());
  EXPECT_EQ(bytes_of(a.model), bytes_of(b.model));
  EXPECT_EQ(csv_of(a.trace), csv_of(b.trace));
  auto other = small_config();
  other.seed = 1;
  EXPECT_NE(csv_of(train(ds, other).trace), csv_of(a.trace));
}

TEST(Train, WorkerCountDoesNotChangeResults) {
  const auto ds = small_dataset();
  auto many = small_config();
  many.workers = 3;
  const auto a = train(ds, small_config());
  const auto b = train(ds, many);
  EXPECT_EQ(bytes_of(a.model), bytes_of(b.model));
  EXPECT_EQ(csv_of(a.trace), csv_of(b.trace));
}

TEST(Train, FullBatchDescentIsMonotone) {
  const auto ds = small_dataset(5);
  auto cfg = small_config();
  cfg.eos_enabled = false;
  cfg.iterations = 50;
  cfg.learning_rate = 1e-5;
  cfg.batch_size = ds.train.size();
  const auto r = train(ds, cfg);
  for (std::size_t k = 1; k < r.trace.iterations.size(); ++k)
    EXPECT_LE(r.trace.iterations[k].loss.combined, r.trace.iterations[k - 1].loss.combined)
        << "iteration " << k;
}

TEST(Train, LossDecreasesWithReasonableStep) {
  const auto ds = small_dataset(5);
  auto cfg = small_config();
  cfg.eos_enabled = false;
  cfg.iterations = 30;
  cfg.batch_size = ds.train.size();
  const auto r = train(ds, cfg);
  EXPECT_LT(r.trace.iterations.back().loss.combined, r.trace.iterations.front().loss.combined);
}

TEST(Train, LearningRateHalves) {
  auto cfg = small_config();
  cfg.lr_halve_at = 6;
  const auto r = train(small_dataset(), cfg);
  EXPECT_EQ(r.trace.iterations[5].lr, 0.5);
  EXPECT_EQ(r.trace.iterations[6].lr, 0.25);
  EXPECT_EQ(r.trace.iterations.back().lr, 0.25);
}

TEST(Train, DivergenceNamesIteration) {
  auto cfg = small_config();
  cfg.learning_rate = 1e12;
  cfg.eos_enabled = false;
  try {
    train(small_dataset(), cfg);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_GE(e.iteration(), 1);
    EXPECT_NE(std::string(e.what()).find("iteration"), std::string::npos);
  }
}

TEST(Train, EvalAndCheckpointSchedule) {
  auto cfg = small_config();
  cfg.iterations = 10;
  cfg.checkpoint_every = 4;
  std::vector<long> saved;
  TrainHooks hooks;
  hooks.on_checkpoint = [&](long done, const FmmParams&) { saved.push_back(done); };
  const auto r = train(small_dataset(), cfg, hooks);
  EXPECT_EQ(saved, (std::vector<long>{4, 8, 10}));
  ASSERT_EQ(r.trace.evals.size(), 3u);
  EXPECT_EQ(r.trace.evals[0].iteration, 4);
  EXPECT_EQ(r.trace.evals[2].iteration, 10);
}

TEST(Train, ConfigValidation) {
  const auto ds = small_dataset();
  auto bad = [&](auto mutate) {
    auto c = small_config();
    mutate(c);
    EXPECT_THROW(train(ds, c), ConfigError);
  };
  bad([](TrainConfig& c) { c.iterations = 0; });
  bad([](TrainConfig& c) { c.learning_rate = 0.0; });
  bad([](TrainConfig& c) { c.lr_halve_at = 12; });
  bad([](TrainConfig& c) { c.batch_size = 0; });
  bad([](TrainConfig& c) { c.init_weights = {0.5, 0.6}; });
  bad([](TrainConfig& c) { c.eval_every = 0; });
  bad([](TrainConfig& c) { c.eos.elites = 9; });
  PairedDataset empty_val = ds;
  empty_val.validation.clear();
  EXPECT_THROW(train(empty_val, small_config()), ConfigError);
}

TEST(Train, CsvSchema) {
  const auto r = train(small_dataset(), small_config());
  std::ostringstream os;
  write_train_csv(os, r.trace);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "iteration,loss_fid,loss_perc,loss_combined,alpha,beta,lr");
  std::getline(in, line);
  EXPECT_EQ(line.rfind("0,", 0), 0u);
  EXPECT_EQ(std::count(line.begin(), line.end(), ','), 6);
}

// ----------------------------------------------------------------- evaluate

FmmParams identity_model(std::size_t h, std::size_t w) {
  FmmOptions opt;
  opt.kernel_size = 1;
  opt.spectral_logit = 40.0;
  opt.spatial_logit = 40.0;
  return make_fmm_params(h, w, opt);
}

TEST(Evaluate, IdentityOnCleanPairs) {
  PairedDataset ds;
  for (std::uint64_t i = 0; i < 3; ++i) {
    const auto c = synthetic_scene(16, 16, i);
    ds.pairs.push_back({c, c, "noise", i, i});
  }
  const auto t = evaluate(identity_model(16, 16), ds, Split::All, single_scale());
  const auto& all = t.aggregate();
  EXPECT_EQ(all.kind, "all");
  EXPECT_EQ(all.count, 3u);
  EXPECT_EQ(all.psnr, kPsnrCap);
  EXPECT_EQ(all.psnr_capped, 3u);
  EXPECT_EQ(all.ssim, 1.0);
  EXPECT_EQ(t, evaluate(identity_model(16, 16), ds, Split::All, single_scale()));
}

TEST(Evaluate, AggregateIsMeanOfUncappedPsnr) {
  PairedDataset ds;
  const auto a = synthetic_scene(16, 16, 1);
  const auto b = synthetic_scene(16, 16, 2);
  ds.pairs.push_back({a, a, "x", 0, 0});
  ds.pairs.push_back({a, apply_degradation(a, {GaussianNoise{0.05}, 1}), "x", 1, 0});
  ds.pairs.push_back({b, apply_degradation(b, {GaussianNoise{0.1}, 2}), "y", 2, 1});
  const auto model = identity_model(16, 16);
  const auto t = evaluate(model, ds, Split::All, single_scale());
  const double p1 = psnr(ds.pairs[1].degraded, ds.pairs[1].clean);
  const double p2 = psnr(ds.pairs[2].degraded, ds.pairs[2].clean);
  EXPECT_NEAR(t.aggregate().psnr, 0.5 * (p1 + p2), 1e-9);
  EXPECT_EQ(t.aggregate().psnr_capped, 1u);
  EXPECT_NEAR(t.kind("x").psnr, p1, 1e-9);
  EXPECT_NEAR(t.kind("y").psnr, p2, 1e-9);
  EXPECT_THROW(evaluate(model, ds, Split::Test), ConfigError);
}

TEST(Evaluate, MetricsCsv) {
  PairedDataset ds;
  const auto c = synthetic_scene(16, 16, 0);
  ds.pairs.push_back({c, c, "noise", 0, 0});
  std::ostringstream os;
  write_metrics_csv(os, evaluate(identity_model(16, 16), ds, Split::All, single_scale()));
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "kind,count,psnr,psnr_capped,ssim,loss_fid,loss_perc");
  std::getline(in, line);
  EXPECT_EQ(line.rfind("noise,1,99,1,", 0), 0u) << line;
  std::getline(in, line);
  EXPECT_EQ(line.rfind("all,1,99,1,", 0), 0u) << line;
  EXPECT_FALSE(std::getline(in, line));
}

}  // namespace
}  // namespace fmr
