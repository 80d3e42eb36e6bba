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
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fmr/csv.hpp"
#include "fmr/degrade.hpp"
#include "fmr/eos.hpp"
#include "fmr/error.hpp"
#include "fmr/fmm.hpp"
#include "fmr/losses.hpp"
#include "fmr/parallel.hpp"
#include "fmr/rng.hpp"
#include "fmr/simplex.hpp"

namespace fmr {

struct TrainConfig {
  long iterations = 1000;
  double learning_rate = 2e-4;
  std::optional<long> lr_halve_at;
  std::size_t batch_size = 4;
  WeightPair init_weights{0.8, 0.2};
  EosConfig eos;
  bool eos_enabled = true;
  long eval_every = 100;
  std::uint64_t seed = 0;
  // Checkpoint period in iterations; 0 writes only the final model.
  long checkpoint_every = 0;
  FmmOptions model;
  TrainableSet trainable;
  LossSettings loss;
  std::size_t workers = 1;

  void validate() const {
    if (iterations < 1) throw ConfigError("trainer.iterations must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
      throw ConfigError("trainer.learning_rate must be finite and > 0");
    if (lr_halve_at && (*lr_halve_at < 0 || *lr_halve_at >= iterations))
      throw ConfigError("trainer.lr_halve_at must lie in [0, iterations)");
    if (batch_size < 1) throw ConfigError("trainer.batch_size must be >= 1");
    init_weights.require_on_simplex();
    if (eval_every < 1) throw ConfigError("trainer.eval_every must be >= 1");
    if (checkpoint_every < 0) throw ConfigError("trainer.checkpoint_every must be >= 0");
    eos.validate();
  }

  double lr_at(long iteration) const {
    return lr_halve_at && iteration >= *lr_halve_at ? 0.5 * learning_rate : learning_rate;
  }
};

// Combined loss above this aborts training.
inline constexpr double kDivergenceThreshold = 1e6;

// ---------------------------------------------------------------------------
// Evaluation

struct MetricsRow {
  std::string kind;  // "all" for the aggregate row
  std::size_t count = 0;
  double psnr = 0.0;  // mean over uncapped images; kPsnrCap if all are capped
  std::size_t psnr_capped = 0;
  double ssim = 0.0;
  double fidelity = 0.0;
  double perceptual = 0.0;

  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

struct MetricsTable {
  std::vector<MetricsRow> rows;  // per kind in name order, then "all"

  const MetricsRow& aggregate() const { return rows.back(); }

  const MetricsRow& kind(const std::string& k) const {
    for (const auto& r : rows)
      if (r.kind == k) return r;
    throw ConfigError("no metrics for kind '" + k + "'");
  }

  friend bool operator==(const MetricsTable&, const MetricsTable&) = default;
};

struct ImageMetrics {
  double psnr = 0.0;
  double ssim = 0.0;
  LossTerms terms;
};

namespace detail {

struct MetricsAccumulator {
  std::size_t count = 0;
  std::size_t capped = 0;
  double psnr_sum = 0.0;
  double ssim_sum = 0.0;
  double fid_sum = 0.0;
  double perc_sum = 0.0;

  void add(const ImageMetrics& m) {
    ++count;
    if (m.psnr >= kPsnrCap) {
      ++capped;
    } else {
      psnr_sum += m.psnr;
    }
    ssim_sum += m.ssim;
    fid_sum += m.terms.fidelity;
    perc_sum += m.terms.perceptual;
  }

  MetricsRow row(std::string kind) const {
    const double n = static_cast<double>(count);
    MetricsRow r;
    r.kind = std::move(kind);
    r.count = count;
    r.psnr_capped = capped;
    r.psnr = capped == count ? kPsnrCap : psnr_sum / static_cast<double>(count - capped);
    r.ssim = ssim_sum / n;
    r.fidelity = fid_sum / n;
    r.perceptual = perc_sum / n;
    return r;
  }
};

}  // namespace detail

inline MetricsTable evaluate_indices(const FmmParams& model, const PairedDataset& ds,
                                     const std::vector<std::size_t>& indices,
                                     const LossSettings& settings = {},
                                     std::size_t workers = 1) {
  if (indices.empty()) throw ConfigError("evaluation split is empty");
  const auto per_image = parallel_map(indices.size(), workers, [&](std::size_t j) {
    const auto& pair = ds.pairs.at(indices[j]);
    const auto y = fmm_apply(pair.degraded, model);
    return ImageMetrics{psnr_capped(psnr(y, pair.clean)), ssim(y, pair.clean),
                        loss_terms(y, pair.clean, settings)};
  });
  std::map<std::string, detail::MetricsAccumulator> by_kind;
  detail::MetricsAccumulator all;
  for (std::size_t j = 0; j < indices.size(); ++j) {
    by_kind[ds.pairs[indices[j]].kind].add(per_image[j]);
    all.add(per_image[j]);
  }
  MetricsTable t;
  for (const auto& [k, acc] : by_kind) t.rows.push_back(acc.row(k));
  t.rows.push_back(all.row("all"));
  return t;
}

// Per-kind and aggregate PSNR / SSIM / loss terms of `model` on one split.
inline MetricsTable evaluate(const FmmParams& model, const PairedDataset& ds, Split split,
                             const LossSettings& settings = {}, std::size_t workers = 1) {
  return evaluate_indices(model, ds, ds.indices(split), settings, workers);
}

inline constexpr const char* kMetricsHeader =
    "kind,count,psnr,psnr_capped,ssim,loss_fid,loss_perc";

inline void write_metrics_csv(std::ostream& os, const MetricsTable& t) {
  os << kMetricsHeader << '\n';
  for (const auto& r : t.rows)
    os << r.kind << ',' << r.count << ',' << format_number(r.psnr) << ',' << r.psnr_capped
       << ',' << format_number(r.ssim) << ',' << format_number(r.fidelity) << ','
       << format_number(r.perceptual) << '\n';
}

// ---------------------------------------------------------------------------
// Training

struct IterationRecord {
  long iteration = 0;
  LossValue loss;  // batch means under the active weights
  double lr = 0.0;
};

struct EvalRecord {
  long iteration = 0;  // iterations completed
  double psnr = 0.0;
  double ssim = 0.0;
  double fidelity = 0.0;
  double perceptual = 0.0;
  WeightPair active;

  double combined(const WeightPair& w) const {
    return w.alpha * fidelity + w.beta * perceptual;
  }
};

struct TrainTrace {
  std::vector<IterationRecord> iterations;
  std::vector<EvalRecord> evals;
  // (first iteration, weights) at the start and at every trigger.
  std::vector<std::pair<long, WeightPair>> weight_timeline;
  std::vector<EosTrace> eos;
  // Wall time of each trigger as seen by the training loop.
  std::vector<double> eos_wall_ms;
  double train_ms = 0.0;
  double eos_ms = 0.0;
};

struct TrainResult {
  FmmParams model;
  TrainTrace trace;
};

struct TrainHooks {
  std::function<void(long iterations_done, const FmmParams&)> on_checkpoint;
};

struct BatchStep {
  LossValue loss;
  FmmGrads grads;
};

// Mean combined loss and parameter gradient over a batch.
inline BatchStep batch_gradient(const FmmParams& p, const PairedDataset& ds,
                                const std::vector<std::size_t>& batch, const WeightPair& w,
                                const LossSettings& settings, std::size_t workers = 1) {
  struct PerImage {
    LossValue loss;
    FmmGrads grads;
  };
  const auto parts = parallel_map(batch.size(), workers, [&](std::size_t j) {
    const auto& pair = ds.pairs.at(batch[j]);
    const auto act = fmm_forward(pair.degraded, p);
    auto cl = combined_loss(act.y_hat, pair.clean, w, settings);
    return PerImage{cl.value, fmm_backward(act, p, cl.grad)};
  });
  BatchStep out;
  out.grads = FmmGrads::zeros_like(p);
  for (const auto& part : parts) {
    out.grads += part.grads;
    out.loss.fidelity += part.loss.fidelity;
    out.loss.perceptual += part.loss.perceptual;
    out.loss.combined += part.loss.combined;
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  out.grads *= inv;
  out.loss.fidelity *= inv;
  out.loss.perceptual *= inv;
  out.loss.combined *= inv;
  out.loss.alpha = w.alpha;
  out.loss.beta = w.beta;
  return out;
}

namespace detail {

// Draws batches from seeded epoch permutations of the train split. Each
// batch is sorted so a batch covering the whole split is always the same
// sequence.
class BatchSampler {
 public:
  BatchSampler(std::vector<std::size_t> pool, std::size_t batch, std::uint64_t seed)
      : pool_(std::move(pool)), batch_(std::min(batch, pool_.size())), rng_(seed) {}

  std::vector<std::size_t> next() {
    std::vector<std::size_t> out;
    while (out.size() < batch_) {
      if (pos_ == order_.size()) {
        order_ = pool_;
        rng_.shuffle(order_);
        pos_ = 0;
      }
      out.push_back(order_[pos_++]);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  std::vector<std::size_t> pool_;
  std::size_t batch_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

}  // namespace detail

// Gradient descent under the active weights. Before iteration i (i > 0,
// i % T == 0) the parameters are frozen for a population search and the
// winner becomes the active weights for the next T iterations.
inline TrainResult train(const PairedDataset& ds, const TrainConfig& cfg, FmmParams model,
                         const TrainHooks& hooks = {}) {
  cfg.validate();
  if (ds.train.empty()) throw ConfigError("training split is empty");
  if (ds.validation.empty()) throw ConfigError("validation split is empty");
  model.validate();
  const auto t_start = detail::Clock::now();

  TrainResult res;
  auto& trace = res.trace;
  WeightPair active = cfg.init_weights;
  trace.weight_timeline.push_back({0, active});

  const auto eos_subset = stratified_subset(ds, ds.validation, cfg.eos.subset_per_kind);
  const ValidationSet eos_val = make_validation_set(ds, eos_subset);
  detail::BatchSampler sampler(ds.train, cfg.batch_size, mix_seed(cfg.seed, 1));

  for (long i = 0; i < cfg.iterations; ++i) {
    if (cfg.eos_enabled && i > 0 && i % cfg.eos.trigger_interval == 0) {
      const auto t_eos = detail::Clock::now();
      EosConfig ec = cfg.eos;
      ec.workers = cfg.workers;
      const long r = static_cast<long>(trace.eos.size());
      ec.seed = mix_seed(cfg.eos.seed ^ cfg.seed, static_cast<std::uint64_t>(r));
      const auto eos = run_eos(model, eos_val, ec, {active}, r, cfg.loss);
      active = eos.winner;
      trace.eos.push_back(eos.trace);
      trace.weight_timeline.push_back({i, active});
      trace.eos_wall_ms.push_back(detail::ms_since(t_eos));
      trace.eos_ms += trace.eos_wall_ms.back();
    }

    const double lr = cfg.lr_at(i);
    BatchStep step;
    try {
      step = batch_gradient(model, ds, sampler.next(), active, cfg.loss, cfg.workers);
    } catch (const NumericError& e) {
      throw DivergenceError(detail::concat("training diverged at iteration ", i, ": ", e.what()),
                            i);
    }
    if (!std::isfinite(step.loss.combined) || step.loss.combined > kDivergenceThreshold) {
      throw DivergenceError(detail::concat("training diverged at iteration ", i,
                                           ": combined loss ", step.loss.combined),
                            i);
    }
    trace.iterations.push_back({i, step.loss, lr});
    descend(model, step.grads, lr, cfg.trainable);

    const long done = i + 1;
    if (done % cfg.eval_every == 0 || done == cfg.iterations) {
      const auto m = evaluate(model, ds, Split::Validation, cfg.loss, cfg.workers).aggregate();
      trace.evals.push_back({done, m.psnr, m.ssim, m.fidelity, m.perceptual, active});
    }
    if (hooks.on_checkpoint &&
        ((cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0) ||
         done == cfg.iterations)) {
      hooks.on_checkpoint(done, model);
    }
  }
  res.model = std::move(model);
  trace.train_ms = detail::ms_since(t_start);
  return res;
}

// Starts from make_fmm_params(cfg.model) sized to the first training image.
inline TrainResult train(const PairedDataset& ds, const TrainConfig& cfg,
                         const TrainHooks& hooks = {}) {
  if (ds.train.empty()) throw ConfigError("training split is empty");
  const auto& first = ds.pairs.at(ds.train.front()).degraded;
  return train(ds, cfg, make_fmm_params(first.height(), first.width(), cfg.model), hooks);
}

inline constexpr const char* kTrainTraceHeader =
    "iteration,loss_fid,loss_perc,loss_combined,alpha,beta,lr";
inline constexpr const char* kEvalTraceHeader =
    "iteration,val_psnr,val_ssim,val_loss_fid,val_loss_perc,alpha,beta";

inline void write_train_csv(std::ostream& os, const TrainTrace& t) {
  os << kTrainTraceHeader << '\n';
  for (const auto& r : t.iterations)
    os << r.iteration << ',' << format_number(r.loss.fidelity) << ','
       << format_number(r.loss.perceptual) << ',' << format_number(r.loss.combined) << ','
       << format_number(r.loss.alpha) << ',' << format_number(r.loss.beta) << ','
       << format_number(r.lr) << '\n';
}

inline void write_eval_csv(std::ostream& os, const TrainTrace& t) {
  os << kEvalTraceHeader << '\n';
  for (const auto& e : t.evals)
    os << e.iteration << ',' << format_number(e.psnr) << ',' << format_number(e.ssim) << ','
       << format_number(e.fidelity) << ',' << format_number(e.perceptual) << ','
       << format_number(e.active.alpha) << ',' << format_number(e.active.beta) << '\n';
}

}  // namespace fmr
