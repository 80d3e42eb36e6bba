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
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <ostream>
#include <vector>

#include "fmr/csv.hpp"
#include "fmr/degrade.hpp"
#include "fmr/error.hpp"
#include "fmr/fmm.hpp"
#include "fmr/losses.hpp"
#include "fmr/parallel.hpp"
#include "fmr/rng.hpp"
#include "fmr/simplex.hpp"

// Population search over loss weights on the simplex. Candidates are scored
// on a fixed validation set with the model frozen; the top-k survive each
// generation and the rest are refilled by convex crossover of two elites,
// Gaussian mutation and projection back onto the simplex.

namespace fmr {

struct EosConfig {
  std::size_t population = 5;
  std::size_t generations = 3;
  std::size_t elites = 2;
  double mutation_sigma = 0.05;
  long trigger_interval = 500;
  std::uint64_t seed = 0;
  // Fixes the crossover weight instead of drawing it from U(0, 1).
  std::optional<double> crossover_lambda;
  // Validation images per degradation kind used for fitness.
  std::size_t subset_per_kind = 8;
  std::size_t workers = 1;

  void validate() const {
    if (population < 1) throw ConfigError("eos.population must be >= 1");
    if (generations < 1) throw ConfigError("eos.generations must be >= 1");
    if (elites < 1 || elites > population)
      throw ConfigError("eos.elites must satisfy 1 <= k <= population");
    if (!(mutation_sigma >= 0.0) || !std::isfinite(mutation_sigma))
      throw ConfigError("eos.mutation_sigma must be finite and >= 0");
    if (trigger_interval < 1) throw ConfigError("eos.trigger_interval must be >= 1");
    if (crossover_lambda && !(*crossover_lambda >= 0.0 && *crossover_lambda <= 1.0))
      throw ConfigError("eos.crossover_lambda must lie in [0, 1]");
    if (subset_per_kind < 1) throw ConfigError("eos.subset_per_kind must be >= 1");
  }
};

// Restoration inputs and targets for fitness evaluation.
struct ValidationSet {
  std::vector<FeatureGrid> inputs;
  std::vector<FeatureGrid> targets;

  std::size_t size() const noexcept { return inputs.size(); }
};

inline ValidationSet make_validation_set(const PairedDataset& ds,
                                         const std::vector<std::size_t>& indices) {
  ValidationSet v;
  for (std::size_t i : indices) {
    v.inputs.push_back(ds.pairs.at(i).degraded);
    v.targets.push_back(ds.pairs.at(i).clean);
  }
  return v;
}

// Per-image loss terms of the frozen model. The model does not change while
// candidates are scored, so restorations are computed once and each
// candidate costs two multiply-adds.
class FrozenValidation {
 public:
  FrozenValidation(const FmmParams& model, const ValidationSet& val,
                   const LossSettings& settings = {}, std::size_t workers = 1) {
    if (val.size() == 0) throw ConfigError("validation set is empty");
    if (val.targets.size() != val.size())
      throw DimensionError("validation inputs and targets differ in count");
    terms_ = parallel_map(val.size(), workers, [&](std::size_t i) {
      return loss_terms(fmm_apply(val.inputs[i], model), val.targets[i], settings);
    });
    init_means();
  }

  // From precomputed terms.
  explicit FrozenValidation(std::vector<LossTerms> terms) : terms_(std::move(terms)) {
    if (terms_.empty()) throw ConfigError("validation set is empty");
    init_means();
  }

  // -(alpha * mean fidelity + beta * mean perceptual).
  double fitness(const WeightPair& w) const {
    w.require_on_simplex();
    return -(w.alpha * mean_fid_ + w.beta * mean_perc_);
  }

  const std::vector<LossTerms>& terms() const noexcept { return terms_; }
  double mean_fidelity() const noexcept { return mean_fid_; }
  double mean_perceptual() const noexcept { return mean_perc_; }

 private:
  void init_means() {
    double f = 0.0;
    double p = 0.0;
    for (const auto& t : terms_) {
      f += t.fidelity;
      p += t.perceptual;
    }
    mean_fid_ = f / static_cast<double>(terms_.size());
    mean_perc_ = p / static_cast<double>(terms_.size());
  }

  std::vector<LossTerms> terms_;
  double mean_fid_ = 0.0;
  double mean_perc_ = 0.0;
};

// Fitness of one candidate recomputed from scratch.
inline double evaluate_fitness(const WeightPair& candidate, const FmmParams& frozen_model,
                               const ValidationSet& val, const LossSettings& settings = {}) {
  return FrozenValidation(frozen_model, val, settings).fitness(candidate);
}

struct EosCandidate {
  std::size_t generation = 0;
  std::size_t index = 0;
  WeightPair weights;
  double fitness = 0.0;
  bool is_elite = false;
  bool is_winner = false;
};

struct EosTrace {
  long trigger_index = 0;
  std::vector<double> best_fitness;  // one entry per generation
  WeightPair winner;
  double eval_ms = 0.0;
  double total_ms = 0.0;
  std::size_t evaluations = 0;
  std::vector<EosCandidate> candidates;

  bool best_fitness_non_decreasing() const {
    return std::is_sorted(best_fitness.begin(), best_fitness.end());
  }
};

struct EosResult {
  WeightPair winner;
  EosTrace trace;
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

// Candidate order by fitness, best first; stable so ties keep the lower index.
inline std::vector<std::size_t> rank_by_fitness(const std::vector<double>& f) {
  std::vector<std::size_t> order(f.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return f[a] > f[b]; });
  return order;
}

}  // namespace detail

using FitnessFn = std::function<double(const WeightPair&)>;

// Search driver. `init` may hold up to P candidates on the simplex; missing
// slots are filled with uniform random simplex points. Each of the G
// generations scores the whole population; between generations the top-k
// are kept and the remaining slots are bred from them. The winner is the
// best candidate of the last scored generation.
//
// `setup_ms` is charged to evaluation time (e.g. building a frozen cache).
inline EosResult run_eos_search(const FitnessFn& fitness, const EosConfig& cfg,
                                const std::vector<WeightPair>& init, long trigger_index = 0,
                                double setup_ms = 0.0) {
  const auto t0 = detail::Clock::now();
  cfg.validate();
  if (init.size() > cfg.population) {
    throw ConfigError(detail::concat("eos init has ", init.size(),
                                     " candidates, population is ", cfg.population));
  }
  for (const auto& w : init) w.require_on_simplex();

  Rng rng(cfg.seed);
  std::vector<WeightPair> pop = init;
  while (pop.size() < cfg.population) {
    const double a = rng.uniform();
    pop.push_back({a, 1.0 - a});
  }

  EosResult res;
  res.trace.trigger_index = trigger_index;
  double eval_ms = setup_ms;
  std::vector<double> fit(cfg.population);
  for (std::size_t g = 0; g < cfg.generations; ++g) {
    const auto te = detail::Clock::now();
    for (std::size_t i = 0; i < pop.size(); ++i) fit[i] = fitness(pop[i]);
    eval_ms += detail::ms_since(te);
    res.trace.evaluations += pop.size();

    const auto order = detail::rank_by_fitness(fit);
    res.trace.best_fitness.push_back(fit[order[0]]);
    const std::size_t first = res.trace.candidates.size();
    for (std::size_t i = 0; i < pop.size(); ++i)
      res.trace.candidates.push_back({g, i, pop[i], fit[i], false, false});
    for (std::size_t e = 0; e < cfg.elites; ++e)
      res.trace.candidates[first + order[e]].is_elite = true;

    if (g + 1 == cfg.generations) {
      res.winner = pop[order[0]];
      res.trace.candidates[first + order[0]].is_winner = true;
      break;
    }

    std::vector<WeightPair> next;
    next.reserve(cfg.population);
    for (std::size_t e = 0; e < cfg.elites; ++e) next.push_back(pop[order[e]]);
    while (next.size() < cfg.population) {
      const WeightPair& pa = next[rng.index(cfg.elites)];
      const WeightPair& pb = next[rng.index(cfg.elites)];
      const double lambda = cfg.crossover_lambda ? *cfg.crossover_lambda : rng.uniform();
      double a = lambda * pa.alpha + (1.0 - lambda) * pb.alpha;
      double b = lambda * pa.beta + (1.0 - lambda) * pb.beta;
      a += cfg.mutation_sigma * rng.normal();
      b += cfg.mutation_sigma * rng.normal();
      next.push_back(project_simplex(a, b));
    }
    pop = std::move(next);
  }
  res.trace.winner = res.winner;
  res.trace.eval_ms = eval_ms;
  res.trace.total_ms = setup_ms + detail::ms_since(t0);
  return res;
}

inline EosResult run_eos(const FrozenValidation& frozen, const EosConfig& cfg,
                         const std::vector<WeightPair>& init, long trigger_index = 0,
                         double setup_ms = 0.0) {
  return run_eos_search([&](const WeightPair& w) { return frozen.fitness(w); }, cfg, init,
                        trigger_index, setup_ms);
}

// Scores candidates with `frozen_model` on `val`. The model is only read.
inline EosResult run_eos(const FmmParams& frozen_model, const ValidationSet& val,
                         const EosConfig& cfg, const std::vector<WeightPair>& init,
                         long trigger_index = 0, const LossSettings& settings = {}) {
  cfg.validate();
  const auto t0 = detail::Clock::now();
  const FrozenValidation frozen(frozen_model, val, settings, cfg.workers);
  return run_eos(frozen, cfg, init, trigger_index, detail::ms_since(t0));
}

// ---------------------------------------------------------------------------
// Overhead accounting

struct OverheadReport {
  std::size_t triggers = 0;
  std::size_t evaluations = 0;
  double eos_total_ms = 0.0;
  double eval_ms = 0.0;
  double residual_ms = 0.0;  // total - eval
  double epoch_ms = 0.0;
  double percent_of_epoch = 0.0;
};

inline OverheadReport eos_overhead_report(const std::vector<EosTrace>& traces,
                                          double epoch_wall_ms) {
  OverheadReport r;
  r.epoch_ms = epoch_wall_ms;
  for (const auto& t : traces) {
    ++r.triggers;
    r.evaluations += t.evaluations;
    r.eos_total_ms += t.total_ms;
    r.eval_ms += t.eval_ms;
  }
  r.residual_ms = r.eos_total_ms - r.eval_ms;
  r.percent_of_epoch = epoch_wall_ms > 0.0 ? 100.0 * r.eos_total_ms / epoch_wall_ms : 0.0;
  return r;
}

// ---------------------------------------------------------------------------
// CSV output

inline constexpr const char* kEosTraceHeader =
    "trigger,generation,candidate,alpha,beta,fitness,is_elite,is_winner";
inline constexpr const char* kEosSummaryHeader =
    "trigger,winner_alpha,winner_beta,eval_ms,total_ms,evaluations";
inline constexpr const char* kOverheadHeader =
    "triggers,evaluations,eos_total_ms,eval_ms,residual_ms,epoch_ms,percent_of_epoch";

inline void write_eos_trace_csv(std::ostream& os, const std::vector<EosTrace>& traces,
                                bool header = true) {
  if (header) os << kEosTraceHeader << '\n';
  for (const auto& t : traces)
    for (const auto& c : t.candidates)
      os << t.trigger_index << ',' << c.generation << ',' << c.index << ','
         << format_number(c.weights.alpha) << ',' << format_number(c.weights.beta) << ','
         << format_number(c.fitness) << ',' << (c.is_elite ? 1 : 0) << ','
         << (c.is_winner ? 1 : 0) << '\n';
}

inline void write_eos_summary_csv(std::ostream& os, const std::vector<EosTrace>& traces,
                                  bool header = true) {
  if (header) os << kEosSummaryHeader << '\n';
  for (const auto& t : traces)
    os << t.trigger_index << ',' << format_number(t.winner.alpha) << ','
       << format_number(t.winner.beta) << ',' << format_number(t.eval_ms) << ','
       << format_number(t.total_ms) << ',' << t.evaluations << '\n';
}

inline void write_overhead_csv(std::ostream& os, const OverheadReport& r, bool header = true) {
  if (header) os << kOverheadHeader << '\n';
  os << r.triggers << ',' << r.evaluations << ',' << format_number(r.eos_total_ms) << ','
     << format_number(r.eval_ms) << ',' << format_number(r.residual_ms) << ','
     << format_number(r.epoch_ms) << ',' << format_number(r.percent_of_epoch) << '\n';
}

}  // namespace fmr
