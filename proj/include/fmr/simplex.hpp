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

#include "fmr/error.hpp"

namespace fmr {

// Loss weights (alpha, beta) on the 2-simplex: alpha, beta >= 0, sum 1.
struct WeightPair {
  double alpha = 0.8;
  double beta = 0.2;

  static constexpr double kSumTolerance = 1e-12;

  bool on_simplex() const noexcept {
    return alpha >= 0.0 && beta >= 0.0 &&
           std::abs(alpha + beta - 1.0) <= kSumTolerance;
  }

  void require_on_simplex() const {
    if (!on_simplex()) {
      throw ConfigError(detail::concat("weights (", alpha, ", ", beta,
                                       ") are not on the simplex"));
    }
  }

  friend bool operator==(const WeightPair&, const WeightPair&) = default;
};

// Euclidean projection onto {alpha + beta = 1, alpha, beta >= 0}: move along
// the normal (1, 1) onto the line, then clamp to the nearer endpoint.
inline WeightPair project_simplex(double alpha, double beta) {
  if (!std::isfinite(alpha) || !std::isfinite(beta)) {
    throw NumericError("project_simplex: non-finite input");
  }
  const double shift = 0.5 * (1.0 - alpha - beta);
  double a = alpha + shift;
  double b = beta + shift;
  if (a < 0.0) return {0.0, 1.0};
  if (b < 0.0) return {1.0, 0.0};
  // Re-derive beta from alpha so the pair sums to exactly 1.
  a = std::min(a, 1.0);
  b = 1.0 - a;
  return {a, b};
}

}  // namespace fmr
