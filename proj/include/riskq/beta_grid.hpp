// Copyright 2026 The riskq Authors
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

#include <cmath>
#include <stdexcept>
#include <vector>

namespace riskq {

/// Finite set of ERM risk levels standing in for the EVaR supremum.
struct BetaGrid {
  std::vector<double> betas;
  double beta0 = 0.0;
  double delta = 0.0;
  double alpha = 0.0;

  std::size_t K() const noexcept { return betas.empty() ? 0 : betas.size() - 1; }
  double log_inv_alpha() const { return -std::log(alpha); }
  /// Upper target log(1/alpha) / delta the last level must reach.
  double upper_target() const { return log_inv_alpha() / delta; }
  /// theta = beta0 delta / log(1/alpha).
  double theta() const { return beta0 * delta / log_inv_alpha(); }
  /// log(theta) / log(1 - theta); only meaningful for theta < 1.
  double k_lower_bound() const {
    const double t = theta();
    return t < 1.0 ? std::log(t) / std::log1p(-t) : 0.0;
  }
  bool meets_k_bound() const { return static_cast<double>(K()) >= k_lower_bound(); }
};

/// beta_{k+1} = beta_k log(1/alpha) / (log(1/alpha) - beta_k delta), from
/// beta0 until a level reaches log(1/alpha) / delta (that level included).
///
/// In reciprocal form 1/beta_k = 1/beta0 - k delta / log(1/alpha): the
/// gaps in beta^-1 log(alpha) are exactly delta. A final level that lands
/// within 1e-12 (relative) below the target is snapped onto it, since the
/// next step of the recurrence would be numerically singular.
inline BetaGrid build_beta_grid(double beta0, double delta, double alpha) {
  if (!std::isfinite(beta0) || !std::isfinite(delta) || !std::isfinite(alpha)) {
    throw std::invalid_argument("build_beta_grid: non-finite input");
  }
  if (!(beta0 > 0.0)) throw std::invalid_argument("build_beta_grid: beta0 must be > 0");
  if (!(delta > 0.0)) throw std::invalid_argument("build_beta_grid: delta must be > 0");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("build_beta_grid: alpha must lie in (0,1)");
  BetaGrid grid{{beta0}, beta0, delta, alpha};
  const double L = grid.log_inv_alpha();
  const double target = grid.upper_target();
  constexpr double kSnap = 1e-12;
  while (grid.betas.back() < target * (1.0 - kSnap)) {
    const double b = grid.betas.back();
    const double next = b * L / (L - b * delta);
    if (!std::isfinite(next) || !(next > b)) throw std::logic_error("build_beta_grid: recurrence broke down");
    grid.betas.push_back(next);
  }
  if (grid.betas.back() < target) grid.betas.back() = target;
  return grid;
}

}  // namespace riskq
