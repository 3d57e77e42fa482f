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

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "riskq/mdp.hpp"
#include "riskq/qfunction.hpp"
#include "riskq/qlearn.hpp"
#include "riskq/sampler.hpp"

namespace riskq {

/// Near-zero risk level at which the bound heuristic runs Q-learning.
inline constexpr double kNeutralBeta = 1e-10;

/// What the return extremes x_min / x_max are taken over.
enum class ReturnRangeMode {
  /// Completed per-episode returns observed in the stream.
  PerEpisode,
  /// Cumulative reward collected by each (s, a) pair over the stream.
  PerPairCumulative,
};

struct ZBoundEstimate {
  /// max_{s,a} of the near-risk-neutral Q-learning estimate.
  double c = 0.0;
  /// (x_max - x_min)^2 / 8.
  double d = 0.0;
  double x_min = 0.0;
  double x_max = 0.0;
};

/// Thrown by beta_zero when all observed returns coincide.
class DegenerateReturnRange : public std::invalid_argument {
 public:
  DegenerateReturnRange()
      : std::invalid_argument(
            "beta_zero: x_max == x_min, every observed return is identical, so any beta0 meets the precision; "
            "pass an explicit beta0") {}
};

/// Heuristic estimate of the constants behind the z-bounds: Q-learning at
/// beta = 1e-10 for c, and the observed range of returns for d.
///
/// The step at the neutral level is normalized by beta, so it is ordinary
/// TD learning up to O(beta) terms.
inline ZBoundEstimate estimate_cd(const Mdp& mdp, std::span<const TransitionSample> stream,
                                  const StepSchedule& schedule,
                                  ReturnRangeMode mode = ReturnRangeMode::PerEpisode) {
  if (stream.empty()) throw std::invalid_argument("estimate_cd: empty sample stream");
  schedule.validate();
  QFunction q(mdp);
  std::vector<std::uint64_t> visits(mdp.n_states() * mdp.n_actions(), 0);
  std::vector<double> pair_sum(mdp.n_states() * mdp.n_actions(), 0.0);

  double lo = INFINITY;
  double hi = -INFINITY;
  bool open = false;
  std::uint64_t episode = 0;
  double running = 0.0;
  auto close = [&] {
    lo = std::min(lo, running);
    hi = std::max(hi, running);
    open = false;
    running = 0.0;
  };

  for (const auto& x : stream) {
    const double r = mdp.observed_reward(x.s, x.a, x.s_next);
    const double v_next = mdp.is_sink(x.s_next) ? 0.0 : q.state_value(x.s_next);
    const double z = r + v_next - q(x.s, x.a);
    const std::uint64_t n = ++visits[x.s * mdp.n_actions() + x.a];
    q(x.s, x.a) -= eta(schedule, n) / kNeutralBeta * std::expm1(-kNeutralBeta * z);
    pair_sum[x.s * mdp.n_actions() + x.a] += r;

    if (open && x.episode != episode) {
      // Episode cut short by the step cap: its partial sum is discarded.
      open = false;
      running = 0.0;
    }
    if (!open) {
      open = true;
      episode = x.episode;
    }
    running += r;
    if (mdp.is_sink(x.s_next)) close();
  }
  if (!std::isfinite(lo)) {
    // No episode finished inside the stream; fall back on the partial one.
    close();
  }

  ZBoundEstimate est;
  est.c = -INFINITY;
  for (StateId s = 0; s < mdp.n_states(); ++s) {
    if (mdp.is_sink(s)) continue;
    for (ActionId a = 0; a < mdp.n_actions(); ++a) est.c = std::max(est.c, q(s, a));
  }
  if (mode == ReturnRangeMode::PerEpisode) {
    est.x_min = lo;
    est.x_max = hi;
  } else {
    est.x_min = INFINITY;
    est.x_max = -INFINITY;
    for (StateId s = 0; s < mdp.n_states(); ++s) {
      if (mdp.is_sink(s)) continue;
      for (ActionId a = 0; a < mdp.n_actions(); ++a) {
        est.x_min = std::min(est.x_min, pair_sum[s * mdp.n_actions() + a]);
        est.x_max = std::max(est.x_max, pair_sum[s * mdp.n_actions() + a]);
      }
    }
  }
  const double range = est.x_max - est.x_min;
  est.d = range * range / 8.0;
  return est;
}

/// How |q|_max is approximated inside the z-box.
enum class ZBoxRule {
  /// max{|c - beta d|, |c|}: ERM sits between E - beta d and E, E ~ c.
  MeanCentered,
  /// max{|x_min|, |x_max|}: every ERM of the return lies in [x_min, x_max].
  ReturnRange,
};

/// z_max(beta) = 2 |q|_max + |r|_inf and z_min = -z_max.
///
/// MeanCentered reads c as a bound on every |q|, which undershoots when
/// some values sit far below -|c| (rewards of both signs); ReturnRange does
/// not depend on beta.
inline ZBox z_box(std::span<const double> betas, const ZBoundEstimate& est, double r_inf,
                  ZBoxRule rule = ZBoxRule::MeanCentered) {
  ZBox box;
  box.z_min.reserve(betas.size());
  box.z_max.reserve(betas.size());
  const double range_bound = std::max(std::abs(est.x_min), std::abs(est.x_max));
  for (double b : betas) {
    const double q_max =
        rule == ZBoxRule::MeanCentered ? std::max(std::abs(est.c - b * est.d), std::abs(est.c)) : range_bound;
    const double m = 2.0 * q_max + r_inf;
    box.z_min.push_back(-m);
    box.z_max.push_back(m);
  }
  return box;
}

inline const char* to_string(ZBoxRule rule) {
  return rule == ZBoxRule::MeanCentered ? "mean-centered" : "return-range";
}

/// beta0 = 8 delta / (x_max - x_min)^2.
inline double beta_zero(double delta, const ZBoundEstimate& est) {
  if (!(delta > 0.0)) throw std::invalid_argument("beta_zero: delta must be > 0");
  const double range = est.x_max - est.x_min;
  if (!(range > 0.0)) throw DegenerateReturnRange();
  return 8.0 * delta / (range * range);
}

inline nlohmann::json zbounds_to_json(const ZBoundEstimate& est, std::span<const double> betas, const ZBox& box) {
  nlohmann::json doc;
  doc["c"] = est.c;
  doc["d"] = est.d;
  doc["x_min"] = est.x_min;
  doc["x_max"] = est.x_max;
  auto rows = nlohmann::json::array();
  for (std::size_t i = 0; i < betas.size(); ++i) {
    rows.push_back({{"beta", betas[i]}, {"z_min", box.z_min[i]}, {"z_max", box.z_max[i]}});
  }
  doc["zbox"] = std::move(rows);
  return doc;
}

}  // namespace riskq
