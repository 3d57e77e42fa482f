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
#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "riskq/mdp.hpp"
#include "riskq/qfunction.hpp"
#include "riskq/risk.hpp"
#include "riskq/sampler.hpp"

namespace riskq {

/// Estimated q(s, a, beta) over a finite set of risk levels.
///
/// Sink rows stay at zero. A diverged slice is frozen and its values are
/// treated as -inf by every consumer.
class QTable {
 public:
  QTable(const Mdp& mdp, std::vector<double> betas)
      : n_states_(mdp.n_states()),
        n_actions_(mdp.n_actions()),
        sink_(mdp.sink()),
        betas_(std::move(betas)),
        values_(betas_.size() * n_states_ * n_actions_, 0.0),
        diverged_(betas_.size(), 0),
        visits_(n_states_ * n_actions_, 0) {
    if (betas_.empty()) throw std::invalid_argument("QTable: empty risk-level set");
    for (double b : betas_) {
      if (!(b > 0.0) || !std::isfinite(b)) throw std::invalid_argument("QTable: risk levels must be finite and > 0");
    }
  }

  std::size_t n_states() const noexcept { return n_states_; }
  std::size_t n_actions() const noexcept { return n_actions_; }
  std::size_t n_betas() const noexcept { return betas_.size(); }
  const std::vector<double>& betas() const noexcept { return betas_; }
  double beta(std::size_t b) const { return betas_.at(b); }

  double value(StateId s, ActionId a, std::size_t b) const { return values_[index(s, a, b)]; }
  double& value(StateId s, ActionId a, std::size_t b) { return values_[index(s, a, b)]; }

  /// max_a q(s, a, beta_b); zero at the sink.
  double state_value(StateId s, std::size_t b) const {
    if (s == sink_) return 0.0;
    double m = value(s, 0, b);
    for (std::size_t a = 1; a < n_actions_; ++a) m = std::max(m, value(s, a, b));
    return m;
  }

  bool diverged(std::size_t b) const { return diverged_.at(b) != 0; }
  void mark_diverged(std::size_t b) { diverged_.at(b) = 1; }
  std::size_t live_count() const noexcept {
    std::size_t n = 0;
    for (char d : diverged_) n += d ? 0 : 1;
    return n;
  }

  /// The n_betas() values of q(s, a, .), contiguous.
  std::span<double> levels(StateId s, ActionId a) { return {values_.data() + index(s, a, 0), betas_.size()}; }
  std::span<const double> levels(StateId s, ActionId a) const {
    return {values_.data() + index(s, a, 0), betas_.size()};
  }

  std::uint64_t visits(StateId s, ActionId a) const { return visits_[s * n_actions_ + a]; }
  std::uint64_t& visits(StateId s, ActionId a) { return visits_[s * n_actions_ + a]; }

  /// Copy of the beta_b slice as a plain table.
  QFunction slice(std::size_t b) const {
    QFunction q(n_states_, n_actions_);
    for (StateId s = 0; s < n_states_; ++s)
      for (ActionId a = 0; a < n_actions_; ++a) q(s, a) = value(s, a, b);
    return q;
  }

 private:
  // Risk level innermost: one sample touches one contiguous run per pair.
  std::size_t index(StateId s, ActionId a, std::size_t b) const { return (s * n_actions_ + a) * betas_.size() + b; }

  std::size_t n_states_;
  std::size_t n_actions_;
  StateId sink_;
  std::vector<double> betas_;
  std::vector<double> values_;
  std::vector<char> diverged_;
  std::vector<std::uint64_t> visits_;
};

/// Admissible TD-residual interval per risk level.
struct ZBox {
  std::vector<double> z_min;
  std::vector<double> z_max;

  bool contains(std::size_t b, double z) const { return z_min[b] <= z && z <= z_max[b]; }
};

/// z = r + max_a' q(s', a', beta) - q(s, a, beta), sink contributing 0.
inline double td_residual(const QTable& q, const TransitionSample& sample, double reward, std::size_t b) {
  return reward + q.state_value(sample.s_next, b) - q.value(sample.s, sample.a, b);
}

struct LearnerOptions {
  /// Divide the step by beta, so the update reads
  /// q += (eta / beta) * (1 - exp(-beta z)) and tends to q += eta * z as
  /// beta -> 0. Without it the effective gain near the fixed point is
  /// eta * beta, which stalls small risk levels and overshoots large ones.
  bool normalize_by_beta = true;
  /// Invoke `on_checkpoint` after every this many samples (0 = never).
  std::uint64_t checkpoint_every = 0;
  std::function<void(std::uint64_t, const QTable&)> on_checkpoint;
};

/// Multi-level ERM Q-learning with exponential-loss gradient steps.
///
/// Every sample updates every live risk level. A residual outside the z-box
/// marks the whole slice diverged; it is frozen from then on.
inline void erm_q_learning_update(const Mdp& mdp, std::span<const TransitionSample> stream, const StepSchedule& schedule,
                                  const ZBox& zbox, QTable& q, const LearnerOptions& opts = {}) {
  if (zbox.z_min.size() != q.n_betas() || zbox.z_max.size() != q.n_betas()) {
    throw std::invalid_argument("erm_q_learning: z-box size does not match the risk-level grid");
  }
  schedule.validate();
  const std::size_t n_betas = q.n_betas();
  std::vector<double> v_next(n_betas);
  const double* z_min = zbox.z_min.data();
  const double* z_max = zbox.z_max.data();
  const double* betas = q.betas().data();
  std::vector<double> gain(n_betas, 1.0);
  if (opts.normalize_by_beta) {
    for (std::size_t b = 0; b < n_betas; ++b) gain[b] = 1.0 / betas[b];
  }
  std::vector<char> diverged(n_betas);
  for (std::size_t b = 0; b < n_betas; ++b) diverged[b] = q.diverged(b) ? 1 : 0;
  std::uint64_t processed = 0;
  for (const auto& sample : stream) {
    if (mdp.is_sink(sample.s)) throw std::invalid_argument("erm_q_learning: sample starts at the sink");
    const double reward = mdp.observed_reward(sample.s, sample.a, sample.s_next);
    const std::uint64_t n = ++q.visits(sample.s, sample.a);
    const double e = eta(schedule, n);
    if (mdp.is_sink(sample.s_next)) {
      std::fill(v_next.begin(), v_next.end(), 0.0);
    } else {
      const auto first = q.levels(sample.s_next, 0);
      std::copy(first.begin(), first.end(), v_next.begin());
      for (ActionId a = 1; a < q.n_actions(); ++a) {
        const auto row = q.levels(sample.s_next, a);
        for (std::size_t b = 0; b < n_betas; ++b) v_next[b] = std::max(v_next[b], row[b]);
      }
    }
    const auto target = q.levels(sample.s, sample.a);
    for (std::size_t b = 0; b < n_betas; ++b) {
      if (diverged[b]) continue;
      // Same expression as td_residual.
      const double z = reward + v_next[b] - target[b];
      if (!(z_min[b] <= z && z <= z_max[b])) {
        q.mark_diverged(b);
        diverged[b] = 1;
        continue;
      }
      target[b] += e * gain[b] * erm_loss(z, betas[b]).first;
    }
    ++processed;
    if (opts.checkpoint_every > 0 && opts.on_checkpoint && processed % opts.checkpoint_every == 0) {
      opts.on_checkpoint(processed, q);
    }
  }
}

inline QTable erm_q_learning(const Mdp& mdp, std::span<const TransitionSample> stream, std::vector<double> betas,
                             const StepSchedule& schedule, const ZBox& zbox, const LearnerOptions& opts = {}) {
  if (stream.empty()) throw std::invalid_argument("erm_q_learning: empty sample stream");
  QTable q(mdp, std::move(betas));
  erm_q_learning_update(mdp, stream, schedule, zbox, q, opts);
  return q;
}

/// CSV dump `s,a,beta,q,diverged`; diverged slices print q as -inf.
inline void write_qtable_csv(std::ostream& os, const Mdp& mdp, const QTable& q) {
  os << "s,a,beta,q,diverged\n";
  const auto old = os.precision(17);
  for (std::size_t b = 0; b < q.n_betas(); ++b) {
    for (StateId s = 0; s < q.n_states(); ++s) {
      if (mdp.is_sink(s)) continue;
      for (ActionId a = 0; a < q.n_actions(); ++a) {
        os << s << ',' << a << ',' << q.beta(b) << ',';
        if (q.diverged(b)) {
          os << "-inf";
        } else {
          os << q.value(s, a, b);
        }
        os << ',' << (q.diverged(b) ? 1 : 0) << '\n';
      }
    }
  }
  os.precision(old);
}

}  // namespace riskq
