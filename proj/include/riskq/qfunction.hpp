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
#include <vector>

#include "riskq/mdp.hpp"

namespace riskq {

/// Dense state-action table q(s, a) for one risk level.
class QFunction {
 public:
  QFunction() = default;
  QFunction(std::size_t n_states, std::size_t n_actions, double fill = 0.0)
      : n_states_(n_states), n_actions_(n_actions), values_(n_states * n_actions, fill) {}
  explicit QFunction(const Mdp& mdp) : QFunction(mdp.n_states(), mdp.n_actions()) {}

  double& operator()(StateId s, ActionId a) { return values_[s * n_actions_ + a]; }
  double operator()(StateId s, ActionId a) const { return values_[s * n_actions_ + a]; }

  std::size_t n_states() const noexcept { return n_states_; }
  std::size_t n_actions() const noexcept { return n_actions_; }
  std::span<const double> row(StateId s) const { return {values_.data() + s * n_actions_, n_actions_}; }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  /// max_a q(s, a).
  double state_value(StateId s) const {
    const auto r = row(s);
    return *std::max_element(r.begin(), r.end());
  }

  /// First action attaining max_a q(s, a).
  ActionId greedy_action(StateId s) const {
    const auto r = row(s);
    return static_cast<ActionId>(std::max_element(r.begin(), r.end()) - r.begin());
  }

 private:
  std::size_t n_states_ = 0;
  std::size_t n_actions_ = 0;
  std::vector<double> values_;
};

/// Greedy policy, ties to the lowest action index; sink maps to action 0.
inline Policy greedy_policy(const Mdp& mdp, const QFunction& q) {
  Policy pi(mdp.n_states(), 0);
  for (StateId s = 0; s < mdp.n_states(); ++s) {
    if (!mdp.is_sink(s)) pi[s] = q.greedy_action(s);
  }
  return pi;
}

/// v(s) = max_a q(s, a), with v(sink) = 0.
inline std::vector<double> state_values(const Mdp& mdp, const QFunction& q) {
  std::vector<double> v(mdp.n_states(), 0.0);
  for (StateId s = 0; s < mdp.n_states(); ++s) {
    if (!mdp.is_sink(s)) v[s] = q.state_value(s);
  }
  return v;
}

/// sup over non-sink (s, a) of |x - y|.
inline double sup_distance(const Mdp& mdp, const QFunction& x, const QFunction& y) {
  double d = 0.0;
  for (StateId s = 0; s < mdp.n_states(); ++s) {
    if (mdp.is_sink(s)) continue;
    for (ActionId a = 0; a < mdp.n_actions(); ++a) d = std::max(d, std::abs(x(s, a) - y(s, a)));
  }
  return d;
}

}  // namespace riskq
