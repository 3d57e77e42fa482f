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
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "riskq/mdp.hpp"
#include "riskq/rng.hpp"

namespace riskq {

struct Cell {
  std::size_t row = 0;
  std::size_t col = 0;
  bool operator==(const Cell&) const = default;
};

enum class CliffAction : ActionId { Up = 0, Down = 1, Left = 2, Right = 3 };

/// Layout of the cliff-walking grid. Rows count from the top; state id of a
/// cell is row * cols + col and the sink comes last.
struct CliffWalkingSpec {
  std::size_t rows = 7;
  std::size_t cols = 7;
  /// Where a fall off the cliff lands.
  Cell b{0, 6};
  Cell goal{6, 6};
  Cell bonus{5, 2};
  /// Cliff cells in left-to-right order with their penalties.
  std::vector<std::pair<Cell, double>> cliff{
      {{6, 1}, -0.5}, {{6, 2}, -0.6}, {{6, 3}, -0.7}, {{6, 4}, -0.8}, {{6, 5}, -0.9}};
  double goal_reward = 2.0;
  double bonus_reward = 0.004;
  double p_intended = 0.91;
  double p_other = 0.03;
  /// Whether the initial distribution puts mass on the cliff cells. They are
  /// ordinary non-sink states (a start there is a fall).
  bool start_on_cliff = true;

  std::size_t n_cells() const noexcept { return rows * cols; }
  StateId id(Cell c) const noexcept { return c.row * cols + c.col; }
  Cell cell(StateId s) const noexcept { return {s / cols, s % cols}; }
  StateId sink() const noexcept { return n_cells(); }

  const std::pair<Cell, double>* cliff_at(Cell c) const {
    for (const auto& entry : cliff) {
      if (entry.first == c) return &entry;
    }
    return nullptr;
  }

  /// Neighbour in the given direction, or the cell itself at a wall.
  Cell move(Cell c, CliffAction a) const {
    switch (a) {
      case CliffAction::Up: return c.row == 0 ? c : Cell{c.row - 1, c.col};
      case CliffAction::Down: return c.row + 1 == rows ? c : Cell{c.row + 1, c.col};
      case CliffAction::Left: return c.col == 0 ? c : Cell{c.row, c.col - 1};
      case CliffAction::Right: return c.col + 1 == cols ? c : Cell{c.row, c.col + 1};
    }
    return c;
  }
};

/// Slippery cliff walk: the chosen direction happens w.p. p_intended, each
/// other direction w.p. p_other, and bumping a wall means staying.
///
/// A cliff cell moves to b under every action and pays its penalty on that
/// step, so a fall costs one penalty. Entering the bonus cell pays
/// bonus_reward. The goal pays goal_reward on its transition to the sink.
inline Mdp make_cliff_walking(const CliffWalkingSpec& spec = {}) {
  if (spec.rows < 2 || spec.cols < 2) throw std::invalid_argument("cliff walking: grid too small");
  if (std::abs(spec.p_intended + 3.0 * spec.p_other - 1.0) > kProbabilityTolerance) {
    throw std::invalid_argument("cliff walking: slip probabilities must sum to 1");
  }
  const std::size_t n = spec.n_cells() + 1;
  std::vector<Transition> tr;
  for (StateId s = 0; s < spec.n_cells(); ++s) {
    const Cell here = spec.cell(s);
    for (ActionId a = 0; a < 4; ++a) {
      if (here == spec.goal) {
        tr.push_back({s, a, spec.sink(), 1.0, spec.goal_reward});
        continue;
      }
      if (const auto* c = spec.cliff_at(here)) {
        tr.push_back({s, a, spec.id(spec.b), 1.0, c->second});
        continue;
      }
      // (next state) -> (probability, reward); a std::map keeps rows sorted.
      std::map<StateId, std::pair<double, double>> row;
      for (ActionId dir = 0; dir < 4; ++dir) {
        const double p = dir == a ? spec.p_intended : spec.p_other;
        const Cell to = spec.move(here, static_cast<CliffAction>(dir));
        const StateId next = spec.id(to);
        const double r = to == spec.bonus && !(to == here) ? spec.bonus_reward : 0.0;
        auto [it, fresh] = row.try_emplace(next, p, r);
        if (!fresh) {
          if (it->second.second != r) throw std::logic_error("cliff walking: conflicting rewards on one transition");
          it->second.first += p;
        }
      }
      for (const auto& [next, pr] : row) tr.push_back({s, a, next, pr.first, pr.second});
    }
  }
  std::vector<double> mu(n, 0.0);
  std::size_t starts = 0;
  for (StateId s = 0; s < spec.n_cells(); ++s) {
    if (spec.start_on_cliff || spec.cliff_at(spec.cell(s)) == nullptr) {
      mu[s] = 1.0;
      ++starts;
    }
  }
  for (double& m : mu) m /= static_cast<double>(starts);
  return Mdp(n, 4, spec.sink(), std::move(mu), tr);
}

/// Gambler's ruin on capital 0..n with sink n + 1. Action k bets k + 1,
/// clipped to min(capital, n - capital). Capital 0 and n move to the sink,
/// paying win_reward from n. The start is uniform over 1..n-1.
inline Mdp make_gamblers_ruin(std::size_t n = 6, double p = 0.7, std::size_t max_bet = 0,
                              double win_reward = 1.0) {
  if (n < 2) throw std::invalid_argument("gambler's ruin: n must be >= 2");
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("gambler's ruin: p must lie in (0,1)");
  if (max_bet == 0) max_bet = n / 2;
  const StateId sink = n + 1;
  std::vector<Transition> tr;
  for (StateId c = 0; c <= n; ++c) {
    for (ActionId a = 0; a < max_bet; ++a) {
      if (c == 0 || c == n) {
        tr.push_back({c, a, sink, 1.0, c == n ? win_reward : 0.0});
        continue;
      }
      const std::size_t bet = std::min({a + 1, c, n - c});
      tr.push_back({c, a, c - bet, 1.0 - p, 0.0});
      tr.push_back({c, a, c + bet, p, 0.0});
    }
  }
  std::vector<double> mu(n + 2, 0.0);
  for (StateId c = 1; c < n; ++c) mu[c] = 1.0 / static_cast<double>(n - 1);
  return Mdp(n + 2, max_bet, sink, std::move(mu), tr);
}

/// Random fixture with n_states non-sink states (sink id n_states). Each row
/// is sink_prob_min on the sink plus a random spread of the remainder, so
/// every policy leaves with probability >= sink_prob_min per step. Rewards
/// are uniform in [-1, 1].
inline Mdp make_random_transient(std::size_t n_states, std::size_t n_actions, double sink_prob_min,
                                 std::uint64_t seed) {
  if (n_states < 1 || n_actions < 1) throw std::invalid_argument("random transient: need >= 1 state and action");
  if (!(sink_prob_min > 0.0 && sink_prob_min <= 1.0)) {
    throw std::invalid_argument("random transient: sink_prob_min must lie in (0,1]");
  }
  RandomStream rng(seed, stream_tag::kGenerator);
  const StateId sink = n_states;
  std::vector<Transition> tr;
  std::vector<double> w(n_states + 1);
  for (StateId s = 0; s < n_states; ++s) {
    for (ActionId a = 0; a < n_actions; ++a) {
      double total = 0.0;
      for (double& x : w) total += (x = rng.uniform());
      for (StateId s2 = 0; s2 <= n_states; ++s2) {
        double p = (1.0 - sink_prob_min) * w[s2] / total;
        if (s2 == sink) p += sink_prob_min;
        const double r = 2.0 * rng.uniform() - 1.0;
        if (p > 0.0) tr.push_back({s, a, s2, p, r});
      }
    }
  }
  std::vector<double> mu(n_states + 1, 1.0 / static_cast<double>(n_states));
  mu[sink] = 0.0;
  return Mdp(n_states + 1, n_actions, sink, std::move(mu), tr);
}

}  // namespace riskq
