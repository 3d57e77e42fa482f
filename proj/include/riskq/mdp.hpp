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
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace riskq {

using StateId = std::size_t;
using ActionId = std::size_t;

/// Tolerance applied to every "sums to one" check on model data.
inline constexpr double kProbabilityTolerance = 1e-12;

/// Error raised while building, loading or validating an MDP.
class MdpError : public std::runtime_error {
 public:
  enum class Kind { Parse, Schema, Invariant };

  MdpError(Kind kind, std::string field, const std::string& message)
      : std::runtime_error(field.empty() ? message : field + ": " + message),
        kind_(kind),
        field_(std::move(field)) {}

  Kind kind() const noexcept { return kind_; }
  /// Offending field or location, e.g. "transitions[3].p".
  const std::string& field() const noexcept { return field_; }

 private:
  Kind kind_;
  std::string field_;
};

/// One (s, a, s') entry of the sparse model.
struct Transition {
  StateId s = 0;
  ActionId a = 0;
  StateId s2 = 0;
  double p = 0.0;
  double r = 0.0;
};

/// A reachable next state of some (s, a) pair.
struct Outcome {
  StateId next = 0;
  double prob = 0.0;
  double reward = 0.0;
};

/// Finite transient MDP with a single absorbing sink.
///
/// Storage is row-major by (s, a); each row lists the outcomes with nonzero
/// probability in the order they were supplied. Instances are immutable once
/// constructed, and the constructor enforces every model invariant.
class Mdp {
 public:
  Mdp(std::size_t n_states, std::size_t n_actions, StateId sink, std::vector<double> initial,
      std::span<const Transition> transitions)
      : n_states_(n_states), n_actions_(n_actions), sink_(sink), initial_(std::move(initial)) {
    if (n_states < 2) {
      throw MdpError(MdpError::Kind::Invariant, "n_states", "need at least one state besides the sink");
    }
    if (n_actions < 1) {
      throw MdpError(MdpError::Kind::Invariant, "n_actions", "need at least one action");
    }
    if (sink >= n_states) {
      throw MdpError(MdpError::Kind::Invariant, "sink_id", "out of range");
    }
    if (initial_.size() != n_states) {
      throw MdpError(MdpError::Kind::Invariant, "initial", "length must equal n_states");
    }
    build_rows(transitions);
    check_invariants();
  }

  std::size_t n_states() const noexcept { return n_states_; }
  std::size_t n_actions() const noexcept { return n_actions_; }
  StateId sink() const noexcept { return sink_; }
  bool is_sink(StateId s) const noexcept { return s == sink_; }
  const std::vector<double>& initial() const noexcept { return initial_; }

  std::span<const Outcome> outcomes(StateId s, ActionId a) const {
    const std::size_t row = s * n_actions_ + a;
    return {outcomes_.data() + row_start_[row], row_start_[row + 1] - row_start_[row]};
  }

  double probability(StateId s, ActionId a, StateId s2) const {
    const Outcome* o = find(s, a, s2);
    return o == nullptr ? 0.0 : o->prob;
  }

  /// r(s, a, s'); zero for pairs outside the support.
  double reward(StateId s, ActionId a, StateId s2) const {
    const Outcome* o = find(s, a, s2);
    return o == nullptr ? 0.0 : o->reward;
  }

  /// Reward of an observed transition; throws if p(s, a, s') = 0.
  double observed_reward(StateId s, ActionId a, StateId s2) const {
    const Outcome* o = find(s, a, s2);
    if (o == nullptr) {
      throw std::invalid_argument("transition (" + std::to_string(s) + "," + std::to_string(a) + "," +
                                  std::to_string(s2) + ") has zero probability under the model");
    }
    return o->reward;
  }

  /// max |r(s, a, s')| over the support.
  double reward_sup_norm() const noexcept {
    double m = 0.0;
    for (const auto& o : outcomes_) {
      m = std::max(m, std::abs(o.reward));
    }
    return m;
  }

  /// Non-sink states in increasing index order.
  std::vector<StateId> non_sink_states() const {
    std::vector<StateId> out;
    out.reserve(n_states_ - 1);
    for (StateId s = 0; s < n_states_; ++s) {
      if (s != sink_) {
        out.push_back(s);
      }
    }
    return out;
  }

  /// Flat triple list, sorted by (s, a, s2). Sink self-loops included.
  std::vector<Transition> transitions() const {
    std::vector<Transition> out;
    out.reserve(outcomes_.size());
    for (StateId s = 0; s < n_states_; ++s) {
      for (ActionId a = 0; a < n_actions_; ++a) {
        for (const auto& o : outcomes(s, a)) {
          out.push_back({s, a, o.next, o.prob, o.reward});
        }
      }
    }
    std::sort(out.begin(), out.end(),
              [](const Transition& x, const Transition& y) { return std::tie(x.s, x.a, x.s2) < std::tie(y.s, y.a, y.s2); });
    return out;
  }

 private:
  const Outcome* find(StateId s, ActionId a, StateId s2) const {
    for (const auto& o : outcomes(s, a)) {
      if (o.next == s2) {
        return &o;
      }
    }
    return nullptr;
  }

  void build_rows(std::span<const Transition> transitions) {
    const std::size_t rows = n_states_ * n_actions_;
    std::vector<std::vector<Outcome>> per_row(rows);
    std::map<std::tuple<StateId, ActionId, StateId>, std::size_t> seen;
    bool sink_listed = false;
    for (std::size_t i = 0; i < transitions.size(); ++i) {
      const auto& t = transitions[i];
      const std::string where = "transitions[" + std::to_string(i) + "]";
      if (t.s >= n_states_) throw MdpError(MdpError::Kind::Invariant, where + ".s", "state out of range");
      if (t.a >= n_actions_) throw MdpError(MdpError::Kind::Invariant, where + ".a", "action out of range");
      if (t.s2 >= n_states_) throw MdpError(MdpError::Kind::Invariant, where + ".s2", "state out of range");
      if (!std::isfinite(t.p) || t.p < 0.0 || t.p > 1.0) {
        throw MdpError(MdpError::Kind::Invariant, where + ".p", "probability outside [0,1]");
      }
      if (!std::isfinite(t.r)) throw MdpError(MdpError::Kind::Invariant, where + ".r", "reward is not finite");
      if (!seen.emplace(std::make_tuple(t.s, t.a, t.s2), i).second) {
        throw MdpError(MdpError::Kind::Schema, where, "duplicate (s,a,s2) triple");
      }
      if (t.s == sink_) sink_listed = true;
      if (t.p > 0.0) per_row[t.s * n_actions_ + t.a].push_back({t.s2, t.p, t.r});
    }
    // A sink with no listed rows gets its implicit zero-reward self-loops.
    if (!sink_listed) {
      for (ActionId a = 0; a < n_actions_; ++a) {
        per_row[sink_ * n_actions_ + a].push_back({sink_, 1.0, 0.0});
      }
    }
    row_start_.assign(rows + 1, 0);
    for (std::size_t row = 0; row < rows; ++row) {
      row_start_[row + 1] = row_start_[row] + per_row[row].size();
    }
    outcomes_.reserve(row_start_.back());
    for (auto& row : per_row) {
      outcomes_.insert(outcomes_.end(), row.begin(), row.end());
    }
  }

  void check_invariants() const {
    for (StateId s = 0; s < n_states_; ++s) {
      for (ActionId a = 0; a < n_actions_; ++a) {
        const std::string where = "transitions(s=" + std::to_string(s) + ",a=" + std::to_string(a) + ")";
        double total = 0.0;
        for (const auto& o : outcomes(s, a)) total += o.prob;
        if (std::abs(total - 1.0) > kProbabilityTolerance) {
          throw MdpError(MdpError::Kind::Invariant, where, "outgoing probabilities sum to " + std::to_string(total));
        }
        if (s == sink_) {
          if (std::abs(probability(s, a, sink_) - 1.0) > kProbabilityTolerance) {
            throw MdpError(MdpError::Kind::Invariant, where, "sink must self-loop with probability 1");
          }
          if (reward(s, a, sink_) != 0.0) {
            throw MdpError(MdpError::Kind::Invariant, where, "sink self-loop must have zero reward");
          }
        }
      }
    }
    double mass = 0.0;
    for (StateId s = 0; s < n_states_; ++s) {
      const double m = initial_[s];
      if (!std::isfinite(m) || m < 0.0 || m > 1.0) {
        throw MdpError(MdpError::Kind::Invariant, "initial[" + std::to_string(s) + "]", "probability outside [0,1]");
      }
      mass += m;
    }
    if (initial_[sink_] != 0.0) {
      throw MdpError(MdpError::Kind::Invariant, "initial", "initial mass on sink");
    }
    if (std::abs(mass - 1.0) > kProbabilityTolerance) {
      throw MdpError(MdpError::Kind::Invariant, "initial", "initial distribution sums to " + std::to_string(mass));
    }
  }

  std::size_t n_states_;
  std::size_t n_actions_;
  StateId sink_;
  std::vector<double> initial_;
  std::vector<std::size_t> row_start_;
  std::vector<Outcome> outcomes_;
};

/// Deterministic stationary policy. The sink entry is carried but ignored.
class Policy {
 public:
  Policy() = default;
  explicit Policy(std::vector<ActionId> actions) : actions_(std::move(actions)) {}
  Policy(std::size_t n_states, ActionId fill) : actions_(n_states, fill) {}

  ActionId operator[](StateId s) const { return actions_.at(s); }
  ActionId& operator[](StateId s) { return actions_.at(s); }
  std::size_t size() const noexcept { return actions_.size(); }
  const std::vector<ActionId>& actions() const noexcept { return actions_; }

  bool operator==(const Policy&) const = default;

 private:
  std::vector<ActionId> actions_;
};

inline void check_policy(const Mdp& mdp, const Policy& policy) {
  if (policy.size() != mdp.n_states()) {
    throw std::invalid_argument("policy length " + std::to_string(policy.size()) + " != n_states " +
                                std::to_string(mdp.n_states()));
  }
  for (StateId s = 0; s < mdp.n_states(); ++s) {
    if (!mdp.is_sink(s) && policy[s] >= mdp.n_actions()) {
      throw std::invalid_argument("policy action out of range at state " + std::to_string(s));
    }
  }
}

}  // namespace riskq
