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
#include <optional>
#include <stdexcept>
#include <vector>

#include "riskq/mdp.hpp"
#include "riskq/qfunction.hpp"
#include "riskq/risk.hpp"

namespace riskq {

namespace detail {

// Scratch buffers sized to the widest outcome row.
struct RowScratch {
  std::vector<double> values;
  std::vector<double> probs;

  explicit RowScratch(const Mdp& mdp) {
    std::size_t width = 1;
    for (StateId s = 0; s < mdp.n_states(); ++s)
      for (ActionId a = 0; a < mdp.n_actions(); ++a) width = std::max(width, mdp.outcomes(s, a).size());
    values.resize(width);
    probs.resize(width);
  }
};

}  // namespace detail

/// ERM Bellman operator: (B q)(s, a) = ERM_beta[r(s, a, S') + max_a' q(S', a')].
///
/// Rows are evaluated with a per-row max shift of the exponents, i.e. the
/// exponential Bellman operator renormalized by the current maximum.
inline QFunction bellman_apply(const Mdp& mdp, const QFunction& q, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("bellman_apply: beta must be > 0");
  const auto v = state_values(mdp, q);
  detail::RowScratch scratch(mdp);
  QFunction out(mdp);
  for (StateId s = 0; s < mdp.n_states(); ++s) {
    if (mdp.is_sink(s)) continue;
    for (ActionId a = 0; a < mdp.n_actions(); ++a) {
      const auto row = mdp.outcomes(s, a);
      for (std::size_t i = 0; i < row.size(); ++i) {
        scratch.values[i] = row[i].reward + v[row[i].next];
        scratch.probs[i] = row[i].prob;
      }
      out(s, a) = erm(std::span<const double>(scratch.values.data(), row.size()),
                      std::span<const double>(scratch.probs.data(), row.size()), beta);
    }
  }
  return out;
}

/// Regression form of the Bellman operator: each entry is
/// argmin_y E[l_beta(r + max_a' q(S', a') - y)], solved by bisection.
inline QFunction regression_bellman_apply(const Mdp& mdp, const QFunction& q, double beta, double tol = 1e-10) {
  const auto v = state_values(mdp, q);
  QFunction out(mdp);
  for (StateId s = 0; s < mdp.n_states(); ++s) {
    if (mdp.is_sink(s)) continue;
    for (ActionId a = 0; a < mdp.n_actions(); ++a) {
      std::vector<Atom> atoms;
      for (const auto& o : mdp.outcomes(s, a)) atoms.push_back({o.reward + v[o.next], o.prob});
      out(s, a) = erm_via_regression(DiscreteDist(std::move(atoms)), beta, tol);
    }
  }
  return out;
}

enum class SolveStatus { Bounded, Unbounded };

inline const char* to_string(SolveStatus s) { return s == SolveStatus::Bounded ? "bounded" : "unbounded"; }

struct ErmSolution {
  SolveStatus status = SolveStatus::Bounded;
  /// Present only when Bounded.
  std::optional<QFunction> q_star;
  std::optional<std::vector<double>> v_star;
  Policy policy;
  std::size_t iterations = 0;
  double last_change = 0.0;
  /// False when max_iter ran out while values were not monotonically
  /// decreasing; the tables are then the last iterate.
  bool converged = true;

  bool bounded() const noexcept { return status == SolveStatus::Bounded; }
};

struct FixedPointOptions {
  double tol = 1e-10;
  std::size_t max_iter = 100'000;
  /// Starting point; zeros when absent.
  std::optional<QFunction> initial;
};

/// Value iteration for q* = B_beta q*.
///
/// Declares Unbounded when some value drops below -(|r|_inf * 1e6), or when
/// max_iter is exhausted while the iterates are still decreasing by more than
/// tol per sweep.
inline ErmSolution solve_erm_fixed_point(const Mdp& mdp, double beta, const FixedPointOptions& opts = {}) {
  if (!(opts.tol > 0.0)) throw std::invalid_argument("solve_erm_fixed_point: tol must be > 0");
  if (opts.max_iter == 0) throw std::invalid_argument("solve_erm_fixed_point: max_iter must be > 0");
  if (!(beta > 0.0)) throw std::invalid_argument("solve_erm_fixed_point: beta must be > 0");
  const double floor = -std::max(mdp.reward_sup_norm(), 1.0) * 1e6;
  QFunction q = opts.initial.value_or(QFunction(mdp));
  for (StateId a = 0; a < mdp.n_actions(); ++a) q(mdp.sink(), a) = 0.0;

  ErmSolution sol;
  bool decreasing = false;
  for (std::size_t it = 1; it <= opts.max_iter; ++it) {
    QFunction next = bellman_apply(mdp, q, beta);
    double change = 0.0;
    double max_drop = 0.0;
    double max_rise = 0.0;
    double lowest = INFINITY;
    for (StateId s = 0; s < mdp.n_states(); ++s) {
      if (mdp.is_sink(s)) continue;
      for (ActionId a = 0; a < mdp.n_actions(); ++a) {
        const double d = next(s, a) - q(s, a);
        change = std::max(change, std::abs(d));
        max_drop = std::max(max_drop, -d);
        max_rise = std::max(max_rise, d);
        lowest = std::min(lowest, next(s, a));
      }
    }
    q = std::move(next);
    sol.iterations = it;
    sol.last_change = change;
    if (!(lowest >= floor)) {
      sol.status = SolveStatus::Unbounded;
      return sol;
    }
    if (change < opts.tol) {
      sol.status = SolveStatus::Bounded;
      sol.v_star = state_values(mdp, q);
      sol.policy = greedy_policy(mdp, q);
      sol.q_star = std::move(q);
      return sol;
    }
    decreasing = max_rise <= opts.tol && max_drop > opts.tol;
  }
  if (decreasing) {
    sol.status = SolveStatus::Unbounded;
    return sol;
  }
  sol.status = SolveStatus::Bounded;
  sol.converged = false;
  sol.v_star = state_values(mdp, q);
  sol.policy = greedy_policy(mdp, q);
  sol.q_star = std::move(q);
  return sol;
}

/// Exponential value transform w = -exp(-beta v) and its inverse.
inline double exponential_value(double v, double beta) { return -std::exp(-beta * v); }
inline double value_from_exponential(double w, double beta) { return -std::log(-w) / beta; }

/// h(q, beta) = ERM_beta over s ~ mu of max_a q(s, a), plus beta^-1 log(alpha).
inline double h_value(const Mdp& mdp, const QFunction& q, double beta, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("h_value: alpha must lie in (0,1)");
  if (!(beta > 0.0)) throw std::invalid_argument("h_value: beta must be > 0");
  std::vector<double> values;
  std::vector<double> probs;
  for (StateId s = 0; s < mdp.n_states(); ++s) {
    if (mdp.initial()[s] > 0.0) {
      const double v = q.state_value(s);
      if (!std::isfinite(v)) return -INFINITY;
      values.push_back(v);
      probs.push_back(mdp.initial()[s]);
    }
  }
  return erm(values, probs, beta) + std::log(alpha) / beta;
}

struct HOperatorConfig {
  double xi = 1.0;
};

/// Largest step xi with xi <= 1/L, L = beta exp(-beta z_min).
inline double max_stable_xi(double beta, double z_min) { return 1.0 / (beta * std::exp(-beta * z_min)); }

/// (H q)(s, a) = q(s, a) - xi * sum_s' p(s, a, s') (exp(-beta z(s')) - 1),
/// z(s') = r(s, a, s') + max_a' q(s', a') - q(s, a).
inline QFunction apply_H(const Mdp& mdp, const QFunction& q, double beta, const HOperatorConfig& cfg) {
  if (!(cfg.xi > 0.0)) throw std::invalid_argument("apply_H: xi must be > 0");
  const auto v = state_values(mdp, q);
  QFunction out(mdp);
  for (StateId s = 0; s < mdp.n_states(); ++s) {
    if (mdp.is_sink(s)) continue;
    for (ActionId a = 0; a < mdp.n_actions(); ++a) {
      double grad = 0.0;
      for (const auto& o : mdp.outcomes(s, a)) {
        const double z = o.reward + v[o.next] - q(s, a);
        grad += o.prob * std::expm1(-beta * z);
      }
      out(s, a) = q(s, a) - cfg.xi * grad;
    }
  }
  return out;
}

struct HorizonErm {
  /// ERM_beta of the horizon-truncated return under s0 ~ mu.
  double value = 0.0;
  /// Same, conditioned on each start state.
  std::vector<double> per_state;
  bool bounded = true;
};

/// Exact ERM of sum_{k < horizon} r under a fixed policy.
///
/// Backward recursion on log E exp(-beta * return); no path enumeration and
/// no maximization, so it is independent of the value-iteration route.
inline HorizonErm brute_force_erm_return(const Mdp& mdp, const Policy& policy, double beta, std::size_t horizon) {
  if (horizon < 1) throw std::invalid_argument("brute_force_erm_return: horizon must be >= 1");
  if (!(beta > 0.0)) throw std::invalid_argument("brute_force_erm_return: beta must be > 0");
  check_policy(mdp, policy);
  std::vector<double> log_m(mdp.n_states(), 0.0);
  std::vector<double> next(mdp.n_states(), 0.0);
  std::vector<double> terms;
  for (std::size_t k = 0; k < horizon; ++k) {
    for (StateId s = 0; s < mdp.n_states(); ++s) {
      if (mdp.is_sink(s)) {
        next[s] = 0.0;
        continue;
      }
      terms.clear();
      double top = -INFINITY;
      for (const auto& o : mdp.outcomes(s, policy[s])) {
        terms.push_back(std::log(o.prob) - beta * o.reward + log_m[o.next]);
        top = std::max(top, terms.back());
      }
      double acc = 0.0;
      for (double t : terms) acc += std::exp(t - top);
      next[s] = top + std::log(acc);
    }
    std::swap(log_m, next);
  }
  HorizonErm out;
  out.per_state.assign(mdp.n_states(), 0.0);
  double top = -INFINITY;
  for (StateId s = 0; s < mdp.n_states(); ++s) {
    out.per_state[s] = -log_m[s] / beta;
    if (!std::isfinite(log_m[s])) out.bounded = false;
    if (mdp.initial()[s] > 0.0) top = std::max(top, std::log(mdp.initial()[s]) + log_m[s]);
  }
  double acc = 0.0;
  for (StateId s = 0; s < mdp.n_states(); ++s) {
    if (mdp.initial()[s] > 0.0) acc += std::exp(std::log(mdp.initial()[s]) + log_m[s] - top);
  }
  out.value = -(top + std::log(acc)) / beta;
  if (!std::isfinite(out.value)) out.bounded = false;
  return out;
}

}  // namespace riskq
