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
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace riskq {

struct Atom {
  double value = 0.0;
  double prob = 0.0;
};

/// Finite discrete distribution.
class DiscreteDist {
 public:
  explicit DiscreteDist(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
    if (atoms_.empty()) throw std::invalid_argument("distribution needs at least one atom");
    // Compensated sum: many equal weights would otherwise drift past the tolerance.
    double total = 0.0;
    double carry = 0.0;
    for (const auto& a : atoms_) {
      if (!std::isfinite(a.value)) throw std::invalid_argument("atom value is not finite");
      if (!(a.prob >= 0.0)) throw std::invalid_argument("atom probability is negative");
      const double t = total + a.prob;
      carry += std::abs(total) >= a.prob ? (total - t) + a.prob : (a.prob - t) + total;
      total = t;
    }
    total += carry;
    if (std::abs(total - 1.0) > 1e-12) {
      throw std::invalid_argument("atom probabilities sum to " + std::to_string(total));
    }
  }

  /// Equal weights on the given values.
  static DiscreteDist uniform(std::span<const double> values) {
    std::vector<Atom> atoms;
    atoms.reserve(values.size());
    const double w = 1.0 / static_cast<double>(values.size());
    for (double v : values) atoms.push_back({v, w});
    return DiscreteDist(std::move(atoms));
  }

  std::span<const Atom> atoms() const noexcept { return atoms_; }

  double mean() const noexcept {
    double m = 0.0;
    for (const auto& a : atoms_) m += a.prob * a.value;
    return m;
  }
  double min() const noexcept {
    double m = INFINITY;
    for (const auto& a : atoms_)
      if (a.prob > 0.0) m = std::min(m, a.value);
    return m;
  }
  double max() const noexcept {
    double m = -INFINITY;
    for (const auto& a : atoms_)
      if (a.prob > 0.0) m = std::max(m, a.value);
    return m;
  }

 private:
  std::vector<Atom> atoms_;
};

namespace detail {

// ERM of atoms (value_at(i), prob_at(i)), i < n, for finite beta > 0.
// Shifts exponents by their max and evaluates log(s) as log1p(s - 1) so the
// small-beta regime keeps its precision. Probabilities are renormalized.
template <class ValueAt, class ProbAt>
double erm_kernel(std::size_t n, ValueAt value_at, ProbAt prob_at, double beta) {
  double shift = -INFINITY;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = prob_at(i);
    if (p > 0.0) {
      shift = std::max(shift, -beta * value_at(i));
      total += p;
    }
  }
  double excess = 0.0;  // sum p_i (exp(t_i - shift) - 1)
  for (std::size_t i = 0; i < n; ++i) {
    const double p = prob_at(i);
    if (p > 0.0) excess += p * std::expm1(-beta * value_at(i) - shift);
  }
  return -(shift + std::log1p(excess / total)) / beta;
}

}  // namespace detail

/// Entropic risk measure -beta^-1 log E exp(-beta X).
///
/// beta = 0 gives the mean and beta = +inf the essential infimum.
inline double erm(const DiscreteDist& dist, double beta) {
  if (!(beta >= 0.0)) throw std::invalid_argument("erm: beta must be >= 0");
  if (beta == 0.0) return dist.mean();
  if (std::isinf(beta)) return dist.min();
  const auto atoms = dist.atoms();
  return detail::erm_kernel(
      atoms.size(), [&](std::size_t i) { return atoms[i].value; }, [&](std::size_t i) { return atoms[i].prob; },
      beta);
}

/// ERM over parallel value/probability spans (no allocation).
inline double erm(std::span<const double> values, std::span<const double> probs, double beta) {
  if (!(beta > 0.0) || std::isinf(beta)) throw std::invalid_argument("erm: beta must be finite and > 0");
  return detail::erm_kernel(
      values.size(), [&](std::size_t i) { return values[i]; }, [&](std::size_t i) { return probs[i]; }, beta);
}

struct EvarResult {
  double value = 0.0;
  /// Grid point attaining the maximum; 0 when alpha = 1.
  double beta = 0.0;
};

/// Entropic value-at-risk restricted to a finite grid of risk levels:
/// max over the grid of ERM_beta[X] + beta^-1 log(alpha). alpha = 1 is the mean.
inline EvarResult evar_argmax(const DiscreteDist& dist, double alpha, std::span<const double> beta_grid) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("evar: alpha must lie in (0,1]");
  if (beta_grid.empty()) throw std::invalid_argument("evar: empty beta grid");
  for (std::size_t i = 0; i < beta_grid.size(); ++i) {
    if (!(beta_grid[i] > 0.0) || (i > 0 && !(beta_grid[i] > beta_grid[i - 1]))) {
      throw std::invalid_argument("evar: beta grid must be positive and strictly increasing");
    }
  }
  if (alpha == 1.0) return {dist.mean(), 0.0};
  const double log_alpha = std::log(alpha);
  EvarResult best{-INFINITY, beta_grid.front()};
  for (double b : beta_grid) {
    const double v = erm(dist, b) + log_alpha / b;
    if (v > best.value) best = {v, b};
  }
  return best;
}

inline double evar(const DiscreteDist& dist, double alpha, std::span<const double> beta_grid) {
  return evar_argmax(dist, alpha, beta_grid).value;
}

/// n points geometrically spaced on [lo, hi].
inline std::vector<double> geometric_grid(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0 && hi > lo) || n < 2) throw std::invalid_argument("geometric_grid: need 0 < lo < hi, n >= 2");
  std::vector<double> g(n);
  const double step = std::log(hi / lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) g[i] = lo * std::exp(step * static_cast<double>(i));
  g.back() = hi;
  return g;
}

/// Value and derivatives of the ERM elicitation loss
/// l(z) = beta^-1 (exp(-beta z) - 1) + z.
struct LossEval {
  double value = 0.0;
  double first = 0.0;
  double second = 0.0;
};

inline LossEval erm_loss(double z, double beta) {
  const double em1 = std::expm1(-beta * z);
  return {em1 / beta + z, -em1, beta * (em1 + 1.0)};
}

/// ERM recovered as argmin_y E[l_beta(X - y)], by bisection on the
/// derivative E[exp(-beta (X - y))] - 1, which is increasing in y.
///
/// Deliberately uses plain exponentials and no log-sum-exp so it stays an
/// independent route to the closed form.
inline double erm_via_regression(const DiscreteDist& dist, double beta, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("erm_via_regression: tol must be > 0");
  if (!(beta > 0.0)) throw std::invalid_argument("erm_via_regression: beta must be > 0");
  const auto atoms = dist.atoms();
  auto slope = [&](double y) {
    double acc = 0.0;
    for (const auto& a : atoms) acc += a.prob * std::exp(-beta * (a.value - y));
    return acc - 1.0;
  };
  double lo = dist.min() - 1.0;
  double hi = dist.max() + 1.0;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (slope(mid) < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace riskq
