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
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "riskq/mdp.hpp"
#include "riskq/rng.hpp"

namespace riskq {

/// Row-major dense matrix; used for the small non-sink blocks P_pi.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

/// Entry (i, j) = p(s_i, pi(s_i), s_j) over non-sink states in index order.
inline DenseMatrix policy_submatrix(const Mdp& mdp, const Policy& policy) {
  check_policy(mdp, policy);
  const auto states = mdp.non_sink_states();
  std::vector<std::size_t> row_of(mdp.n_states(), 0);
  for (std::size_t i = 0; i < states.size(); ++i) row_of[states[i]] = i;
  DenseMatrix m(states.size(), states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    for (const auto& o : mdp.outcomes(states[i], policy[states[i]])) {
      if (!mdp.is_sink(o.next)) m(i, row_of[o.next]) += o.prob;
    }
  }
  return m;
}

/// Result of a power iteration on a nonnegative matrix.
///
/// `upper` and `lower` are Collatz-Wielandt bounds on rho(P), from the ratios
/// (Ax)_i / x_i of the lazy matrix A below mapped back through 2t - 1.
/// `estimate` is the last growth ratio, mapped the same way.
struct SpectralEstimate {
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  std::size_t iterations = 0;
};

/// Power iteration on the lazy matrix (I + P) / 2, from the all-ones vector
/// with max-normalization. Its Perron root is (1 + rho) / 2, it has no
/// period, and the iterate stays positive, so the ratio bounds are valid and
/// tighten even when P itself is periodic (a random walk, say).
///
/// Stops early once the bounds certify which side of `threshold` rho lies.
inline SpectralEstimate spectral_radius(const DenseMatrix& m, std::size_t max_iterations = 10'000,
                                        double threshold = 1.0 - 1e-9) {
  const std::size_t n = m.rows;
  SpectralEstimate est;
  if (n == 0) return est;
  std::vector<std::size_t> start{0};
  std::vector<std::pair<std::size_t, double>> entries;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (m(i, j) != 0.0) entries.emplace_back(j, m(i, j));
    }
    start.push_back(entries.size());
  }
  std::vector<double> x(n, 1.0);
  std::vector<double> y(n, 0.0);
  const double lazy_threshold = 0.5 * (1.0 + threshold);
  for (std::size_t k = 0; k < max_iterations; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t e = start[i]; e < start[i + 1]; ++e) acc += entries[e].second * x[entries[e].first];
      y[i] = 0.5 * (x[i] + acc);
    }
    double lo = INFINITY;
    double hi = 0.0;
    double norm_x = 0.0;
    double norm_y = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      norm_x = std::max(norm_x, x[i]);
      norm_y = std::max(norm_y, y[i]);
      const double ratio = y[i] / x[i];
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
    est.iterations = k + 1;
    est.estimate = std::max(0.0, 2.0 * (norm_y / norm_x) - 1.0);
    est.lower = std::max(0.0, 2.0 * lo - 1.0);
    est.upper = std::max(0.0, 2.0 * hi - 1.0);
    for (std::size_t i = 0; i < n; ++i) x[i] = y[i] / norm_y;
    if (hi < lazy_threshold || lo >= lazy_threshold) return est;
  }
  return est;
}

enum class TransienceMode { Exhaustive, Sampled };

struct Violation {
  std::string rule;
  std::string location;
  std::string message;
};

struct ValidationReport {
  bool passed = true;
  std::vector<Violation> violations;
  TransienceMode mode = TransienceMode::Exhaustive;
  std::uint64_t checked_policies = 0;
  /// Largest upper bound seen; iteration stops once a policy is certified,
  /// so this can sit just under the threshold.
  double max_spectral_radius = 0.0;
  /// Offending policies, parallel to `violations`.
  std::vector<Policy> failing_policies;
};

struct ExhaustiveCheck {};
struct SampledCheck {
  std::uint64_t policies = 1000;
  std::uint64_t seed = 0;
};
using TransienceCheck = std::variant<ExhaustiveCheck, SampledCheck>;

/// Largest policy count the exhaustive check will enumerate.
inline constexpr std::uint64_t kExhaustivePolicyCap = 1'000'000;

namespace detail {

// n_actions^(n_non_sink), saturating at cap + 1.
inline std::uint64_t policy_count(const Mdp& mdp, std::uint64_t cap) {
  std::uint64_t count = 1;
  for (std::size_t i = 0; i + 1 < mdp.n_states(); ++i) {
    if (count > cap / mdp.n_actions()) return cap + 1;
    count *= mdp.n_actions();
  }
  return count;
}

inline std::string describe_policy(const Mdp& mdp, const Policy& policy) {
  std::string out = "[";
  bool first = true;
  for (StateId s : mdp.non_sink_states()) {
    if (!first) out += ",";
    out += std::to_string(policy[s]);
    first = false;
  }
  return out + "]";
}

inline void check_one(const Mdp& mdp, const Policy& policy, ValidationReport& report) {
  const auto est = spectral_radius(policy_submatrix(mdp, policy));
  ++report.checked_policies;
  report.max_spectral_radius = std::max(report.max_spectral_radius, est.upper);
  if (est.upper >= 1.0 - 1e-9) {
    report.passed = false;
    report.violations.push_back({"transience", "policy " + describe_policy(mdp, policy),
                                 "spectral radius of non-sink block is " + std::to_string(est.upper) +
                                     " (>= 1 - 1e-9)"});
    report.failing_policies.push_back(policy);
  }
}

}  // namespace detail

/// Checks that every deterministic stationary policy reaches the sink, via
/// the spectral radius of its non-sink block.
///
/// Exhaustive mode enumerates all policies and refuses models with more
/// than kExhaustivePolicyCap of them; sampled mode draws policies uniformly
/// and only certifies the ones it drew.
inline ValidationReport validate_transience(const Mdp& mdp, const TransienceCheck& check) {
  ValidationReport report;
  const auto states = mdp.non_sink_states();
  if (std::holds_alternative<ExhaustiveCheck>(check)) {
    report.mode = TransienceMode::Exhaustive;
    const std::uint64_t total = detail::policy_count(mdp, kExhaustivePolicyCap);
    if (total > kExhaustivePolicyCap) {
      throw std::invalid_argument("exhaustive transience check needs more than " +
                                  std::to_string(kExhaustivePolicyCap) + " policies; use sampled mode");
    }
    Policy policy(mdp.n_states(), 0);
    for (std::uint64_t k = 0; k < total; ++k) {
      std::uint64_t code = k;
      for (StateId s : states) {
        policy[s] = code % mdp.n_actions();
        code /= mdp.n_actions();
      }
      detail::check_one(mdp, policy, report);
    }
  } else {
    const auto& sampled = std::get<SampledCheck>(check);
    report.mode = TransienceMode::Sampled;
    RandomStream rng(sampled.seed, stream_tag::kPolicySample);
    Policy policy(mdp.n_states(), 0);
    for (std::uint64_t k = 0; k < sampled.policies; ++k) {
      for (StateId s : states) policy[s] = rng.uniform_index(mdp.n_actions());
      detail::check_one(mdp, policy, report);
    }
  }
  return report;
}

inline const char* to_string(TransienceMode mode) {
  return mode == TransienceMode::Exhaustive ? "exhaustive" : "sampled";
}

}  // namespace riskq
