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

#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "riskq/beta_grid.hpp"
#include "riskq/mdp.hpp"
#include "riskq/mdp_io.hpp"
#include "riskq/oracle.hpp"
#include "riskq/parallel.hpp"
#include "riskq/qfunction.hpp"
#include "riskq/qlearn.hpp"
#include "riskq/sampler.hpp"
#include "riskq/zbounds.hpp"

namespace riskq {

/// Every risk level on the grid came out unbounded.
class NoBoundedRiskLevel : public std::runtime_error {
 public:
  NoBoundedRiskLevel() : std::runtime_error("no bounded risk level; decrease beta0 or delta") {}
};

enum class Beta0Source { Auto, User };

inline const char* to_string(Beta0Source s) { return s == Beta0Source::Auto ? "auto" : "user"; }

struct BetaEntry {
  double beta = 0.0;
  /// -inf when diverged.
  double h = -INFINITY;
  bool diverged = false;
  Policy policy;
};

struct EvarSolution {
  Policy policy;
  double beta_star = 0.0;
  double evar_value = -INFINITY;
  std::vector<BetaEntry> per_beta;
  BetaGrid grid;
  Beta0Source beta0_source = Beta0Source::User;
  /// Whether the delta-optimality statement is backed by the chosen beta0:
  /// true for the automatic choice, or a user value no larger than it.
  bool delta_guarantee_claimed = false;
};

namespace detail {

/// beta* = argmax of the finite h values, ties to the smaller beta.
inline void select_best(EvarSolution& sol) {
  const BetaEntry* best = nullptr;
  for (const auto& e : sol.per_beta) {
    if (e.diverged || !std::isfinite(e.h)) continue;
    if (best == nullptr || e.h > best->h) best = &e;
  }
  if (best == nullptr) throw NoBoundedRiskLevel();
  sol.policy = best->policy;
  sol.beta_star = best->beta;
  sol.evar_value = best->h;
}

}  // namespace detail

struct ModelBasedOptions {
  FixedPointOptions fixed_point;
  std::size_t threads = 1;
};

/// Exact per-level ERM solves over the grid, then the h maximization.
///
/// The ERM value is non-increasing in beta, so once a level is unbounded all
/// larger ones are too; they are reported as diverged without solving.
inline EvarSolution solve_evar_model_based(const Mdp& mdp, double alpha, double delta, double beta0,
                                           const ModelBasedOptions& opts = {}) {
  EvarSolution sol;
  sol.grid = build_beta_grid(beta0, delta, alpha);
  sol.beta0_source = Beta0Source::User;
  sol.delta_guarantee_claimed = false;
  const auto& betas = sol.grid.betas;
  const std::size_t n = betas.size();
  sol.per_beta.resize(n);

  std::atomic<std::size_t> first_unbounded{n};
  detail::parallel_for(n, opts.threads, [&](std::size_t i) {
    auto& e = sol.per_beta[i];
    e.beta = betas[i];
    e.diverged = true;
    if (i > first_unbounded.load()) return;
    const ErmSolution erm_sol = solve_erm_fixed_point(mdp, betas[i], opts.fixed_point);
    if (!erm_sol.bounded()) {
      std::size_t cur = first_unbounded.load();
      while (i < cur && !first_unbounded.compare_exchange_weak(cur, i)) {
      }
      return;
    }
    e.diverged = false;
    e.policy = erm_sol.policy;
    e.h = h_value(mdp, *erm_sol.q_star, betas[i], alpha);
  });
  for (std::size_t i = first_unbounded.load(); i < n; ++i) {
    sol.per_beta[i].diverged = true;
    sol.per_beta[i].h = -INFINITY;
    sol.per_beta[i].policy = Policy();
  }
  detail::select_best(sol);
  return sol;
}

struct ModelFreeConfig {
  /// Absent: beta0 from the return-range heuristic.
  std::optional<double> beta0;
  BehaviorPolicy behavior = UniformRandom{};
  std::uint64_t seed = 0;
  StepSchedule schedule;
  std::uint64_t n_samples = 200'000;
  StreamOptions stream;
  ReturnRangeMode range_mode = ReturnRangeMode::PerEpisode;
  ZBoxRule zbox_rule = ZBoxRule::MeanCentered;
  LearnerOptions learner;
};

struct ModelFreeResult {
  EvarSolution solution;
  QTable q;
  ZBoundEstimate estimate;
  ZBox zbox;
  /// beta0 the heuristic proposes; absent when the observed returns were all equal.
  std::optional<double> auto_beta0;
};

/// Greedy policy and h per level of a learned table, then beta*.
/// Throws NoBoundedRiskLevel when every slice diverged.
inline EvarSolution evar_from_qtable(const Mdp& mdp, const QTable& q, double alpha, BetaGrid grid) {
  if (grid.betas != q.betas()) throw std::invalid_argument("evar_from_qtable: grid does not match the table");
  EvarSolution sol;
  sol.grid = std::move(grid);
  for (std::size_t b = 0; b < q.n_betas(); ++b) {
    BetaEntry e;
    e.beta = q.beta(b);
    e.diverged = q.diverged(b);
    if (!e.diverged) {
      const QFunction slice = q.slice(b);
      e.policy = greedy_policy(mdp, slice);
      e.h = h_value(mdp, slice, e.beta, alpha);
    }
    sol.per_beta.push_back(std::move(e));
  }
  detail::select_best(sol);
  return sol;
}

/// Sample-based EVaR: one stream feeds the z-bound heuristic and then
/// Q-learning over every level of the grid; h uses the known mu.
inline ModelFreeResult solve_evar_model_free(const Mdp& mdp, double alpha, double delta,
                                             const ModelFreeConfig& cfg) {
  const SampleStream stream = generate_stream(mdp, cfg.behavior, cfg.seed, cfg.n_samples, cfg.stream);
  const ZBoundEstimate est = estimate_cd(mdp, stream.samples, cfg.schedule, cfg.range_mode);

  std::optional<double> auto_beta0;
  if (est.x_max > est.x_min) auto_beta0 = beta_zero(delta, est);
  if (!cfg.beta0 && !auto_beta0) throw DegenerateReturnRange();
  const double beta0 = cfg.beta0.value_or(auto_beta0.value_or(0.0));

  BetaGrid grid = build_beta_grid(beta0, delta, alpha);
  ZBox box = z_box(grid.betas, est, mdp.reward_sup_norm(), cfg.zbox_rule);
  QTable q = erm_q_learning(mdp, stream.samples, grid.betas, cfg.schedule, box, cfg.learner);

  EvarSolution sol = evar_from_qtable(mdp, q, alpha, std::move(grid));
  sol.beta0_source = cfg.beta0 ? Beta0Source::User : Beta0Source::Auto;
  sol.delta_guarantee_claimed = !cfg.beta0 || (auto_beta0 && *cfg.beta0 <= *auto_beta0);
  return {std::move(sol), std::move(q), est, std::move(box), auto_beta0};
}

namespace detail {

inline nlohmann::json real_or_null(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(); }

}  // namespace detail

/// Non-finite h values are written as null.
inline nlohmann::json evar_solution_to_json(const EvarSolution& sol) {
  nlohmann::json doc;
  doc["policy"] = policy_to_json(sol.policy);
  doc["beta_star"] = sol.beta_star;
  doc["evar_value"] = sol.evar_value;
  doc["alpha"] = sol.grid.alpha;
  doc["delta"] = sol.grid.delta;
  doc["beta0"] = sol.grid.beta0;
  doc["beta0_source"] = to_string(sol.beta0_source);
  doc["K"] = sol.grid.K();
  doc["K_lower_bound"] = sol.grid.k_lower_bound();
  doc["delta_guarantee_claimed"] = sol.delta_guarantee_claimed;
  auto rows = nlohmann::json::array();
  for (const auto& e : sol.per_beta) {
    rows.push_back({{"beta", e.beta}, {"h", detail::real_or_null(e.h)}, {"diverged", e.diverged}});
  }
  doc["per_beta"] = std::move(rows);
  return doc;
}

/// CSV `beta,h,diverged`; diverged rows print h as -inf.
inline void write_h_curve_csv(std::ostream& os, const EvarSolution& sol) {
  os << "beta,h,diverged\n";
  const auto old = os.precision(17);
  for (const auto& e : sol.per_beta) {
    os << e.beta << ',';
    if (std::isfinite(e.h)) {
      os << e.h;
    } else {
      os << "-inf";
    }
    os << ',' << (e.diverged ? 1 : 0) << '\n';
  }
  os.precision(old);
}

}  // namespace riskq
