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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "riskq.hpp"

namespace riskq {
namespace {

using testing::chain_mdp;
using testing::coin_mdp;
using testing::self_loop_mdp;

Mdp small_random(std::uint64_t seed) { return make_random_transient(3, 2, 0.3, seed); }

TEST(BellmanApply, DeterministicOneStep) {
  const Mdp m = testing::one_step_mdp(2.0);
  QFunction q(m);
  q(0, 0) = -7.0;
  EXPECT_DOUBLE_EQ(bellman_apply(m, q, 0.3)(0, 0), 2.0);
}

TEST(BellmanApply, CoinRewardSplit) {
  const Mdp m = coin_mdp();
  EXPECT_NEAR(bellman_apply(m, QFunction(m), 1.0)(0, 0), 0.379885, 1e-6);
}

TEST(BellmanApply, SinkRowStaysZero) {
  const Mdp m = chain_mdp();
  QFunction q(m.n_states(), m.n_actions(), 5.0);
  q(m.sink(), 0) = 0.0;
  EXPECT_EQ(bellman_apply(m, q, 1.0)(m.sink(), 0), 0.0);
}

TEST(BellmanApply, MatchesReference) {
  std::mt19937_64 gen(1);
  for (std::uint64_t i = 0; i < 100; ++i) {
    const Mdp m = small_random(i);
    const QFunction q = testing::random_q(m, gen);
    for (double beta : {0.1, 1.0, 4.0}) {
      EXPECT_LE(sup_distance(m, bellman_apply(m, q, beta), testing::reference_bellman(m, q, beta)), 1e-10);
    }
  }
}

TEST(BellmanApply, RegressionFormAgrees) {
  std::mt19937_64 gen(2);
  for (std::uint64_t i = 0; i < 100; ++i) {
    const Mdp m = small_random(100 + i);
    const QFunction q = testing::random_q(m, gen);
    for (double beta : {0.2, 2.0}) {
      EXPECT_LE(sup_distance(m, regression_bellman_apply(m, q, beta), bellman_apply(m, q, beta)), 1e-6);
    }
  }
}

TEST(BellmanApply, Monotone) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> bump(0.0, 1.0);
  for (std::uint64_t i = 0; i < 100; ++i) {
    const Mdp m = small_random(200 + i);
    const QFunction x = testing::random_q(m, gen);
    QFunction y = x;
    for (StateId s = 0; s + 1 < m.n_states(); ++s) {
      for (ActionId a = 0; a < m.n_actions(); ++a) y(s, a) += bump(gen);
    }
    const QFunction bx = bellman_apply(m, x, 1.5);
    const QFunction by = bellman_apply(m, y, 1.5);
    for (StateId s = 0; s < m.n_states(); ++s) {
      for (ActionId a = 0; a < m.n_actions(); ++a) EXPECT_LE(bx(s, a), by(s, a) + 1e-12);
    }
  }
}

TEST(BellmanApply, ConstantShift) {
  std::mt19937_64 gen(4);
  for (int i = 0; i < 100; ++i) {
    const Mdp m = testing::closed_random(gen);
    const QFunction q = testing::random_q(m, gen);
    for (double g : {0.1, 1.0, 10.0}) {
      const QFunction lhs = bellman_apply(m, testing::shifted(m, q, g), 0.7);
      const QFunction rhs = testing::shifted(m, bellman_apply(m, q, 0.7), g);
      EXPECT_LE(sup_distance(m, lhs, rhs), 1e-10);
    }
  }
}

TEST(BellmanApply, ConstantShiftOnFullSupport) {
  // Without a sink in the picture the shift law is exact: add g to the
  // continuation values of every outcome, sink included.
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 100; ++i) {
    const auto d = testing::random_dist(gen);
    for (double g : {0.1, 1.0, 10.0}) {
      std::vector<Atom> moved(d.atoms().begin(), d.atoms().end());
      for (auto& a : moved) a.value += g;
      EXPECT_NEAR(erm(DiscreteDist(moved), 0.7), erm(d, 0.7) + g, 1e-10);
    }
  }
}

TEST(FixedPoint, Chain) {
  const Mdp m = chain_mdp();
  for (double beta : {0.01, 1.0, 20.0}) {
    const auto sol = solve_erm_fixed_point(m, beta);
    ASSERT_TRUE(sol.bounded());
    EXPECT_NEAR((*sol.q_star)(0, 0), 3.0, 1e-12);
    EXPECT_NEAR((*sol.q_star)(1, 0), 2.0, 1e-12);
    EXPECT_EQ((*sol.v_star)[m.sink()], 0.0);
  }
}

TEST(FixedPoint, SelfLoopClosedForm) {
  const auto sol = solve_erm_fixed_point(self_loop_mdp(), 0.5);
  ASSERT_TRUE(sol.bounded());
  EXPECT_NEAR((*sol.q_star)(0, 0), -3.0924, 1e-4);
  EXPECT_NEAR((*sol.q_star)(0, 0), testing::self_loop_erm(0.5), 1e-8);
}

TEST(FixedPoint, SelfLoopUnboundedAboveLog2) {
  const auto sol = solve_erm_fixed_point(self_loop_mdp(), 1.0);
  EXPECT_EQ(sol.status, SolveStatus::Unbounded);
  EXPECT_FALSE(sol.q_star.has_value());
  EXPECT_FALSE(sol.v_star.has_value());
  EXPECT_STREQ(to_string(sol.status), "unbounded");
}

TEST(FixedPoint, ValueIsMaxOfQAndPolicyGreedy) {
  const Mdp m = make_gamblers_ruin(6, 0.7);
  const auto sol = solve_erm_fixed_point(m, 1.0);
  ASSERT_TRUE(sol.bounded());
  for (StateId s = 0; s < m.n_states(); ++s) {
    double best = (*sol.q_star)(s, 0);
    ActionId arg = 0;
    for (ActionId a = 1; a < m.n_actions(); ++a) {
      if ((*sol.q_star)(s, a) > best) {
        best = (*sol.q_star)(s, a);
        arg = a;
      }
    }
    EXPECT_EQ((*sol.v_star)[s], best);
    if (!m.is_sink(s)) {
      EXPECT_EQ(sol.policy[s], arg);
    }
  }
}

TEST(FixedPoint, Errors) {
  const Mdp m = chain_mdp();
  FixedPointOptions bad_tol;
  bad_tol.tol = 0.0;
  EXPECT_THROW(solve_erm_fixed_point(m, 1.0, bad_tol), std::invalid_argument);
  FixedPointOptions bad_iter;
  bad_iter.max_iter = 0;
  EXPECT_THROW(solve_erm_fixed_point(m, 1.0, bad_iter), std::invalid_argument);
}

TEST(FixedPoint, UniqueFromPerturbedStart) {
  std::mt19937_64 gen(6);
  std::uniform_real_distribution<double> noise(-1.0, 1.0);
  for (std::uint64_t i = 0; i < 20; ++i) {
    const Mdp m = small_random(400 + i);
    const auto base = solve_erm_fixed_point(m, 1.0);
    ASSERT_TRUE(base.bounded());
    QFunction start = *base.q_star;
    for (StateId s = 0; s + 1 < m.n_states(); ++s) {
      for (ActionId a = 0; a < m.n_actions(); ++a) start(s, a) += noise(gen);
    }
    FixedPointOptions opts;
    opts.initial = start;
    const auto again = solve_erm_fixed_point(m, 1.0, opts);
    ASSERT_TRUE(again.bounded());
    EXPECT_LE(sup_distance(m, *again.q_star, *base.q_star), 10 * opts.tol);
  }
}

void expect_matches_brute_force(const Mdp& m, double beta) {
  const auto sol = solve_erm_fixed_point(m, beta);
  ASSERT_TRUE(sol.bounded());
  const auto bf = brute_force_erm_return(m, sol.policy, beta, 1000);
  ASSERT_TRUE(bf.bounded);
  for (StateId s = 0; s < m.n_states(); ++s) {
    EXPECT_NEAR((*sol.v_star)[s], bf.per_state[s], 1e-4) << "s=" << s << " beta=" << beta;
  }
}

TEST(FixedPoint, MatchesBruteForce) {
  expect_matches_brute_force(self_loop_mdp(), 0.5);
  for (double beta : {0.1, 1.0, 5.0}) expect_matches_brute_force(make_gamblers_ruin(6, 0.7), beta);
  for (std::uint64_t i = 0; i < 10; ++i) expect_matches_brute_force(small_random(500 + i), 1.0);
}

TEST(HValue, DegenerateStart) {
  const Mdp m = testing::one_step_mdp(2.0);
  QFunction q(m);
  q(0, 0) = 2.0;
  EXPECT_NEAR(h_value(m, q, 1.0, std::exp(-1.0)), 1.0, 1e-12);
}

TEST(HValue, UniformOverTwo) {
  std::vector<Transition> tr{{0, 0, 2, 1.0, 0.0}, {1, 0, 2, 1.0, 1.0}};
  const Mdp m(3, 1, 2, {0.5, 0.5, 0.0}, tr);
  QFunction q(m);
  q(1, 0) = 1.0;
  EXPECT_NEAR(h_value(m, q, 1.0, 0.5), -0.313262, 1e-6);
}

TEST(HValue, NearOneApproachesErm) {
  std::vector<Transition> tr{{0, 0, 2, 1.0, 0.0}, {1, 0, 2, 1.0, 1.0}};
  const Mdp m(3, 1, 2, {0.5, 0.5, 0.0}, tr);
  QFunction q(m);
  q(1, 0) = 1.0;
  EXPECT_NEAR(h_value(m, q, 1.0, 0.999999), testing::coin_erm(1.0), 1e-5);
}

TEST(HValue, Errors) {
  const Mdp m = chain_mdp();
  EXPECT_THROW(h_value(m, QFunction(m), 1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(h_value(m, QFunction(m), 1.0, 0.0), std::invalid_argument);
}

TEST(ApplyH, FixedPoint) {
  for (std::uint64_t i = 0; i < 20; ++i) {
    const Mdp m = small_random(600 + i);
    const auto sol = solve_erm_fixed_point(m, 1.0, {1e-13, 100'000, std::nullopt});
    ASSERT_TRUE(sol.bounded());
    EXPECT_LE(sup_distance(m, apply_H(m, *sol.q_star, 1.0, {0.5}), *sol.q_star), 1e-8);
  }
}

TEST(ApplyH, DeterministicFixedPointUnchanged) {
  const Mdp m = testing::one_step_mdp(1.5);
  QFunction q(m);
  q(0, 0) = 1.5;
  EXPECT_EQ(apply_H(m, q, 2.0, {0.3})(0, 0), 1.5);
}

TEST(ApplyH, MonotoneOnRandomPairs) {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> bump(0.0, 0.5);
  const double beta = 1.0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const Mdp m = small_random(700 + i);
    const QFunction x = testing::random_q(m, gen, -1.0, 1.0);
    QFunction y = x;
    for (StateId s = 0; s + 1 < m.n_states(); ++s) {
      for (ActionId a = 0; a < m.n_actions(); ++a) y(s, a) += bump(gen);
    }
    const auto [zx_lo, zx_hi] = testing::z_range(m, x, x);
    const auto [zy_lo, zy_hi] = testing::z_range(m, y, y);
    const double xi = max_stable_xi(beta, std::min(zx_lo, zy_lo) - 1.0);
    const QFunction hx = apply_H(m, x, beta, {xi});
    const QFunction hy = apply_H(m, y, beta, {xi});
    for (StateId s = 0; s < m.n_states(); ++s) {
      for (ActionId a = 0; a < m.n_actions(); ++a) EXPECT_LE(hx(s, a), hy(s, a) + 1e-12);
    }
    (void)zx_hi;
    (void)zy_hi;
  }
}

TEST(ApplyH, ConstantShiftBracket) {
  std::mt19937_64 gen(8);
  const double beta = 1.0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const Mdp m = small_random(800 + i);
    const QFunction q = testing::random_q(m, gen, -1.0, 1.0);
    const auto [lo, hi] = testing::z_range(m, q, q);
    const double xi = max_stable_xi(beta, lo - 1.0);
    for (double g : {0.1, 1.0}) {
      const QFunction hq = apply_H(m, q, beta, {xi});
      const QFunction hqg = apply_H(m, testing::shifted(m, q, g), beta, {xi});
      for (StateId s = 0; s + 1 < m.n_states(); ++s) {
        for (ActionId a = 0; a < m.n_actions(); ++a) {
          EXPECT_LE(hqg(s, a), hq(s, a) + g + 1e-10);
          EXPECT_GE(hqg(s, a), hq(s, a) - 1e-10);
        }
      }
    }
    (void)hi;
  }
}

TEST(ApplyH, InterpolatesTowardBellman) {
  std::mt19937_64 gen(9);
  for (std::uint64_t i = 0; i < 100; ++i) {
    const Mdp m = small_random(900 + i);
    const double beta = 0.8;
    const QFunction q = testing::random_q(m, gen, -1.0, 1.0);
    const QFunction bq = bellman_apply(m, q, beta);
    const auto [z_lo, z_hi] = testing::z_range(m, q, bq);
    const double xi = max_stable_xi(beta, z_lo);
    const QFunction hq = apply_H(m, q, beta, {xi});
    for (StateId s = 0; s + 1 < m.n_states(); ++s) {
      for (ActionId a = 0; a < m.n_actions(); ++a) {
        const double gap = bq(s, a) - q(s, a);
        if (std::abs(gap) < 1e-9) continue;
        const double lambda = (hq(s, a) - q(s, a)) / gap;
        EXPECT_GE(lambda, xi * beta * std::exp(-beta * z_hi) - 1e-9);
        EXPECT_LE(lambda, xi * beta * std::exp(-beta * z_lo) + 1e-9);
      }
    }
  }
}

TEST(ApplyH, RejectsNonPositiveStep) {
  const Mdp m = chain_mdp();
  EXPECT_THROW(apply_H(m, QFunction(m), 1.0, {0.0}), std::invalid_argument);
}

TEST(BruteForce, ChainTotal) {
  const Mdp m = chain_mdp();
  const auto r = brute_force_erm_return(m, Policy(m.n_states(), 0), 3.0, 5);
  EXPECT_NEAR(r.value, 3.0, 1e-12);
  EXPECT_TRUE(r.bounded);
}

TEST(BruteForce, SelfLoopHorizon200) {
  const Mdp m = self_loop_mdp();
  EXPECT_NEAR(brute_force_erm_return(m, Policy(m.n_states(), 0), 0.5, 200).value, -3.0924, 1e-4);
}

TEST(BruteForce, HorizonOneIsOneStepErm) {
  for (std::uint64_t i = 0; i < 20; ++i) {
    const Mdp m = small_random(1000 + i);
    const Policy pi(m.n_states(), 1);
    const auto r = brute_force_erm_return(m, pi, 1.3, 1);
    for (StateId s = 0; s + 1 < m.n_states(); ++s) {
      std::vector<Atom> atoms;
      for (const auto& o : m.outcomes(s, 1)) atoms.push_back({o.reward, o.prob});
      EXPECT_NEAR(r.per_state[s], testing::direct_erm(DiscreteDist(atoms), 1.3), 1e-10);
    }
  }
}

TEST(BruteForce, Errors) {
  const Mdp m = chain_mdp();
  EXPECT_THROW(brute_force_erm_return(m, Policy(m.n_states(), 0), 1.0, 0), std::invalid_argument);
  EXPECT_THROW(brute_force_erm_return(m, Policy(m.n_states(), 0), 0.0, 3), std::invalid_argument);
}

}  // namespace
}  // namespace riskq
