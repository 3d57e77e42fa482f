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

#include <cmath>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "riskq.hpp"

namespace riskq {
namespace {

ZBox wide_box(std::size_t n, double m = 1e6) { return {std::vector<double>(n, -m), std::vector<double>(n, m)}; }

TransitionSample sample(StateId s, ActionId a, StateId next) { return {s, a, next, 0, 0, 1}; }

TEST(TdResidual, ZeroTableToSink) {
  const Mdp m = testing::one_step_mdp(1.0);
  const QTable q(m, {0.5});
  EXPECT_EQ(td_residual(q, sample(0, 0, 1), 1.0, 0), 1.0);
}

TEST(TdResidual, FixedPointResidual) {
  const Mdp m = testing::chain_mdp();
  QTable q(m, {0.5});
  q.value(0, 0, 0) = 2.0;
  q.value(1, 0, 0) = 1.0;
  EXPECT_EQ(td_residual(q, sample(0, 0, 1), 1.0, 0), 0.0);
}

TEST(TdResidual, MatchesRawRecomputation) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const Mdp m = make_random_transient(4, 3, 0.2, 1);
  QTable q(m, {0.1, 1.0});
  for (StateId s = 0; s < 4; ++s)
    for (ActionId a = 0; a < 3; ++a)
      for (std::size_t b = 0; b < 2; ++b) q.value(s, a, b) = u(gen);
  for (StateId s = 0; s < 4; ++s) {
    for (ActionId a = 0; a < 3; ++a) {
      for (const auto& o : m.outcomes(s, a)) {
        for (std::size_t b = 0; b < 2; ++b) {
          double best = 0.0;
          if (o.next != m.sink()) {
            best = q.value(o.next, 0, b);
            for (ActionId k = 1; k < 3; ++k) best = std::max(best, q.value(o.next, k, b));
          }
          EXPECT_EQ(td_residual(q, sample(s, a, o.next), o.reward, b), o.reward + best - q.value(s, a, b));
        }
      }
    }
  }
}

TEST(Update, GradientFormBitForBit) {
  const Mdp m = make_random_transient(3, 2, 0.3, 5);
  const std::vector<double> betas{0.05, 0.7, 3.0};
  QTable q(m, betas);
  q.value(1, 0, 0) = 0.3;
  q.value(1, 1, 1) = -0.4;
  q.value(0, 1, 2) = 0.2;
  const TransitionSample x = sample(0, 1, 1);
  const double r = m.observed_reward(0, 1, 1);
  std::vector<double> expect(3);
  for (std::size_t b = 0; b < 3; ++b) {
    const double z = td_residual(q, x, r, b);
    expect[b] = q.value(0, 1, b) + eta(StepSchedule(), 1) * (1.0 / betas[b]) * erm_loss(z, betas[b]).first;
  }
  const std::vector<TransitionSample> stream{x};
  erm_q_learning_update(m, stream, StepSchedule(), wide_box(3), q);
  for (std::size_t b = 0; b < 3; ++b) EXPECT_EQ(q.value(0, 1, b), expect[b]);
}

TEST(Update, ExponentialFormAgrees) {
  const Mdp m = testing::coin_mdp();
  QTable q(m, {2.0});
  q.value(0, 0, 0) = 0.25;
  const std::vector<TransitionSample> stream{sample(0, 0, 2)};
  LearnerOptions raw;
  raw.normalize_by_beta = false;
  erm_q_learning_update(m, stream, StepSchedule(), wide_box(1), q, raw);
  // q - eta (exp(-beta z) - 1) with z = 1 - 0.25 and eta = 1.
  EXPECT_NEAR(q.value(0, 0, 0), 0.25 - (std::exp(-2.0 * 0.75) - 1.0), 1e-15);
}

TEST(Learn, DeterministicPairConverges) {
  const Mdp m = testing::one_step_mdp(1.0);
  const auto st = generate_stream(m, UniformRandom{}, 1, 10'000);
  const std::vector<double> betas{0.01, 0.5, 2.0};
  const QTable q = erm_q_learning(m, st.samples, betas, StepSchedule(0.7), wide_box(3));
  for (std::size_t b = 0; b < 3; ++b) EXPECT_NEAR(q.value(0, 0, b), 1.0, 1e-3) << betas[b];
}

TEST(Learn, CoinConvergesToErm) {
  const Mdp m = testing::coin_mdp();
  const auto st = generate_stream(m, UniformRandom{}, 2, 200'000);
  const QTable q = erm_q_learning(m, st.samples, {1.0}, StepSchedule(0.7), wide_box(1));
  EXPECT_NEAR(q.value(0, 0, 0), 0.3799, 0.02);
}

TEST(Learn, SelfLoopDivergesAboveLog2) {
  const Mdp m = testing::self_loop_mdp();
  const StepSchedule sch(0.7);
  const auto st = generate_stream(m, UniformRandom{}, 3, 200'000);
  const ZBoundEstimate est = estimate_cd(m, st.samples, sch);
  const std::vector<double> betas{0.5, 1.0};
  const QTable q = erm_q_learning(m, st.samples, betas, sch, z_box(betas, est, m.reward_sup_norm()));
  EXPECT_FALSE(q.diverged(0));
  EXPECT_TRUE(q.diverged(1));
  EXPECT_EQ(q.live_count(), 1u);
}

TEST(Learn, SelfLoopDivergesAboveLog2WithReturnRangeBox) {
  const Mdp m = testing::self_loop_mdp();
  const StepSchedule sch(0.7);
  const auto st = generate_stream(m, UniformRandom{}, 3, 200'000);
  const ZBoundEstimate est = estimate_cd(m, st.samples, sch);
  const std::vector<double> betas{0.5, 1.0};
  const QTable q =
      erm_q_learning(m, st.samples, betas, sch, z_box(betas, est, m.reward_sup_norm(), ZBoxRule::ReturnRange));
  EXPECT_FALSE(q.diverged(0));
  EXPECT_TRUE(q.diverged(1));
}

TEST(Learn, DivergenceIsPermanent) {
  const Mdp m = testing::self_loop_mdp();
  const auto st = generate_stream(m, UniformRandom{}, 4, 20'000);
  const std::vector<double> betas{0.2, 1.0};
  ZBox box = wide_box(2);
  box.z_min[1] = -1e-3;
  box.z_max[1] = 1e-3;
  std::vector<double> first_seen;
  std::uint64_t checks = 0;
  LearnerOptions opts;
  opts.checkpoint_every = 100;
  opts.on_checkpoint = [&](std::uint64_t, const QTable& q) {
    ASSERT_TRUE(q.diverged(1));
    if (first_seen.empty()) first_seen.assign(q.levels(0, 0).begin(), q.levels(0, 0).end());
    EXPECT_EQ(q.value(0, 0, 1), first_seen[1]);
    ++checks;
  };
  const QTable q = erm_q_learning(m, st.samples, betas, StepSchedule(), box, opts);
  EXPECT_EQ(checks, 200u);
  EXPECT_EQ(q.value(0, 0, 1), 0.0);
  EXPECT_FALSE(q.diverged(0));
}

TEST(Learn, Errors) {
  const Mdp m = testing::chain_mdp();
  const auto st = generate_stream(m, UniformRandom{}, 0, 10);
  EXPECT_THROW(erm_q_learning(m, st.samples, {0.5, 1.0}, StepSchedule(), wide_box(1)), std::invalid_argument);
  EXPECT_THROW(erm_q_learning(m, {}, {0.5}, StepSchedule(), wide_box(1)), std::invalid_argument);
  EXPECT_THROW(QTable(m, {}), std::invalid_argument);
  EXPECT_THROW(QTable(m, {0.0}), std::invalid_argument);
}

TEST(Learn, ReadsRewardsFromModel) {
  const Mdp m = testing::chain_mdp();
  // A transition the model does not have.
  const std::vector<TransitionSample> bad{sample(0, 0, 0)};
  EXPECT_THROW(erm_q_learning(m, bad, {0.5}, StepSchedule(), wide_box(1)), std::invalid_argument);
}

// The convergence fixtures and the sup-norm error against the oracle.
std::vector<Mdp> bounded_fixtures() {
  return {make_gamblers_ruin(6, 0.7), make_random_transient(3, 2, 0.5, 1), make_random_transient(3, 2, 0.5, 2),
          make_random_transient(3, 2, 0.5, 3)};
}

TEST(Learn, ConvergesToOracleOnBoundedFixtures) {
  const std::vector<double> betas{0.1, 0.5, 1.0, 2.0};
  const StepSchedule sch(0.65);
  const auto bounded_fixtures_storage = bounded_fixtures();
  for (const Mdp& m : bounded_fixtures_storage) {
    std::vector<QFunction> exact;
    for (double b : betas) exact.push_back(*solve_erm_fixed_point(m, b).q_star);
    int good = 0;
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
      const auto st = generate_stream(m, UniformRandom{}, seed, 200'000);
      const auto est = estimate_cd(m, st.samples, sch);
      const QTable q = erm_q_learning(m, st.samples, betas, sch,
                                      z_box(betas, est, m.reward_sup_norm(), ZBoxRule::ReturnRange));
      double worst = 0.0;
      for (std::size_t b = 0; b < betas.size(); ++b) {
        worst = q.diverged(b) ? INFINITY : std::max(worst, sup_distance(m, q.slice(b), exact[b]));
      }
      good += worst <= 0.05 ? 1 : 0;
    }
    EXPECT_GE(good, 5) << "fixture " << &m - bounded_fixtures_storage.data();
  }
}

TEST(Learn, ErrorTrendNonIncreasing) {
  const Mdp m = make_gamblers_ruin(6, 0.7);
  const std::vector<double> betas{0.5};
  const QFunction exact = *solve_erm_fixed_point(m, 0.5).q_star;
  const auto st = generate_stream(m, UniformRandom{}, 7, 200'000);
  std::vector<double> err;
  LearnerOptions opts;
  opts.checkpoint_every = 1000;
  opts.on_checkpoint = [&](std::uint64_t, const QTable& q) { err.push_back(sup_distance(m, q.slice(0), exact)); };
  erm_q_learning(m, st.samples, betas, StepSchedule(0.65), wide_box(1), opts);
  ASSERT_EQ(err.size(), 200u);
  std::vector<double> smooth;
  for (std::size_t i = 0; i + 10 <= err.size(); i += 10) {
    double s = 0.0;
    for (std::size_t k = i; k < i + 10; ++k) s += err[k];
    smooth.push_back(s / 10.0);
  }
  for (std::size_t i = 1; i < smooth.size(); ++i) EXPECT_LE(smooth[i], smooth[i - 1]) << "window " << i;
}

TEST(Learn, MonotoneAcrossGrid) {
  const Mdp m = make_gamblers_ruin(6, 0.7);
  const std::vector<double> betas{0.1, 0.3, 0.9, 2.7};
  const auto st = generate_stream(m, UniformRandom{}, 8, 200'000);
  const QTable q = erm_q_learning(m, st.samples, betas, StepSchedule(0.65), wide_box(4));
  for (StateId s = 0; s < m.n_states(); ++s) {
    for (ActionId a = 0; a < m.n_actions(); ++a) {
      for (std::size_t b = 1; b < betas.size(); ++b) EXPECT_GE(q.value(s, a, b - 1), q.value(s, a, b) - 0.05);
    }
  }
}

TEST(QTableCsv, Format) {
  const Mdp m = testing::one_step_mdp(1.0);
  QTable q(m, {0.5, 1.0});
  q.value(0, 0, 0) = 0.25;
  q.mark_diverged(1);
  std::ostringstream os;
  write_qtable_csv(os, m, q);
  EXPECT_EQ(os.str(), "s,a,beta,q,diverged\n0,0,0.5,0.25,0\n0,0,1,-inf,1\n");
}

}  // namespace
}  // namespace riskq
