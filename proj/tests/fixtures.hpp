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

// Small hand-built MDPs shared by the unit and acceptance tests.

#pragma once

#include <cmath>
#include <vector>

#include "riskq.hpp"

namespace riskq::testing {

/// 0 -> 1 -> sink, one action, rewards 1 then 2.
inline Mdp chain_mdp() {
  std::vector<Transition> tr{{0, 0, 1, 1.0, 1.0}, {1, 0, 2, 1.0, 2.0}};
  return Mdp(3, 1, 2, {1.0, 0.0, 0.0}, tr);
}

/// One state that stays w.p. 0.5 and exits w.p. 0.5, paying -1 per step.
inline Mdp self_loop_mdp() {
  std::vector<Transition> tr{{0, 0, 0, 0.5, -1.0}, {0, 0, 1, 0.5, -1.0}};
  return Mdp(2, 1, 1, {1.0, 0.0}, tr);
}

/// ERM of the self-loop return -N, N ~ Geometric(1/2) on {1, 2, ...}.
inline double self_loop_erm(double beta) {
  const double m = 0.5 * std::exp(beta);
  return -std::log(m / (1.0 - m)) / beta;
}

/// One state; action 0 pays 1 surely, action 1 pays 0 or 2 evenly.
inline Mdp two_arm_mdp() {
  // Arm B needs two distinct next states, so it passes through state 1 or
  // 2 (paying 0 or 2 on the way) and then exits.
  std::vector<Transition> tr{{0, 0, 3, 1.0, 1.0}, {0, 1, 1, 0.5, 0.0}, {0, 1, 2, 0.5, 2.0},
                             {1, 0, 3, 1.0, 0.0}, {1, 1, 3, 1.0, 0.0}, {2, 0, 3, 1.0, 0.0},
                             {2, 1, 3, 1.0, 0.0}};
  return Mdp(4, 2, 3, {1.0, 0.0, 0.0, 0.0}, tr);
}

/// One state to the sink via two outcomes paying 0 and 1 evenly.
inline Mdp coin_mdp() {
  std::vector<Transition> tr{{0, 0, 1, 0.5, 0.0}, {0, 0, 2, 0.5, 1.0}, {1, 0, 2, 1.0, 0.0}};
  return Mdp(3, 1, 2, {1.0, 0.0, 0.0}, tr);
}

/// One state straight to the sink with the given reward.
inline Mdp one_step_mdp(double reward) {
  std::vector<Transition> tr{{0, 0, 1, 1.0, reward}};
  return Mdp(2, 1, 1, {1.0, 0.0}, tr);
}

/// ERM of the coin {0, 1}: -log(0.5 (1 + e^-beta)) / beta.
inline double coin_erm(double beta) { return -std::log(0.5 * (1.0 + std::exp(-beta))) / beta; }

}  // namespace riskq::testing
