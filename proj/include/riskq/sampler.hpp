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

#include <cmath>
#include <cstdint>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "riskq/mdp.hpp"
#include "riskq/qfunction.hpp"
#include "riskq/rng.hpp"

namespace riskq {

/// Power-law learning rate eta_n = scale * n^-omega, n the per-pair visit
/// count. omega in (0.5, 1] gives sum eta = inf and sum eta^2 < inf.
struct StepSchedule {
  double omega = 0.7;
  double scale = 1.0;

  StepSchedule() = default;
  explicit StepSchedule(double omega_, double scale_ = 1.0) : omega(omega_), scale(scale_) { validate(); }

  void validate() const {
    if (!(omega > 0.5 && omega <= 1.0)) throw std::invalid_argument("step schedule: omega must lie in (0.5, 1]");
    if (!(scale > 0.0) || !std::isfinite(scale)) throw std::invalid_argument("step schedule: scale must be > 0");
  }
};

inline double eta(const StepSchedule& schedule, std::uint64_t visit_count) {
  if (visit_count < 1) throw std::invalid_argument("eta: visit count is 1-based");
  return schedule.scale * std::pow(static_cast<double>(visit_count), -schedule.omega);
}

/// One observed step of the sample stream.
struct TransitionSample {
  StateId s = 0;
  ActionId a = 0;
  StateId s_next = 0;
  std::uint64_t episode = 0;
  /// Step index within the episode, 0-based.
  std::uint64_t step = 0;
  /// n-th visit to (s, a) in this stream, 1-based.
  std::uint64_t visit_count = 0;
};

struct UniformRandom {};
struct EpsilonGreedy {
  QFunction q;
  double eps = 0.1;
};
using BehaviorPolicy = std::variant<UniformRandom, EpsilonGreedy>;

struct SampleStream {
  std::vector<TransitionSample> samples;
  std::uint64_t episodes_started = 0;
  /// Episodes cut off by the per-episode step cap.
  std::uint64_t truncated_episodes = 0;
};

struct StreamOptions {
  std::uint64_t max_episode_steps = 1'000'000;
};

namespace detail {

inline StateId draw_state(std::span<const double> probs, double u) {
  double acc = 0.0;
  StateId last = 0;
  for (StateId s = 0; s < probs.size(); ++s) {
    if (probs[s] <= 0.0) continue;
    acc += probs[s];
    last = s;
    if (u < acc) return s;
  }
  return last;
}

inline StateId draw_next(std::span<const Outcome> row, double u) {
  double acc = 0.0;
  for (const auto& o : row) {
    acc += o.prob;
    if (u < acc) return o.next;
  }
  return row.back().next;
}

}  // namespace detail

/// Episodic stream of transitions.
///
/// Each episode draws s0 ~ mu and runs until the sink, using its own random
/// substream (seed, episode), so the output depends only on the inputs.
inline SampleStream generate_stream(const Mdp& mdp, const BehaviorPolicy& behavior, std::uint64_t seed,
                                    std::uint64_t n_samples, const StreamOptions& opts = {}) {
  if (n_samples == 0) throw std::invalid_argument("generate_stream: n_samples must be > 0");
  if (const auto* eg = std::get_if<EpsilonGreedy>(&behavior)) {
    if (eg->q.n_states() != mdp.n_states() || eg->q.n_actions() != mdp.n_actions()) {
      throw std::invalid_argument("generate_stream: epsilon-greedy table has the wrong shape");
    }
    if (!(eg->eps >= 0.0 && eg->eps <= 1.0)) throw std::invalid_argument("generate_stream: eps outside [0,1]");
  }
  SampleStream out;
  out.samples.reserve(n_samples);
  std::vector<std::uint64_t> visits(mdp.n_states() * mdp.n_actions(), 0);
  const auto& mu = mdp.initial();
  while (out.samples.size() < n_samples) {
    const std::uint64_t episode = out.episodes_started++;
    RandomStream rng(seed, stream_tag::kEpisode | episode);
    StateId s = detail::draw_state(mu, rng.uniform());
    std::uint64_t step = 0;
    while (!mdp.is_sink(s) && out.samples.size() < n_samples) {
      if (step == opts.max_episode_steps) {
        ++out.truncated_episodes;
        break;
      }
      ActionId a = 0;
      if (const auto* eg = std::get_if<EpsilonGreedy>(&behavior)) {
        // Both draws are consumed every step so the stream layout is fixed.
        const double u = rng.uniform();
        const ActionId random_action = rng.uniform_index(mdp.n_actions());
        a = u < eg->eps ? random_action : eg->q.greedy_action(s);
      } else {
        a = rng.uniform_index(mdp.n_actions());
      }
      const StateId next = detail::draw_next(mdp.outcomes(s, a), rng.uniform());
      const std::uint64_t count = ++visits[s * mdp.n_actions() + a];
      out.samples.push_back({s, a, next, episode, step, count});
      s = next;
      ++step;
    }
  }
  return out;
}

/// CSV dump `episode,step,s,a,s_next`.
inline void write_stream_csv(std::ostream& os, std::span<const TransitionSample> samples) {
  os << "episode,step,s,a,s_next\n";
  for (const auto& x : samples) {
    os << x.episode << ',' << x.step << ',' << x.s << ',' << x.a << ',' << x.s_next << '\n';
  }
}

}  // namespace riskq
