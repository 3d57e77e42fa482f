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
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "riskq/mdp.hpp"
#include "riskq/parallel.hpp"
#include "riskq/risk.hpp"
#include "riskq/rng.hpp"
#include "riskq/sampler.hpp"

namespace riskq {

struct ReturnSample {
  std::vector<double> returns;
  std::uint64_t n_episodes = 0;
  std::uint64_t t_max = 0;
  /// Rollouts that hit t_max before the sink; their partial return is kept.
  std::uint64_t truncated_episodes = 0;
};

/// Monte-Carlo returns of a fixed policy, episode i on substream (seed, i).
inline ReturnSample simulate_returns(const Mdp& mdp, const Policy& policy, std::uint64_t n_episodes,
                                     std::uint64_t t_max, std::uint64_t seed, std::size_t threads = 1) {
  if (n_episodes == 0) throw std::invalid_argument("simulate_returns: n_episodes must be > 0");
  if (t_max == 0) throw std::invalid_argument("simulate_returns: t_max must be > 0");
  check_policy(mdp, policy);
  ReturnSample out;
  out.n_episodes = n_episodes;
  out.t_max = t_max;
  out.returns.assign(n_episodes, 0.0);
  std::vector<char> truncated(n_episodes, 0);
  detail::parallel_for(n_episodes, threads, [&](std::size_t ep) {
    RandomStream rng(seed, stream_tag::kRollout | ep);
    StateId s = detail::draw_state(mdp.initial(), rng.uniform());
    double total = 0.0;
    std::uint64_t t = 0;
    for (; t < t_max && !mdp.is_sink(s); ++t) {
      const auto row = mdp.outcomes(s, policy[s]);
      const double u = rng.uniform();
      double acc = 0.0;
      const Outcome* hit = &row.back();
      for (const auto& o : row) {
        acc += o.prob;
        if (u < acc) {
          hit = &o;
          break;
        }
      }
      total += hit->reward;
      s = hit->next;
    }
    out.returns[ep] = total;
    truncated[ep] = mdp.is_sink(s) ? 0 : 1;
  });
  for (char c : truncated) out.truncated_episodes += static_cast<std::uint64_t>(c);
  return out;
}

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  double prob = 0.0;
};

struct ReturnStats {
  double mean = 0.0;
  /// Population standard deviation.
  double std_dev = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::vector<HistogramBin> histogram;
  std::vector<std::pair<double, double>> erm;   // (beta, value)
  std::vector<std::pair<double, double>> evar;  // (alpha, value)
};

/// Lower empirical quantile: the smallest return x with F(x) >= q.
inline double empirical_quantile(std::span<const double> returns, double q) {
  if (returns.empty()) throw std::invalid_argument("empirical_quantile: no returns");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("empirical_quantile: q outside [0,1]");
  std::vector<double> v(returns.begin(), returns.end());
  std::sort(v.begin(), v.end());
  const double pos = std::ceil(q * static_cast<double>(v.size()));
  const std::size_t k = pos < 1.0 ? 0 : static_cast<std::size_t>(pos) - 1;
  return v[std::min(k, v.size() - 1)];
}

/// Risk levels used for the empirical EVaR supremum.
inline std::vector<double> empirical_evar_grid() { return geometric_grid(1e-3, 1e3, 1000); }

inline ReturnStats empirical_stats(const ReturnSample& rs, std::size_t hist_bins, std::span<const double> alphas,
                                   std::span<const double> betas) {
  if (rs.returns.empty()) throw std::invalid_argument("empirical_stats: no returns");
  if (hist_bins == 0) throw std::invalid_argument("empirical_stats: hist_bins must be > 0");
  const auto& x = rs.returns;
  const double n = static_cast<double>(x.size());
  ReturnStats st;
  const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
  st.min = *lo_it;
  st.max = *hi_it;
  double sum = 0.0;
  for (double v : x) sum += v;
  st.mean = sum / n;
  double ss = 0.0;
  for (double v : x) ss += (v - st.mean) * (v - st.mean);
  st.std_dev = std::sqrt(ss / n);

  std::vector<std::uint64_t> counts(hist_bins, 0);
  const double width = (st.max - st.min) / static_cast<double>(hist_bins);
  for (double v : x) {
    std::size_t k = width > 0.0 ? static_cast<std::size_t>((v - st.min) / width) : 0;
    ++counts[std::min(k, hist_bins - 1)];
  }
  for (std::size_t k = 0; k < hist_bins; ++k) {
    const double lo = st.min + width * static_cast<double>(k);
    const double hi = k + 1 == hist_bins ? st.max : st.min + width * static_cast<double>(k + 1);
    st.histogram.push_back({lo, hi, static_cast<double>(counts[k]) / n});
  }

  const DiscreteDist dist = DiscreteDist::uniform(x);
  for (double b : betas) st.erm.emplace_back(b, erm(dist, b));
  if (!alphas.empty()) {
    const auto grid = empirical_evar_grid();
    for (double a : alphas) st.evar.emplace_back(a, a == 1.0 ? st.mean : evar(dist, a, grid));
  }
  return st;
}

inline void write_returns_csv(std::ostream& os, const ReturnSample& rs) {
  os << "episode,return\n";
  const auto old = os.precision(17);
  for (std::size_t i = 0; i < rs.returns.size(); ++i) os << i << ',' << rs.returns[i] << '\n';
  os.precision(old);
}

inline void write_histogram_csv(std::ostream& os, const ReturnStats& st) {
  os << "bin_lo,bin_hi,prob\n";
  const auto old = os.precision(17);
  for (const auto& b : st.histogram) os << b.lo << ',' << b.hi << ',' << b.prob << '\n';
  os.precision(old);
}

inline nlohmann::json stats_to_json(const ReturnSample& rs, const ReturnStats& st) {
  nlohmann::json doc;
  doc["n_episodes"] = rs.n_episodes;
  doc["t_max"] = rs.t_max;
  doc["truncated_episodes"] = rs.truncated_episodes;
  doc["mean"] = st.mean;
  doc["std"] = st.std_dev;
  doc["min"] = st.min;
  doc["max"] = st.max;
  auto e = nlohmann::json::array();
  for (const auto& [b, v] : st.erm) e.push_back({{"beta", b}, {"erm", v}});
  doc["erm"] = std::move(e);
  auto ev = nlohmann::json::array();
  for (const auto& [a, v] : st.evar) ev.push_back({{"alpha", a}, {"evar", v}});
  doc["evar"] = std::move(ev);
  return doc;
}

}  // namespace riskq
