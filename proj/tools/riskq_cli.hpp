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

// Command-line front end. Every subcommand writes its artifacts plus a
// manifest.json into --out-dir and nowhere else.

#pragma once

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "riskq.hpp"

namespace riskq::cli {

namespace fs = std::filesystem;
using nlohmann::json;

enum ExitCode : int { kOk = 0, kUsage = 1, kValidation = 2, kAllDiverged = 3 };

/// Bad flag values that CLI11 cannot catch on its own.
class UsageError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Input that parses but fails a model or policy check.
class ValidationFailure : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string fnv1a64_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// Output directory bookkeeping shared by the subcommands.
class Run {
 public:
  Run(std::string command, std::vector<std::string> argv, fs::path out_dir)
      : command_(std::move(command)), argv_(std::move(argv)), out_dir_(std::move(out_dir)),
        start_(std::chrono::steady_clock::now()) {}

  json& params() { return params_; }

  Mdp load_mdp(const std::string& path) {
    const std::string text = read_file(path);
    inputs_.push_back({{"path", path}, {"fnv1a64", fnv1a64_hex(text)}});
    return riskq::load_mdp(text);
  }

  json load_json(const std::string& path) {
    const std::string text = read_file(path);
    inputs_.push_back({{"path", path}, {"fnv1a64", fnv1a64_hex(text)}});
    try {
      return json::parse(text);
    } catch (const json::parse_error& e) {
      throw ValidationFailure(path + ": " + e.what());
    }
  }

  void write(const std::string& name, const std::string& content) {
    fs::create_directories(out_dir_);
    std::ofstream os(out_dir_ / name, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + (out_dir_ / name).string());
    os << content;
    outputs_.push_back(name);
  }

  void write_json(const std::string& name, const json& doc) { write(name, doc.dump(2) + "\n"); }

  template <class Writer>
  void write_csv(const std::string& name, Writer&& writer) {
    std::ostringstream os;
    writer(os);
    write(name, os.str());
  }

  const std::vector<std::string>& outputs() const { return outputs_; }

  void finish(std::uint64_t seed) {
    json m;
    m["command"] = command_;
    m["argv"] = argv_;
    m["parameters"] = params_;
    m["seed"] = seed;
    m["inputs"] = inputs_.empty() ? json::array() : inputs_;
    auto outs = outputs_;
    outs.push_back("manifest.json");
    m["outputs"] = outs;
    m["wall_clock_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    m["version"] = kVersion;
    fs::create_directories(out_dir_);
    std::ofstream os(out_dir_ / "manifest.json", std::ios::binary);
    os << m.dump(2) << "\n";
  }

 private:
  std::string command_;
  std::vector<std::string> argv_;
  fs::path out_dir_;
  json params_ = json::object();
  json inputs_ = json::array();
  std::vector<std::string> outputs_;
  std::chrono::steady_clock::time_point start_;
};

inline std::uint64_t default_seed() {
  const char* env = std::getenv("RISKQ_SEED");
  if (env == nullptr || *env == '\0') return 0;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(env, &used);
    if (used != std::char_traits<char>::length(env)) throw std::invalid_argument(env);
    return v;
  } catch (const std::exception&) {
    throw UsageError(std::string("RISKQ_SEED is not an unsigned integer: ") + env);
  }
}

inline ZBoxRule parse_zbox_rule(const std::string& s) {
  return s == "return-range" ? ZBoxRule::ReturnRange : ZBoxRule::MeanCentered;
}

inline ReturnRangeMode parse_range_mode(const std::string& s) {
  return s == "per-pair" ? ReturnRangeMode::PerPairCumulative : ReturnRangeMode::PerEpisode;
}

inline json qfunction_to_json(const Mdp& mdp, const QFunction& q) {
  json rows = json::array();
  for (StateId s = 0; s < mdp.n_states(); ++s) {
    std::vector<double> row(mdp.n_actions());
    for (ActionId a = 0; a < mdp.n_actions(); ++a) row[a] = q(s, a);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json qtable_metadata(std::uint64_t seed, const StepSchedule& schedule, const QTable& q, const ZBox& box,
                            const ZBoundEstimate& est) {
  json doc;
  doc["seed"] = seed;
  doc["schedule"] = {{"kind", "power-law"}, {"omega", schedule.omega}, {"scale", schedule.scale}};
  doc["betas"] = q.betas();
  std::vector<bool> div;
  for (std::size_t b = 0; b < q.n_betas(); ++b) div.push_back(q.diverged(b));
  doc["diverged"] = div;
  doc["zbounds"] = zbounds_to_json(est, q.betas(), box);
  return doc;
}

struct CommonOptions {
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct LearnOptions {
  std::uint64_t samples = 200'000;
  double omega = 0.7;
  std::string zbox_rule = "mean-centered";
  std::string range_mode = "per-episode";
};

inline void add_common(CLI::App* sub, CommonOptions& c) {
  sub->add_option("--out-dir", c.out_dir, "Directory receiving every output file")->capture_default_str();
  sub->add_option("--seed", c.seed, "Random seed (default: $RISKQ_SEED or 0)");
  sub->add_option("--threads", c.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
}

inline void add_learn(CLI::App* sub, LearnOptions& l) {
  sub->add_option("--samples", l.samples, "Sample-stream length")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--omega", l.omega, "Step-size exponent, eta_n = n^-omega")->capture_default_str();
  sub->add_option("--zbox-rule", l.zbox_rule, "|q| bound inside the z-box")
      ->capture_default_str()
      ->check(CLI::IsMember({"mean-centered", "return-range"}));
  sub->add_option("--range-mode", l.range_mode, "What x_min/x_max range over")
      ->capture_default_str()
      ->check(CLI::IsMember({"per-episode", "per-pair"}));
}

inline void record_learn(json& p, const LearnOptions& l) {
  p["samples"] = l.samples;
  p["omega"] = l.omega;
  p["zbox_rule"] = l.zbox_rule;
  p["range_mode"] = l.range_mode;
}

inline StepSchedule schedule_of(const LearnOptions& l) {
  try {
    return StepSchedule(l.omega);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

/// Returns the process exit code; `out` gets a short summary, `err` errors.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Risk-averse total-reward Q-learning (ERM and EVaR) for transient MDPs", "riskq"};
  app.set_version_flag("--version", std::string("riskq ") + kVersion);
  app.require_subcommand(1);

  CommonOptions common;
  LearnOptions learn;
  std::string mdp_path;

  // validate
  std::string mode = "exhaustive";
  std::uint64_t n_policies = 1000;
  auto* validate = app.add_subcommand("validate", "Check MDP invariants and transience");
  validate->add_option("--mdp", mdp_path, "MDP JSON file")->required()->check(CLI::ExistingFile);
  validate->add_option("--mode", mode, "Transience check")->capture_default_str()->check(
      CLI::IsMember({"exhaustive", "sampled"}));
  validate->add_option("--policies", n_policies, "Policies drawn in sampled mode")->capture_default_str();
  add_common(validate, common);

  // gen
  std::string domain;
  std::string name = "mdp.json";
  std::size_t gr_n = 6;
  double gr_p = 0.7;
  std::size_t gr_max_bet = 0;
  std::size_t rt_states = 3;
  std::size_t rt_actions = 2;
  double rt_sink = 0.1;
  bool exclude_cliff = false;
  auto* gen = app.add_subcommand("gen", "Generate a benchmark MDP as JSON");
  gen->add_option("--domain", domain, "Domain")->required()->check(
      CLI::IsMember({"cliff-walking", "gamblers-ruin", "random"}));
  gen->add_option("--name", name, "Output file name")->capture_default_str();
  gen->add_option("--n", gr_n, "Gambler's ruin target capital")->capture_default_str();
  gen->add_option("--p", gr_p, "Gambler's ruin win probability")->capture_default_str();
  gen->add_option("--max-bet", gr_max_bet, "Gambler's ruin largest bet (0: n/2)")->capture_default_str();
  gen->add_option("--states", rt_states, "Random fixture non-sink states")->capture_default_str();
  gen->add_option("--actions", rt_actions, "Random fixture actions")->capture_default_str();
  gen->add_option("--sink-prob", rt_sink, "Random fixture minimum sink probability")->capture_default_str();
  gen->add_flag("--exclude-cliff-start", exclude_cliff, "Cliff walking: no initial mass on cliff cells");
  add_common(gen, common);

  // solve-erm
  double beta = 1.0;
  double tol = 1e-10;
  std::size_t max_iter = 100'000;
  auto* solve_erm = app.add_subcommand("solve-erm", "Exact ERM fixed point at one risk level");
  solve_erm->add_option("--mdp", mdp_path, "MDP JSON file")->required()->check(CLI::ExistingFile);
  solve_erm->add_option("--beta", beta, "Risk level")->required()->check(CLI::PositiveNumber);
  solve_erm->add_option("--tol", tol, "Sup-norm stopping tolerance")->capture_default_str();
  solve_erm->add_option("--max-iter", max_iter, "Iteration cap")->capture_default_str();
  add_common(solve_erm, common);

  // solve-evar
  double alpha = 0.2;
  double delta = 0.05;
  std::optional<double> beta0;
  std::string evar_mode = "model-based";
  auto* solve_evar = app.add_subcommand("solve-evar", "delta-optimal EVaR policy");
  solve_evar->add_option("--mdp", mdp_path, "MDP JSON file")->required()->check(CLI::ExistingFile);
  solve_evar->add_option("--alpha", alpha, "EVaR level in (0,1)")->capture_default_str();
  solve_evar->add_option("--delta", delta, "Grid precision")->capture_default_str();
  solve_evar->add_option("--beta0", beta0, "Smallest risk level (default: return-range heuristic)");
  solve_evar->add_option("--mode", evar_mode, "Per-level solver")->capture_default_str()->check(
      CLI::IsMember({"model-based", "model-free"}));
  add_learn(solve_evar, learn);
  add_common(solve_evar, common);

  // train-erm
  std::vector<double> betas;
  auto* train_erm = app.add_subcommand("train-erm", "ERM Q-learning over a list of risk levels");
  train_erm->add_option("--mdp", mdp_path, "MDP JSON file")->required()->check(CLI::ExistingFile);
  train_erm->add_option("--betas", betas, "Risk levels")->required()->delimiter(',');
  add_learn(train_erm, learn);
  add_common(train_erm, common);

  // train-evar
  bool reference = false;
  std::uint64_t checkpoint_every = 1000;
  auto* train_evar = app.add_subcommand("train-evar", "EVaR Q-learning with learning-curve output");
  train_evar->add_option("--mdp", mdp_path, "MDP JSON file")->required()->check(CLI::ExistingFile);
  train_evar->add_option("--alpha", alpha, "EVaR level in (0,1)")->capture_default_str();
  train_evar->add_option("--delta", delta, "Grid precision")->capture_default_str();
  train_evar->add_option("--beta0", beta0, "Smallest risk level (default: return-range heuristic)");
  train_evar->add_flag("--reference", reference, "Also write the error against the exact fixed points");
  train_evar->add_option("--checkpoint-every", checkpoint_every, "Learning-curve spacing")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  add_learn(train_evar, learn);
  add_common(train_evar, common);

  // simulate
  std::string policy_path;
  std::uint64_t episodes = 48'000;
  std::uint64_t t_max = 20'000;
  std::size_t bins = 50;
  std::vector<double> alphas;
  std::vector<double> erm_betas;
  auto* simulate = app.add_subcommand("simulate", "Monte-Carlo returns of a fixed policy");
  simulate->add_option("--mdp", mdp_path, "MDP JSON file")->required()->check(CLI::ExistingFile);
  simulate->add_option("--policy", policy_path, "Policy JSON (array, or object with \"policy\")")
      ->required()
      ->check(CLI::ExistingFile);
  simulate->add_option("--episodes", episodes, "Episodes")->capture_default_str()->check(CLI::PositiveNumber);
  simulate->add_option("--t-max", t_max, "Step cap per episode")->capture_default_str()->check(CLI::PositiveNumber);
  simulate->add_option("--bins", bins, "Histogram bins")->capture_default_str()->check(CLI::PositiveNumber);
  simulate->add_option("--alphas", alphas, "Empirical EVaR levels")->delimiter(',');
  simulate->add_option("--betas", erm_betas, "Empirical ERM levels")->delimiter(',');
  add_common(simulate, common);

  // zbounds
  auto* zbounds = app.add_subcommand("zbounds", "Return-range heuristic: c, d, beta0 and the z-box");
  zbounds->add_option("--mdp", mdp_path, "MDP JSON file")->required()->check(CLI::ExistingFile);
  zbounds->add_option("--alpha", alpha, "EVaR level used for the grid")->capture_default_str();
  zbounds->add_option("--delta", delta, "Grid precision")->capture_default_str();
  add_learn(zbounds, learn);
  add_common(zbounds, common);

  // compare
  auto* compare = app.add_subcommand("compare", "Q-learning against exact EVaR along the sample stream");
  compare->add_option("--mdp", mdp_path, "MDP JSON file")->required()->check(CLI::ExistingFile);
  compare->add_option("--alpha", alpha, "EVaR level in (0,1)")->capture_default_str();
  compare->add_option("--delta", delta, "Grid precision")->capture_default_str();
  compare->add_option("--beta0", beta0, "Smallest risk level (default: return-range heuristic)");
  compare->add_option("--checkpoint-every", checkpoint_every, "Curve spacing")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  add_learn(compare, learn);
  add_common(compare, common);

  std::uint64_t env_seed = 0;
  try {
    env_seed = default_seed();
    common.seed = env_seed;
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  } catch (const UsageError& e) {
    err << "riskq: " << e.what() << "\n";
    return kUsage;
  }

  CLI::App* chosen = app.get_subcommands().front();
  std::vector<std::string> args(argv + 1, argv + argc);
  Run r(chosen->get_name(), args, common.out_dir);
  r.params()["out_dir"] = common.out_dir;
  r.params()["threads"] = common.threads;

  try {
    int code = kOk;
    if (chosen == validate) {
      r.params()["mdp"] = mdp_path;
      r.params()["mode"] = mode;
      ValidationReport report;
      try {
        const Mdp mdp = r.load_mdp(mdp_path);
        TransienceCheck check = ExhaustiveCheck{};
        if (mode == "sampled") {
          check = SampledCheck{n_policies, common.seed};
          r.params()["policies"] = n_policies;
        }
        try {
          report = validate_transience(mdp, check);
        } catch (const std::invalid_argument& e) {
          throw UsageError(e.what());
        }
      } catch (const MdpError& e) {
        report.passed = false;
        report.mode = mode == "sampled" ? TransienceMode::Sampled : TransienceMode::Exhaustive;
        report.violations.push_back({"schema", e.field(), e.what()});
      }
      r.write_json("report.json", report_to_json(report));
      out << (report.passed ? "passed" : "failed") << ": " << report.violations.size() << " violation(s)\n";
      code = report.passed ? kOk : kValidation;
    } else if (chosen == gen) {
      r.params()["domain"] = domain;
      Mdp mdp = [&] {
        if (domain == "cliff-walking") {
          CliffWalkingSpec spec;
          spec.start_on_cliff = !exclude_cliff;
          r.params()["exclude_cliff_start"] = exclude_cliff;
          return make_cliff_walking(spec);
        }
        try {
          if (domain == "gamblers-ruin") {
            r.params()["n"] = gr_n;
            r.params()["p"] = gr_p;
            r.params()["max_bet"] = gr_max_bet;
            return make_gamblers_ruin(gr_n, gr_p, gr_max_bet);
          }
          r.params()["states"] = rt_states;
          r.params()["actions"] = rt_actions;
          r.params()["sink_prob"] = rt_sink;
          return make_random_transient(rt_states, rt_actions, rt_sink, common.seed);
        } catch (const std::invalid_argument& e) {
          throw UsageError(e.what());
        }
      }();
      r.write(name, save_mdp(mdp) + "\n");
      out << "wrote " << name << " (" << mdp.n_states() << " states, " << mdp.n_actions() << " actions)\n";
    } else if (chosen == solve_erm) {
      r.params()["mdp"] = mdp_path;
      r.params()["beta"] = beta;
      r.params()["tol"] = tol;
      r.params()["max_iter"] = max_iter;
      const Mdp mdp = r.load_mdp(mdp_path);
      FixedPointOptions fp;
      fp.tol = tol;
      fp.max_iter = max_iter;
      const ErmSolution sol = solve_erm_fixed_point(mdp, beta, fp);
      json doc;
      doc["beta"] = beta;
      doc["status"] = to_string(sol.status);
      doc["iterations"] = sol.iterations;
      doc["converged"] = sol.converged;
      if (sol.bounded()) {
        doc["policy"] = policy_to_json(sol.policy);
        doc["v"] = *sol.v_star;
        doc["q"] = qfunction_to_json(mdp, *sol.q_star);
      }
      r.write_json("erm_solution.json", doc);
      out << to_string(sol.status) << " after " << sol.iterations << " iterations\n";
      code = sol.bounded() ? kOk : kAllDiverged;
    } else if (chosen == solve_evar) {
      r.params()["mdp"] = mdp_path;
      r.params()["alpha"] = alpha;
      r.params()["delta"] = delta;
      r.params()["mode"] = evar_mode;
      record_learn(r.params(), learn);
      const Mdp mdp = r.load_mdp(mdp_path);
      const StepSchedule schedule = schedule_of(learn);
      if (!(alpha > 0.0 && alpha < 1.0)) throw UsageError("--alpha must lie in (0,1)");
      if (!(delta > 0.0)) throw UsageError("--delta must be > 0");
      EvarSolution sol;
      if (evar_mode == "model-based") {
        std::optional<double> auto_b0;
        if (!beta0) {
          const auto stream = generate_stream(mdp, UniformRandom{}, common.seed, learn.samples);
          auto_b0 = beta_zero(delta, estimate_cd(mdp, stream.samples, schedule, parse_range_mode(learn.range_mode)));
        }
        ModelBasedOptions mb;
        mb.threads = common.threads;
        sol = solve_evar_model_based(mdp, alpha, delta, beta0.value_or(auto_b0.value_or(0.0)), mb);
        sol.beta0_source = beta0 ? Beta0Source::User : Beta0Source::Auto;
        sol.delta_guarantee_claimed = !beta0;
      } else {
        ModelFreeConfig cfg;
        cfg.beta0 = beta0;
        cfg.seed = common.seed;
        cfg.schedule = schedule;
        cfg.n_samples = learn.samples;
        cfg.range_mode = parse_range_mode(learn.range_mode);
        cfg.zbox_rule = parse_zbox_rule(learn.zbox_rule);
        sol = solve_evar_model_free(mdp, alpha, delta, cfg).solution;
      }
      r.params()["beta0"] = sol.grid.beta0;
      r.write_json("evar_solution.json", evar_solution_to_json(sol));
      r.write_csv("h_curve.csv", [&](std::ostream& os) { write_h_curve_csv(os, sol); });
      out << "EVaR " << sol.evar_value << " at beta* " << sol.beta_star << "\n";
    } else if (chosen == train_erm) {
      r.params()["mdp"] = mdp_path;
      r.params()["betas"] = betas;
      record_learn(r.params(), learn);
      const Mdp mdp = r.load_mdp(mdp_path);
      const StepSchedule schedule = schedule_of(learn);
      const auto stream = generate_stream(mdp, UniformRandom{}, common.seed, learn.samples);
      const ZBoundEstimate est = estimate_cd(mdp, stream.samples, schedule, parse_range_mode(learn.range_mode));
      const ZBox box = z_box(betas, est, mdp.reward_sup_norm(), parse_zbox_rule(learn.zbox_rule));
      QTable q = [&] {
        try {
          return erm_q_learning(mdp, stream.samples, betas, schedule, box);
        } catch (const std::invalid_argument& e) {
          throw UsageError(e.what());
        }
      }();
      r.write_csv("qtable.csv", [&](std::ostream& os) { write_qtable_csv(os, mdp, q); });
      r.write_json("qtable.json", qtable_metadata(common.seed, schedule, q, box, est));
      out << q.live_count() << " of " << q.n_betas() << " risk levels bounded\n";
      code = q.live_count() == 0 ? kAllDiverged : kOk;
    } else if (chosen == train_evar || chosen == compare) {
      const bool is_compare = chosen == compare;
      r.params()["mdp"] = mdp_path;
      r.params()["alpha"] = alpha;
      r.params()["delta"] = delta;
      r.params()["checkpoint_every"] = checkpoint_every;
      record_learn(r.params(), learn);
      const Mdp mdp = r.load_mdp(mdp_path);
      if (!(alpha > 0.0 && alpha < 1.0)) throw UsageError("--alpha must lie in (0,1)");
      if (!(delta > 0.0)) throw UsageError("--delta must be > 0");
      ModelFreeConfig cfg;
      cfg.beta0 = beta0;
      cfg.seed = common.seed;
      cfg.schedule = schedule_of(learn);
      cfg.n_samples = learn.samples;
      cfg.range_mode = parse_range_mode(learn.range_mode);
      cfg.zbox_rule = parse_zbox_rule(learn.zbox_rule);

      // The grid is fixed by the stream, so the reference is computed in the
      // first checkpoint, from the table's own levels.
      std::vector<std::optional<QFunction>> ref;
      std::optional<EvarSolution> exact;
      std::ostringstream curve;
      curve.precision(17);
      if (is_compare) {
        curve << "samples,evar_q_learning,evar_exact,abs_diff,max_abs_q_error\n";
      } else {
        curve << "samples,max_abs_q_error,live_levels\n";
      }
      const bool want_reference = reference || is_compare;
      auto ensure_reference = [&](const QTable& q) {
        if (!ref.empty()) return;
        ref.resize(q.n_betas());
        for (std::size_t b = 0; b < q.n_betas(); ++b) {
          const ErmSolution s = solve_erm_fixed_point(mdp, q.beta(b));
          if (!s.bounded()) break;
          ref[b] = *s.q_star;
        }
      };
      auto q_error = [&](const QTable& q) {
        double worst = 0.0;
        for (std::size_t b = 0; b < q.n_betas(); ++b) {
          // Levels the learner gave up on are counted by live_levels instead.
          if (!ref[b] || q.diverged(b)) continue;
          worst = std::max(worst, sup_distance(mdp, q.slice(b), *ref[b]));
        }
        return worst;
      };
      if (want_reference) {
        cfg.learner.checkpoint_every = checkpoint_every;
        cfg.learner.on_checkpoint = [&](std::uint64_t n, const QTable& q) {
          ensure_reference(q);
          const double err_q = q_error(q);
          if (!is_compare) {
            curve << n << ',' << err_q << ',' << q.live_count() << '\n';
            return;
          }
          if (!exact) {
            exact = solve_evar_model_based(mdp, alpha, delta, q.beta(0));
          }
          double learned = -INFINITY;
          try {
            learned = evar_from_qtable(mdp, q, alpha, build_beta_grid(q.beta(0), delta, alpha)).evar_value;
          } catch (const NoBoundedRiskLevel&) {
          }
          curve << n << ',' << learned << ',' << exact->evar_value << ',' << std::abs(learned - exact->evar_value)
                << ',' << err_q << '\n';
        };
      }
      ModelFreeResult res = solve_evar_model_free(mdp, alpha, delta, cfg);
      r.params()["beta0"] = res.solution.grid.beta0;
      if (!is_compare) {
        r.write_csv("qtable.csv", [&](std::ostream& os) { write_qtable_csv(os, mdp, res.q); });
        r.write_json("qtable.json", qtable_metadata(common.seed, cfg.schedule, res.q, res.zbox, res.estimate));
        r.write_json("evar_solution.json", evar_solution_to_json(res.solution));
        r.write_csv("h_curve.csv", [&](std::ostream& os) { write_h_curve_csv(os, res.solution); });
        if (reference) r.write("convergence.csv", curve.str());
      } else {
        r.write("compare.csv", curve.str());
      }
      out << "EVaR " << res.solution.evar_value << " at beta* " << res.solution.beta_star << "\n";
    } else if (chosen == simulate) {
      r.params()["mdp"] = mdp_path;
      r.params()["policy"] = policy_path;
      r.params()["episodes"] = episodes;
      r.params()["t_max"] = t_max;
      r.params()["bins"] = bins;
      r.params()["alphas"] = alphas;
      r.params()["betas"] = erm_betas;
      const Mdp mdp = r.load_mdp(mdp_path);
      const json pdoc = r.load_json(policy_path);
      Policy pi;
      try {
        pi = policy_from_json(pdoc);
        check_policy(mdp, pi);
      } catch (const std::exception& e) {
        throw ValidationFailure(std::string("policy: ") + e.what());
      }
      for (double a : alphas) {
        if (!(a > 0.0 && a <= 1.0)) throw UsageError("--alphas entries must lie in (0,1]");
      }
      for (double b : erm_betas) {
        if (!(b >= 0.0)) throw UsageError("--betas entries must be >= 0");
      }
      const ReturnSample rs = simulate_returns(mdp, pi, episodes, t_max, common.seed, common.threads);
      const ReturnStats st = empirical_stats(rs, bins, alphas, erm_betas);
      r.write_csv("returns.csv", [&](std::ostream& os) { write_returns_csv(os, rs); });
      r.write_csv("histogram.csv", [&](std::ostream& os) { write_histogram_csv(os, st); });
      r.write_json("stats.json", stats_to_json(rs, st));
      out << "mean " << st.mean << " std " << st.std_dev << " truncated " << rs.truncated_episodes << "\n";
    } else if (chosen == zbounds) {
      r.params()["mdp"] = mdp_path;
      r.params()["alpha"] = alpha;
      r.params()["delta"] = delta;
      record_learn(r.params(), learn);
      const Mdp mdp = r.load_mdp(mdp_path);
      const StepSchedule schedule = schedule_of(learn);
      const auto stream = generate_stream(mdp, UniformRandom{}, common.seed, learn.samples);
      const ZBoundEstimate est = estimate_cd(mdp, stream.samples, schedule, parse_range_mode(learn.range_mode));
      json doc;
      try {
        const double b0 = beta_zero(delta, est);
        const BetaGrid grid = build_beta_grid(b0, delta, alpha);
        doc = zbounds_to_json(est, grid.betas,
                              z_box(grid.betas, est, mdp.reward_sup_norm(), parse_zbox_rule(learn.zbox_rule)));
        doc["beta0"] = b0;
      } catch (const DegenerateReturnRange& e) {
        doc = zbounds_to_json(est, {}, ZBox{});
        doc["beta0"] = nullptr;
        doc["note"] = e.what();
      }
      doc["r_inf"] = mdp.reward_sup_norm();
      r.write_json("zbounds.json", doc);
      out << "c " << est.c << " d " << est.d << "\n";
    }
    r.finish(common.seed);
    return code;
  } catch (const UsageError& e) {
    err << "riskq: " << e.what() << "\n";
    return kUsage;
  } catch (const MdpError& e) {
    err << "riskq: invalid MDP: " << e.what() << "\n";
    return kValidation;
  } catch (const ValidationFailure& e) {
    err << "riskq: " << e.what() << "\n";
    return kValidation;
  } catch (const NoBoundedRiskLevel& e) {
    err << "riskq: " << e.what() << "\n";
    return kAllDiverged;
  } catch (const DegenerateReturnRange& e) {
    err << "riskq: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    err << "riskq: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "riskq: " << e.what() << "\n";
    return kValidation;
  }
}

}  // namespace riskq::cli
