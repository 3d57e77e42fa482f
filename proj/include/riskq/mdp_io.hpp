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

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "riskq/mdp.hpp"
#include "riskq/transience.hpp"

namespace riskq {

// MDP document layout:
//   { "n_states": int, "n_actions": int, "sink_id": int,
//     "initial": [float...],
//     "transitions": [{"s":int,"a":int,"s2":int,"p":float,"r":float}...] }
// Missing triples have probability zero. nlohmann/json writes doubles in
// shortest round-trip form, so save -> load is bit-exact.

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw MdpError(MdpError::Kind::Schema, where.empty() ? key : where + "." + key, "missing field");
  }
  return obj.at(key);
}

inline std::size_t require_index(const nlohmann::json& obj, const char* key, const std::string& where) {
  const auto& v = require(obj, key, where);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw MdpError(MdpError::Kind::Schema, where.empty() ? key : where + "." + key,
                   "expected a non-negative integer");
  }
  return v.get<std::size_t>();
}

inline double require_number(const nlohmann::json& obj, const char* key, const std::string& where) {
  const auto& v = require(obj, key, where);
  if (!v.is_number()) {
    throw MdpError(MdpError::Kind::Schema, where + "." + key, "expected a number");
  }
  return v.get<double>();
}

}  // namespace detail

inline Mdp mdp_from_json(const nlohmann::json& doc) {
  const std::size_t n_states = detail::require_index(doc, "n_states", "");
  const std::size_t n_actions = detail::require_index(doc, "n_actions", "");
  const std::size_t sink = detail::require_index(doc, "sink_id", "");
  const auto& init = detail::require(doc, "initial", "");
  if (!init.is_array()) throw MdpError(MdpError::Kind::Schema, "initial", "expected an array");
  std::vector<double> initial;
  initial.reserve(init.size());
  for (std::size_t i = 0; i < init.size(); ++i) {
    if (!init[i].is_number()) {
      throw MdpError(MdpError::Kind::Schema, "initial[" + std::to_string(i) + "]", "expected a number");
    }
    initial.push_back(init[i].get<double>());
  }
  const auto& tr = detail::require(doc, "transitions", "");
  if (!tr.is_array()) throw MdpError(MdpError::Kind::Schema, "transitions", "expected an array");
  std::vector<Transition> triples;
  triples.reserve(tr.size());
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const std::string where = "transitions[" + std::to_string(i) + "]";
    triples.push_back({detail::require_index(tr[i], "s", where), detail::require_index(tr[i], "a", where),
                       detail::require_index(tr[i], "s2", where), detail::require_number(tr[i], "p", where),
                       detail::require_number(tr[i], "r", where)});
  }
  return Mdp(n_states, n_actions, sink, std::move(initial), triples);
}

inline Mdp load_mdp(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw MdpError(MdpError::Kind::Parse, "", e.what());
  }
  return mdp_from_json(doc);
}

inline Mdp load_mdp_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return load_mdp(buf.str());
}

inline nlohmann::json mdp_to_json(const Mdp& mdp) {
  nlohmann::json doc;
  doc["n_states"] = mdp.n_states();
  doc["n_actions"] = mdp.n_actions();
  doc["sink_id"] = mdp.sink();
  doc["initial"] = mdp.initial();
  auto tr = nlohmann::json::array();
  for (const auto& t : mdp.transitions()) {
    tr.push_back({{"s", t.s}, {"a", t.a}, {"s2", t.s2}, {"p", t.p}, {"r", t.r}});
  }
  doc["transitions"] = std::move(tr);
  return doc;
}

inline std::string save_mdp(const Mdp& mdp) { return mdp_to_json(mdp).dump(1); }

inline nlohmann::json policy_to_json(const Policy& policy) { return policy.actions(); }

inline Policy policy_from_json(const nlohmann::json& doc) {
  const nlohmann::json& arr = doc.is_object() && doc.contains("policy") ? doc.at("policy") : doc;
  if (!arr.is_array()) throw std::invalid_argument("policy must be an array of action indices");
  return Policy(arr.get<std::vector<ActionId>>());
}

inline nlohmann::json report_to_json(const ValidationReport& report) {
  nlohmann::json doc;
  doc["passed"] = report.passed;
  doc["transience_mode"] = to_string(report.mode);
  doc["checked_policies"] = report.checked_policies;
  doc["max_spectral_radius"] = report.max_spectral_radius;
  auto v = nlohmann::json::array();
  for (const auto& x : report.violations) {
    v.push_back({{"rule", x.rule}, {"location", x.location}, {"message", x.message}});
  }
  doc["violations"] = std::move(v);
  return doc;
}

}  // namespace riskq
