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

#include "riskq/version.hpp"
#include "riskq/rng.hpp"
#include "riskq/mdp.hpp"
#include "riskq/transience.hpp"
#include "riskq/mdp_io.hpp"
#include "riskq/risk.hpp"
#include "riskq/qfunction.hpp"
#include "riskq/oracle.hpp"
#include "riskq/sampler.hpp"
#include "riskq/qlearn.hpp"
#include "riskq/zbounds.hpp"
#include "riskq/beta_grid.hpp"
#include "riskq/evar.hpp"
#include "riskq/policy_sim.hpp"
#include "riskq/domains.hpp"
