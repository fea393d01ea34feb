// Copyright 2026 The Coplan Authors
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

// Scenario files and the report runner behind the `coplan` tool.
//
// A scenario is a JSON document (see data/toy.scn and README.md). Loading
// rejects unknown fields and fills defaults; saving writes every field, so
// save(load(f)) is a fixed point.

#ifndef COPLAN_CLI_HPP_
#define COPLAN_CLI_HPP_

#include <chrono>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "coplan/consensus.hpp"
#include "coplan/dynamic.hpp"
#include "coplan/mechanism.hpp"
#include "coplan/protocol.hpp"
#include "coplan/transport.hpp"
#include "json.hpp"

namespace coplan {

enum class RunMode { kCentralized, kCpp, kProtocol };
enum class Analysis { kJit, kFirstBest, kVcg, kMenu, kDynamic };

std::string ToString(RunMode mode);
RunMode ParseRunMode(const std::string& text);
std::string ToString(Analysis analysis);
// Comma-separated list; "all" selects everything. Throws ParameterError.
std::set<Analysis> ParseAnalyses(const std::string& text);

struct MenuConfig {
  double alpha = 0.0;
  // Empty: the default sweep from x_A to x*.
  std::vector<SupplyPlan> plans;
};

struct DynamicConfig {
  InventoryModel model;
  double initial_inventory = 0.0;
  double initial_order = 0.0;
  CommitmentMode commitment = CommitmentMode::kNone;
  Vector realized;  // empty: demand equals forecast
};

struct Scenario {
  RetailerSpec retailer;
  SupplierSpec supplier;
  FeePolicy fee;
  std::optional<MenuConfig> menu;
  std::optional<StatusQuo> status_quo;  // explicit singleton plans
  std::optional<DynamicConfig> dynamic;
  ConsensusConfig consensus;  // rho, tolerances, max_iters, adaptive_rho
  RunMode mode = RunMode::kCentralized;

  // Throws SchemaError naming the first inconsistent field.
  void Validate() const;
};

// Throws SchemaError with a field path ("retailer.demand[1]").
Scenario ScenarioFromJson(const nlohmann::json& doc);
nlohmann::json ScenarioToJson(const Scenario& scenario);
Scenario LoadScenario(const std::string& path);
void SaveScenario(const Scenario& scenario, const std::string& path);

struct RunOptions {
  std::set<Analysis> analyses = {Analysis::kJit, Analysis::kFirstBest, Analysis::kVcg,
                                 Analysis::kMenu, Analysis::kDynamic};
  std::optional<RunMode> mode;  // overrides the scenario's mode
  std::optional<double> alpha;  // additive fee and menu alpha
  std::ostream* trace = nullptr;
  // Protocol mode: remote agents (retailer, supplier). Empty starts
  // loopback servers for both.
  std::vector<Endpoint> agents;
  std::chrono::milliseconds agent_timeout = kDefaultAgentTimeout;
};

struct Report {
  nlohmann::json doc;  // full precision
  std::string text;    // dollars to the cent
};

// Runs the requested analyses (and whatever they depend on). The dynamic
// analysis is skipped when the scenario has no dynamic block. Identities in
// the settlement are re-checked; a violation throws StateError.
Report Run(const Scenario& scenario, const RunOptions& options = {});

// Dollars to the cent, e.g. "1780.00" or "-150.00".
std::string FormatMoney(double dollars);

}  // namespace coplan

#endif  // COPLAN_CLI_HPP_
