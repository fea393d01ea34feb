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

// coplan: run analyses on a scenario, or serve one agent over the wire.
//
//   coplan run --scenario data/toy.scn --alpha 50
//   coplan run --seed 7 --analyses jit,firstbest,vcg --json -
//   coplan serve --role supplier --scenario data/toy.scn --listen 127.0.0.1:7601

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "coplan/cli.hpp"
#include "coplan/errors.hpp"
#include "coplan/instances.hpp"

namespace {

constexpr const char* kListenEnv = "COPLAN_LISTEN";
constexpr const char* kDefaultListen = "127.0.0.1:7600";

struct RunFlags {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::string analyses = "all";
  std::string mode;
  std::optional<double> alpha;
  bool trace = false;
  std::string json_path;
  std::vector<std::string> agents;
  int timeout_ms = 30000;
  bool quiet = false;
};

struct ServeFlags {
  std::string role;
  std::string scenario;
  std::string listen;
};

coplan::Scenario RandomScenario(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  // Same generator as the property suites: the JIT status quo is jointly
  // feasible, so the gain is meaningful.
  coplan::BilateralOptions options;
  options.capacity_covers_jit = true;
  const coplan::BilateralInstance inst = coplan::RandomBilateral(rng, options);
  coplan::Scenario s;
  s.retailer = inst.retailer;
  s.supplier = inst.supplier;
  return s;
}

int Run(const RunFlags& flags) {
  coplan::Scenario scenario =
      flags.seed ? RandomScenario(*flags.seed) : coplan::LoadScenario(flags.scenario);
  coplan::RunOptions options;
  options.analyses = coplan::ParseAnalyses(flags.analyses);
  if (!flags.mode.empty()) options.mode = coplan::ParseRunMode(flags.mode);
  options.alpha = flags.alpha;
  if (flags.trace) options.trace = &std::cerr;
  for (const auto& a : flags.agents) options.agents.push_back(coplan::ParseEndpoint(a));
  options.agent_timeout = std::chrono::milliseconds(flags.timeout_ms);

  const coplan::Report report = coplan::Run(scenario, options);
  if (!flags.quiet) std::cout << report.text;
  if (flags.json_path == "-") {
    std::cout << report.doc.dump(2) << '\n';
  } else if (!flags.json_path.empty()) {
    std::ofstream out(flags.json_path);
    out << report.doc.dump(2) << '\n';
    if (!out) throw coplan::Error("cannot write report " + flags.json_path);
  }
  return 0;
}

int Serve(const ServeFlags& flags) {
  const coplan::Scenario scenario = coplan::LoadScenario(flags.scenario);
  std::string listen = flags.listen;
  if (listen.empty()) {
    const char* env = std::getenv(kListenEnv);
    listen = env && *env ? env : kDefaultListen;
  }
  std::unique_ptr<coplan::Agent> agent;
  std::optional<coplan::ParticipationRule> rule;
  if (flags.role == "retailer") {
    agent = coplan::MakeRetailerAgent(scenario.retailer);
  } else {
    agent = coplan::MakeSupplierAgent(scenario.supplier);
    const coplan::StatusQuo sq =
        scenario.status_quo ? *scenario.status_quo
                            : coplan::StandalonePlans(scenario.retailer, scenario.supplier);
    coplan::ParticipationRule r;
    const coplan::Agent* view = agent.get();
    r.utility = [view](const coplan::SupplyPlan& x) { return view->Utility(x); };
    r.standalone_utility = coplan::SupplierUtility(scenario.supplier, sq.supplier_plan).utility;
    rule = std::move(r);
  }
  coplan::AgentServer server(*agent, std::move(rule), coplan::ParseEndpoint(listen));
  std::cerr << "serving " << flags.role << " on 127.0.0.1:" << server.port() << '\n';
  server.Serve();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coordinated supply planning between a retailer and a supplier"};
  app.require_subcommand(1);

  RunFlags run;
  CLI::App* run_cmd = app.add_subcommand("run", "Run analyses and print the report");
  auto* scenario_opt = run_cmd->add_option("--scenario", run.scenario, "Scenario file (JSON)")
                           ->check(CLI::ExistingFile);
  run_cmd->add_option("--seed", run.seed, "Random bilateral instance instead of a scenario")
      ->excludes(scenario_opt);
  run_cmd->add_option("--analyses", run.analyses,
                      "Comma list of jit,firstbest,vcg,menu,dynamic or all")
      ->capture_default_str();
  run_cmd->add_option("--mode", run.mode, "centralized, cpp or protocol (overrides the scenario)");
  run_cmd->add_option("--alpha", run.alpha, "Additive fee in dollars (also the menu alpha)");
  run_cmd->add_flag("--trace", run.trace, "Consensus trace, one JSON line per iteration, to stderr");
  run_cmd->add_option("--json", run.json_path, "Write the structured report here ('-' for stdout)");
  run_cmd->add_option("--agents", run.agents,
                      "Protocol mode: retailer and supplier host:port (default: loopback)")
      ->expected(2);
  run_cmd->add_option("--timeout-ms", run.timeout_ms, "Per-agent reply timeout")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  run_cmd->add_flag("--quiet", run.quiet, "Suppress the text report");

  ServeFlags serve;
  CLI::App* serve_cmd = app.add_subcommand("serve", "Serve one agent over the line protocol");
  serve_cmd->add_option("--role", serve.role, "retailer or supplier")
      ->required()
      ->check(CLI::IsMember({"retailer", "supplier"}));
  serve_cmd->add_option("--scenario", serve.scenario, "Scenario holding the agent's data")
      ->required()
      ->check(CLI::ExistingFile);
  serve_cmd->add_option("--listen", serve.listen,
                        std::string("host:port; default $") + kListenEnv + " or " + kDefaultListen);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    if (run_cmd->parsed()) {
      if (run.scenario.empty() && !run.seed) {
        std::cerr << "error: run needs --scenario or --seed\n";
        return 2;
      }
      return Run(run);
    }
    return Serve(serve);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
  }
  return 1;
}
