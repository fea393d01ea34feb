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

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails or overruns its time budget.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "coplan/cli.hpp"
#include "coplan/consensus.hpp"
#include "coplan/dynamic.hpp"
#include "coplan/errors.hpp"
#include "coplan/instances.hpp"
#include "coplan/mechanism.hpp"
#include "coplan/protocol.hpp"
#include "coplan/transport.hpp"
#include "oracles.hpp"
#include "toy.hpp"

namespace coplan {
namespace {

// Failures collected by one criterion. Only the first few are printed.
class Findings {
 public:
  void Expect(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }
  void Near(double got, double want, double tol, const std::string& what) {
    if (!(std::abs(got - want) <= tol)) {
      std::ostringstream os;
      os.precision(17);
      os << what << ": got " << got << ", want " << want;
      failures_.push_back(os.str());
    }
  }
  const std::vector<std::string>& failures() const { return failures_; }

 private:
  std::vector<std::string> failures_;
};

std::string Str(const SupplyPlan& x) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < x.size(); ++i) os << (i ? "," : "") << x[i];
  return os.str() + ")";
}

constexpr double kCent = 0.005;

void ToyRegression(Findings& f) {
  const Scenario s = LoadScenario(DataFile("toy.scn"));
  const StatusQuo sq = StandalonePlans(s.retailer, s.supplier);
  f.Near(sq.retailer_plan[0], 40, 0, "x_A[0]");
  f.Near(sq.retailer_plan[1], 60, 0, "x_A[1]");
  for (double alpha : {0.0, 20.0, 50.0}) {
    const SettlementReport r =
        Settle(s.retailer, s.supplier, sq, FeePolicy::Additive(alpha));
    const std::string a = " at alpha " + std::to_string(alpha);
    f.Near(r.retailer_standalone_cost, 220, kCent, "retailer JIT cost" + a);
    f.Near(r.supplier_standalone_cost, 610, kCent, "supplier JIT cost" + a);
    f.Near(r.retailer_standalone_cost + r.supplier_standalone_cost, 830, kCent, "JIT total" + a);
    f.Expect(r.plan == SupplyPlan{10, 90}, "first-best plan " + Str(r.plan) + a);
    f.Near(r.retailer_cost + r.supplier_cost, 710, kCent, "first-best cost" + a);
    f.Near(r.coordination_gain, 120, kCent, "coordination gain" + a);
    f.Near(100.0 * r.coordination_gain / 830.0, 14.5, 0.1, "cost reduction pct" + a);
    f.Near(r.transfer_supplier, 30 + alpha, kCent, "t_S" + a);
    if (alpha == 50.0) {
      f.Near(r.supplier_net_surplus, 70, kCent, "supplier surplus");
      f.Near(r.retailer_net_surplus, 50, kCent, "retailer surplus");
    }
  }
  // The same numbers through the report runner.
  const Report rep = Run(s);
  f.Near(rep.doc["firstbest"]["total_cost"].get<double>(), 710, kCent, "report first-best cost");
  f.Near(rep.doc["vcg"]["transfer_supplier"].get<double>(), 80, kCent, "report t_S");
  f.Near(rep.doc["vcg"]["supplier_surplus"].get<double>(), 70, kCent, "report supplier surplus");
  f.Near(rep.doc["vcg"]["retailer_surplus"].get<double>(), 50, kCent, "report retailer surplus");
}

void MenuRegression(Findings& f) {
  const RetailerSpec r = ToyRetailer();
  const SupplierSpec s = ToySupplier();
  const StatusQuo sq = StandalonePlans(r, s);
  const SupplyPlan x_star = EfficientPlan(r, s, FeePolicy::None()).plan;
  const auto plans = DefaultMenuPlans(sq.retailer_plan, x_star, JointPlanCap(r, s));
  const std::vector<SupplyPlan> listed{{30, 70}, {20, 80}, {10, 90}, {0, 100}};
  f.Expect(plans == listed, "menu plans");
  const MenuOffer menu = BuildMenu(r, sq, listed, 50.0);
  const double standalone = SupplierUtility(s, sq.supplier_plan).utility;
  const MenuChoice c = SupplierChoose(s, menu, standalone);
  const double fees[] = {60, 70, 80, 90};
  const double less_alpha[] = {1390, 1440, 1490, 1480};
  for (std::size_t k = 0; k < 4; ++k) {
    const std::string opt = "option " + std::to_string(k + 1);
    f.Near(menu.items[k].fee, fees[k], kCent, opt + " fee");
    f.Expect(c.option_utilities[k].has_value(), opt + " infeasible");
    if (c.option_utilities[k]) {
      f.Near(*c.option_utilities[k] - menu.alpha, less_alpha[k], kCent, opt + " utility");
    }
  }
  f.Expect(c.chosen == std::optional<std::size_t>(2), "chosen option");
  f.Near(c.net_utility, 1460, kCent, "net utility of the pick");
}

double Joint(const RetailerSpec& r, const SupplierSpec& s, const SupplyPlan& x) {
  return RetailerUtility(r, x).utility + SupplierUtility(s, x).utility;
}

void ConsensusEquivalence(Findings& f) {
  using Clock = std::chrono::steady_clock;
  EfficientPlanOptions cpp;
  cpp.method = PlanMethod::kCpp;
  const auto check = [&](const RetailerSpec& r, const SupplierSpec& s, const std::string& name) {
    const auto start = Clock::now();
    const SupplyPlan central = EfficientPlan(r, s, FeePolicy::None()).plan;
    const SupplyPlan admm = EfficientPlan(r, s, FeePolicy::None(), cpp).plan;
    const double want = Joint(r, s, central);
    f.Near(Joint(r, s, admm), want, 1e-3 * std::max(1.0, std::abs(want)), name + " joint utility");
    f.Expect(Clock::now() - start < std::chrono::seconds(10), name + " over 10 s");
    return admm;
  };
  const SupplyPlan toy = check(ToyRetailer(), ToySupplier(), "toy");
  f.Near(toy[0], 10, 0.05, "toy plan[0]");
  f.Near(toy[1], 90, 0.05, "toy plan[1]");
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    const BilateralInstance inst = RandomBilateral(rng);
    check(inst.retailer, inst.supplier, "instance " + std::to_string(trial));
  }
}

// Supplier's true net from the plan chosen on possibly false reports.
double TrueNet(const BilateralInstance& truth, const StatusQuo& sq, const SupplyPlan& x,
               double alpha) {
  if (x.total() > truth.supplier.total_capacity() + 1e-9) {
    return -std::numeric_limits<double>::infinity();
  }
  const SettlementReport r =
      VcgTransfers(truth.retailer, truth.supplier, sq, x, FeePolicy::Additive(alpha));
  return r.supplier_utility - r.transfer_supplier;
}

void MechanismProperties(Findings& f) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  BilateralOptions o;
  o.capacity_covers_jit = true;
  for (int trial = 0; trial < 200; ++trial) {
    const std::string at = " on instance " + std::to_string(trial);
    const BilateralInstance inst = RandomBilateral(rng, o);
    const StatusQuo sq = StandalonePlans(inst.retailer, inst.supplier);
    const SettlementReport none = Settle(inst.retailer, inst.supplier, sq, FeePolicy::None());
    const double g = none.coordination_gain;
    f.Expect(BudgetBalanceCheck(none).agrees, "budget sign disagrees" + at);
    f.Expect(g >= -1e-6, "negative gain" + at);

    const double alpha = std::max(0.0, g) * u(rng);
    const SettlementReport fee =
        Settle(inst.retailer, inst.supplier, sq, FeePolicy::Additive(alpha));
    f.Expect(BudgetBalanceCheck(fee).agrees, "budget sign disagrees with fee" + at);
    f.Expect(fee.supplier_utility - fee.transfer_supplier >=
                 fee.supplier_standalone_utility - 1e-6,
             "participation" + at);
    f.Expect(fee.plan == none.plan, "additive boost moved the plan" + at);

    const double truthful = TrueNet(inst, sq, none.plan, alpha);
    for (int k = 0; k < 20; ++k) {
      const SupplierSpec lie = Misreport(inst.supplier, rng);
      const SupplyPlan x = EfficientPlan(inst.retailer, lie, FeePolicy::None()).plan;
      f.Expect(TrueNet(inst, sq, x, alpha) <= truthful + 1e-6, "misreport pays" + at);
    }
  }
}

RollingState Start(double inventory, double last_order, CommitmentMode mode) {
  RollingState s;
  s.inventory = inventory;
  s.last_order = last_order;
  s.mode = mode;
  return s;
}

void DynamicSuite(Findings& f) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 20.0);
  for (int path = 0; path < 100; ++path) {
    const std::string at = " on path " + std::to_string(path);
    const InventoryModel m = RandomInventoryModel(rng);
    const double inv0 = u(rng);
    const double last0 = u(rng);

    RollingState st = Start(inv0, last0, CommitmentMode::kNone);
    while (st.week < m.forecast.size()) {
      const std::string wk = " week " + std::to_string(st.week + 1) + at;
      const Vector x = CoordinatedPlan(m, st).plan.values();
      const Vector jit = JitPolicy(m, st);
      f.Expect(CbtOne(m, st, x, jit) >= -1e-6, "negative CBT" + wk);
      f.Expect(JointFlowUtility(m, x, st) >= JointFlowUtility(m, jit, st) - 1e-6,
               "coordination loses to JIT" + wk);
      st = RollForward(m, st, m.forecast[st.week], x).state;
    }

    const std::vector<WeekRecord> full =
        Simulate(m, Start(inv0, last0, CommitmentMode::kFullHorizon));
    for (std::size_t k = 1; k < full.size(); ++k) {
      f.Near(full[k].cbt, 0.0, 1e-6, "full-horizon CBT week " + std::to_string(k + 1) + at);
    }
  }

  // Three-week windows against replayed books and an exact joint maximum.
  InventoryOptions o;
  o.weeks = 3;
  o.horizon = 3;
  o.max_forecast = 20;
  for (int trial = 0; trial < 10; ++trial) {
    const std::string at = " on 3-week instance " + std::to_string(trial);
    const InventoryModel m = RandomInventoryModel(rng, o);
    const RollingState st = Start(trial % 4, 6.0, CommitmentMode::kNone);
    const Vector x = CoordinatedPlan(m, st).plan.values();
    const std::vector<double> jit = testing::UpToForecast(m, 0, 3, st.inventory);
    const std::vector<double> pinned = [&] {
      std::vector<double> out{x[0]};
      const double after = std::max(0.0, st.inventory + x[0] - m.forecast[0]);
      const std::vector<double> tail = testing::UpToForecast(m, 1, 3, after);
      out.insert(out.end(), tail.begin(), tail.end());
      return out;
    }();
    const double oracle = testing::ReplayWindow(m, 0, st.inventory, 0, jit).retailer -
                          testing::ReplayWindow(m, 0, st.inventory, 0, pinned).retailer;
    f.Near(CbtOne(m, st, x, jit), oracle, 1e-6, "one-week CBT" + at);

    const double hi = 3.0 * o.max_forecast + 10.0;
    const auto joint = [&](double a, double b, double c) {
      const testing::Books bk = testing::ReplayWindow(m, 0, st.inventory, st.last_order, {a, b, c});
      return bk.retailer + bk.supplier;
    };
    const auto best_c = [&](double a, double b) {
      return joint(a, b, testing::TernaryMax([&](double c) { return joint(a, b, c); }, 0, hi, 80));
    };
    const auto best_bc = [&](double a) {
      return best_c(a, testing::TernaryMax([&](double b) { return best_c(a, b); }, 0, hi, 80));
    };
    const double best = best_bc(testing::TernaryMax(best_bc, 0, hi, 80));
    f.Near(JointFlowUtility(m, x, st), best, 1e-6 * (1.0 + std::abs(best)), "joint optimum" + at);
  }
}

class Served {
 public:
  Served(std::unique_ptr<Agent> agent, std::optional<ParticipationRule> rule = std::nullopt)
      : agent_(std::move(agent)),
        server_(*agent_, std::move(rule), Endpoint{"127.0.0.1", 0}),
        thread_([this] { server_.Serve(); }) {}
  ~Served() {
    server_.Stop();
    thread_.join();
  }
  Endpoint endpoint() const { return {"127.0.0.1", server_.port()}; }

 private:
  std::unique_ptr<Agent> agent_;
  AgentServer server_;
  std::thread thread_;
};

void ProtocolParity(Findings& f) {
  ConsensusConfig cfg;
  cfg.initial = SupplyPlan{40, 60};
  cfg.record_history = true;
  auto r = MakeRetailerAgent(ToyRetailer());
  auto s = MakeSupplierAgent(ToySupplier());
  std::vector<Agent*> local{r.get(), s.get()};
  const ConsensusResult in_process = RunConsensus(local, cfg);

  const SupplierSpec supplier = ToySupplier();
  const StatusQuo sq = StandalonePlans(ToyRetailer(), supplier);
  const double standalone = SupplierUtility(supplier, sq.supplier_plan).utility;
  ParticipationRule rule;
  rule.utility = [supplier](const SupplyPlan& x) -> std::optional<double> {
    return SupplierUtility(supplier, x).utility;
  };
  rule.standalone_utility = standalone;
  Served retailer_agent(MakeRetailerAgent(ToyRetailer()));
  Served supplier_agent(MakeSupplierAgent(supplier), rule);
  RemotePool pool({retailer_agent.endpoint(), supplier_agent.endpoint()}, 2);
  const ConsensusResult remote = RunConsensus(pool, cfg);

  f.Expect(remote.iterations == in_process.iterations, "iteration counts differ");
  f.Expect(remote.history.size() == in_process.history.size(), "history lengths differ");
  for (std::size_t k = 0; k < std::min(remote.history.size(), in_process.history.size()); ++k) {
    if (remote.history[k].z != in_process.history[k].z) {
      f.Expect(false, "z differs at iteration " + std::to_string(k + 1));
      break;
    }
  }
  f.Expect(remote.plan == in_process.plan, "final plans differ");
  f.Expect(remote.final_state.prices == in_process.final_state.prices, "final prices differ");

  // Each listed plan offered alone over the wire against the in-process
  // choice from the same one-item menu, then the full menu's pick.
  const std::vector<SupplyPlan> listed{{30, 70}, {20, 80}, {10, 90}, {0, 100}};
  for (double alpha : {50.0, 120.0, 121.0}) {
    const MenuOffer menu = BuildMenu(ToyRetailer(), sq, listed, alpha);
    for (const MenuItem& item : menu.items) {
      MenuOffer single{{item}, alpha};
      const bool local_accepts = SupplierChoose(supplier, single, standalone).chosen.has_value();
      f.Expect(pool.client(1).Offer(item.plan, item.fee, 1) == local_accepts,
               "offer " + Str(item.plan) + " at alpha " + std::to_string(alpha));
    }
    const MenuChoice pick = SupplierChoose(supplier, menu, standalone);
    if (pick.chosen) {
      const MenuItem& item = menu.items[*pick.chosen];
      f.Expect(pool.client(1).Offer(item.plan, item.fee, 1), "chosen plan declined over the wire");
    }
  }
  pool.Close();

  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> byte(0, 255), len(0, 160), coin(0, 1);
  const std::string valid = Encode(Message::Query("agent1.1", 3, {0.5, -0.5}, {10, 90}));
  for (int k = 0; k < 100000; ++k) {
    std::string line;
    if (coin(rng)) {
      line = valid;
      for (int e = 0; e < 3; ++e) line[rng() % line.size()] = static_cast<char>(byte(rng));
    } else {
      for (int i = len(rng); i > 0; --i) line.push_back(static_cast<char>(byte(rng)));
    }
    try {
      Decode(line);
    } catch (const ParseError&) {
    } catch (const std::exception& e) {
      f.Expect(false, std::string("decoder threw ") + e.what());
      break;
    }
  }
}

void LpOracle(Findings& f) {
  std::mt19937_64 rng(10);
  std::uniform_int_distribution<int> dim(1, 3), cost(0, 9), coin(0, 1);
  int done = 0;
  while (done < 100) {
    const int m = dim(rng);
    const int n = dim(rng);
    Matrix c(m, Vector(n));
    for (auto& row : c) {
      for (double& v : row) v = cost(rng);
    }
    // Totals at most 12 on each side.
    const auto split = [&](int parts) {
      std::vector<int> out(parts, 0);
      const int total = std::uniform_int_distribution<int>(0, 12)(rng);
      for (int k = 0; k < total; ++k) ++out[rng() % parts];
      return out;
    };
    const std::vector<int> rows = split(m);
    const std::vector<int> cols = split(n);
    const bool with_slack = coin(rng) == 1;
    int supply = 0, need = 0;
    for (int r : rows) supply += r;
    for (int q : cols) need += q;
    if (!with_slack && need > supply) continue;
    const std::optional<double> slack = with_slack ? std::optional<double>(25.0) : std::nullopt;
    const TransportSolution s = SolveTransport(c, Vector(rows.begin(), rows.end()),
                                               Vector(cols.begin(), cols.end()), slack);
    const double want = testing::EnumerateTransport(c, rows, cols, slack);
    f.Expect(s.objective == want, "case " + std::to_string(done) + ": solver " +
                                      std::to_string(s.objective) + " vs " + std::to_string(want));
    ++done;
  }
}

struct Criterion {
  int id;
  std::string name;
  std::chrono::milliseconds budget;
  std::function<void(Findings&)> body;
};

}  // namespace
}  // namespace coplan

int main() {
  using namespace coplan;
  using std::chrono::milliseconds;
  const std::vector<Criterion> criteria = {
      {1, "toy regression", milliseconds(1000), ToyRegression},
      {2, "menu regression", milliseconds(1000), MenuRegression},
      {3, "consensus matches centralized", milliseconds(10000 * 21), ConsensusEquivalence},
      {4, "mechanism properties", milliseconds(60000), MechanismProperties},
      {5, "dynamic CBT", milliseconds(30000), DynamicSuite},
      {6, "protocol parity", milliseconds(30000), ProtocolParity},
      {7, "LP oracle equivalence", milliseconds(10000), LpOracle},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    Findings f;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.body(f);
    } catch (const std::exception& e) {
      f.Expect(false, std::string("exception: ") + e.what());
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (seconds * 1000.0 > static_cast<double>(c.budget.count())) {
      f.Expect(false, "over the time budget");
    }
    const bool pass = f.failures().empty();
    if (!pass) ++failed;
    std::printf("%s criterion %d: %s (%.2f s)\n", pass ? "PASS" : "FAIL", c.id, c.name.c_str(),
                seconds);
    for (std::size_t k = 0; k < f.failures().size() && k < 5; ++k) {
      std::printf("    %s\n", f.failures()[k].c_str());
    }
    if (f.failures().size() > 5) std::printf("    ... %zu more\n", f.failures().size() - 5);
  }
  return failed == 0 ? 0 : 1;
}
