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

#include "coplan/cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>
#include <thread>
#include <utility>

#include "coplan/errors.hpp"

namespace coplan {
namespace {

using nlohmann::json;

// Reads one JSON object, tracking the field path and which keys were used.
class Fields {
 public:
  Fields(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw SchemaError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string PathOf(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const json* Find(const std::string& key) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    return it == obj_.end() || it->is_null() ? nullptr : &*it;
  }

  const json& Require(const std::string& key) {
    const json* v = Find(key);
    if (!v) throw SchemaError(PathOf(key), "missing required field");
    return *v;
  }

  double Number(const std::string& key, std::optional<double> fallback = std::nullopt) {
    const json* v = Find(key);
    if (!v) {
      if (!fallback) throw SchemaError(PathOf(key), "missing required field");
      return *fallback;
    }
    return AsNumber(*v, PathOf(key));
  }

  std::size_t Count(const std::string& key, std::size_t fallback) {
    const json* v = Find(key);
    if (!v) return fallback;
    if (!v->is_number_unsigned()) throw SchemaError(PathOf(key), "expected a nonnegative integer");
    return v->get<std::size_t>();
  }

  bool Flag(const std::string& key, bool fallback) {
    const json* v = Find(key);
    if (!v) return fallback;
    if (!v->is_boolean()) throw SchemaError(PathOf(key), "expected true or false");
    return v->get<bool>();
  }

  std::string Text(const std::string& key, const std::string& fallback) {
    const json* v = Find(key);
    if (!v) return fallback;
    if (!v->is_string()) throw SchemaError(PathOf(key), "expected a string");
    return v->get<std::string>();
  }

  Vector Numbers(const std::string& key, std::optional<Vector> fallback = std::nullopt) {
    const json* v = Find(key);
    if (!v) {
      if (!fallback) throw SchemaError(PathOf(key), "missing required field");
      return *fallback;
    }
    return AsNumbers(*v, PathOf(key));
  }

  Matrix NumberMatrix(const std::string& key) {
    const json& v = Require(key);
    const std::string path = PathOf(key);
    if (!v.is_array()) throw SchemaError(path, "expected an array of rows");
    Matrix m;
    for (std::size_t i = 0; i < v.size(); ++i) {
      m.push_back(AsNumbers(v[i], path + "[" + std::to_string(i) + "]"));
    }
    return m;
  }

  // Unknown keys are errors.
  void Finish() const {
    for (const auto& [key, value] : obj_.items()) {
      if (!seen_.contains(key)) throw SchemaError(PathOf(key), "unknown field");
    }
  }

  static double AsNumber(const json& v, const std::string& path) {
    if (!v.is_number()) throw SchemaError(path, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw SchemaError(path, "expected a finite number");
    return d;
  }

  static Vector AsNumbers(const json& v, const std::string& path) {
    if (!v.is_array()) throw SchemaError(path, "expected an array of numbers");
    Vector out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      out.push_back(AsNumber(v[i], path + "[" + std::to_string(i) + "]"));
    }
    return out;
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

SupplyPlan PlanAt(const Vector& v, const std::string& path) {
  try {
    return SupplyPlan(v);
  } catch (const Error& e) {
    throw SchemaError(path, e.what());
  }
}

FeePolicy ParseFee(const json& doc) {
  Fields f(doc, "fee");
  FeePolicy fee;
  const std::string kind = f.Text("kind", "none");
  fee.alpha = f.Number("alpha", 0.0);
  fee.beta = f.Number("beta", 0.0);
  fee.roi = f.Number("roi", 0.0);
  fee.over_rate = f.Number("over_rate", 0.0);
  fee.under_rate = f.Number("under_rate", 0.0);
  f.Finish();
  if (kind == "none") {
    fee.kind = FeePolicy::Kind::kNone;
  } else if (kind == "additive") {
    fee.kind = FeePolicy::Kind::kAdditive;
  } else if (kind == "multiplicative") {
    fee.kind = FeePolicy::Kind::kMultiplicative;
  } else if (kind == "roi") {
    fee.kind = FeePolicy::Kind::kRoi;
  } else if (kind == "linear-deviation") {
    fee.kind = FeePolicy::Kind::kLinearDeviation;
  } else {
    throw SchemaError("fee.kind", "unknown fee kind '" + kind + "'");
  }
  return fee;
}

std::string CommitmentName(CommitmentMode mode) {
  return mode == CommitmentMode::kFullHorizon ? "full-horizon" : "none";
}

json PlanJson(const SupplyPlan& x) { return json(x.values()); }

std::string FormatPlan(const SupplyPlan& x) {
  std::string out = "(";
  for (std::size_t i = 0; i < x.size(); ++i) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", x[i] == 0.0 ? 0.0 : x[i]);
    out += (i ? ", " : "") + std::string(buf);
  }
  return out + ")";
}

// Text table rows: label left, value right-aligned.
void Row(std::ostringstream& out, const std::string& label, const std::string& value) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "  %-34s %14s\n", label.c_str(), value.c_str());
  out << buf;
}

// Loopback agents served on ephemeral ports for protocol mode.
class LoopbackAgents {
 public:
  LoopbackAgents(std::unique_ptr<Agent> retailer, std::unique_ptr<Agent> supplier,
                 std::optional<ParticipationRule> supplier_rule) {
    agents_.push_back(std::move(retailer));
    agents_.push_back(std::move(supplier));
    servers_.push_back(std::make_unique<AgentServer>(*agents_[0], std::nullopt,
                                                     Endpoint{"127.0.0.1", 0}));
    servers_.push_back(std::make_unique<AgentServer>(*agents_[1], std::move(supplier_rule),
                                                     Endpoint{"127.0.0.1", 0}));
    for (auto& s : servers_) threads_.emplace_back([server = s.get()] { server->Serve(); });
  }

  ~LoopbackAgents() {
    for (auto& s : servers_) s->Stop();
    for (auto& t : threads_) t.join();
  }

  std::vector<Endpoint> endpoints() const {
    std::vector<Endpoint> out;
    for (const auto& s : servers_) out.push_back({"127.0.0.1", s->port()});
    return out;
  }

 private:
  std::vector<std::unique_ptr<Agent>> agents_;
  std::vector<std::unique_ptr<AgentServer>> servers_;
  std::vector<std::thread> threads_;
};

// A consensus run over the wire. Declared order matters: the pool says bye
// before the loopback servers are stopped.
struct WireSession {
  std::unique_ptr<LoopbackAgents> loopback;
  std::unique_ptr<RemotePool> pool;
};

void CheckIdentity(bool ok, const std::string& what) {
  if (!ok) throw StateError("report identity violated: " + what);
}

bool Near(double a, double b) { return std::abs(a - b) <= 1e-6 * (1.0 + std::abs(a) + std::abs(b)); }

}  // namespace

std::string ToString(RunMode mode) {
  switch (mode) {
    case RunMode::kCentralized: return "centralized";
    case RunMode::kCpp: return "cpp";
    case RunMode::kProtocol: return "protocol";
  }
  return "unknown";
}

RunMode ParseRunMode(const std::string& text) {
  if (text == "centralized") return RunMode::kCentralized;
  if (text == "cpp") return RunMode::kCpp;
  if (text == "protocol") return RunMode::kProtocol;
  throw ParameterError("mode must be centralized, cpp or protocol, got '" + text + "'");
}

std::string ToString(Analysis analysis) {
  switch (analysis) {
    case Analysis::kJit: return "jit";
    case Analysis::kFirstBest: return "firstbest";
    case Analysis::kVcg: return "vcg";
    case Analysis::kMenu: return "menu";
    case Analysis::kDynamic: return "dynamic";
  }
  return "unknown";
}

std::set<Analysis> ParseAnalyses(const std::string& text) {
  const std::set<Analysis> all = {Analysis::kJit, Analysis::kFirstBest, Analysis::kVcg,
                                  Analysis::kMenu, Analysis::kDynamic};
  std::set<Analysis> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    if (item == "all") return all;
    bool found = false;
    for (Analysis a : all) {
      if (ToString(a) == item) {
        out.insert(a);
        found = true;
      }
    }
    if (!found) throw ParameterError("unknown analysis '" + item + "'");
  }
  if (out.empty()) throw ParameterError("no analyses requested");
  return out;
}

void Scenario::Validate() const {
  try {
    retailer.Validate();
  } catch (const SchemaError&) {
    throw;
  } catch (const Error& e) {
    throw SchemaError("retailer", e.what());
  }
  try {
    supplier.Validate();
  } catch (const Error& e) {
    throw SchemaError("supplier", e.what());
  }
  if (retailer.inbound_nodes() != supplier.inbound_nodes()) {
    throw SchemaError("supplier.gross_profit",
                      "supplier has " + std::to_string(supplier.inbound_nodes()) +
                          " inbound nodes, retailer has " +
                          std::to_string(retailer.inbound_nodes()));
  }
  try {
    fee.Validate();
  } catch (const Error& e) {
    throw SchemaError("fee", e.what());
  }
  const std::size_t n = retailer.inbound_nodes();
  if (menu) {
    for (std::size_t k = 0; k < menu->plans.size(); ++k) {
      if (menu->plans[k].size() != n) {
        throw SchemaError("menu.plans[" + std::to_string(k) + "]", "plan dimension mismatch");
      }
    }
    if (!std::isfinite(menu->alpha)) throw SchemaError("menu.alpha", "expected a finite number");
  }
  if (status_quo) {
    if (status_quo->retailer_plan.size() != n) {
      throw SchemaError("status_quo.retailer_plan", "plan dimension mismatch");
    }
    if (status_quo->supplier_plan.size() != n) {
      throw SchemaError("status_quo.supplier_plan", "plan dimension mismatch");
    }
    if (status_quo->supplier_plan.total() > supplier.total_capacity() + kLpTolerance) {
      throw SchemaError("status_quo.supplier_plan", "exceeds supplier capacity");
    }
  }
  if (dynamic) {
    try {
      dynamic->model.Validate();
    } catch (const Error& e) {
      throw SchemaError("dynamic", e.what());
    }
    if (!dynamic->realized.empty() && dynamic->realized.size() != dynamic->model.weeks()) {
      throw SchemaError("dynamic.realized", "must cover every forecast week");
    }
    if (dynamic->initial_inventory < 0.0) {
      throw SchemaError("dynamic.initial_inventory", "must be nonnegative");
    }
    if (dynamic->initial_order < 0.0) throw SchemaError("dynamic.initial_order", "must be nonnegative");
  }
  if (!(consensus.rho > 0.0)) throw SchemaError("consensus.rho", "must be positive");
  if (!(consensus.eps_abs > 0.0)) throw SchemaError("consensus.eps_abs", "must be positive");
  if (!(consensus.eps_rel >= 0.0)) throw SchemaError("consensus.eps_rel", "must be nonnegative");
  if (consensus.max_iters < 1) throw SchemaError("consensus.max_iters", "must be at least 1");
}

Scenario ScenarioFromJson(const json& doc) {
  Fields root(doc, "");
  Scenario s;
  {
    Fields r(root.Require("retailer"), "retailer");
    s.retailer.demand = r.Numbers("demand");
    s.retailer.arc_costs = r.NumberMatrix("arc_costs");
    s.retailer.gross_profit = r.Numbers("gross_profit");
    s.retailer.lost_sales_penalty = r.Number("lost_sales_penalty", 1000.0);
    r.Finish();
  }
  {
    Fields p(root.Require("supplier"), "supplier");
    s.supplier.capacity = p.Numbers("capacity");
    s.supplier.arc_costs = p.NumberMatrix("arc_costs");
    s.supplier.gross_profit = p.Numbers("gross_profit");
    p.Finish();
  }
  if (const json* fee = root.Find("fee")) s.fee = ParseFee(*fee);
  if (const json* menu = root.Find("menu")) {
    Fields m(*menu, "menu");
    MenuConfig config;
    config.alpha = m.Number("alpha", 0.0);
    if (const json* plans = m.Find("plans")) {
      if (!plans->is_array()) throw SchemaError("menu.plans", "expected an array of plans");
      for (std::size_t k = 0; k < plans->size(); ++k) {
        const std::string path = "menu.plans[" + std::to_string(k) + "]";
        config.plans.push_back(PlanAt(Fields::AsNumbers((*plans)[k], path), path));
      }
    }
    m.Finish();
    s.menu = std::move(config);
  }
  if (const json* sq = root.Find("status_quo")) {
    Fields q(*sq, "status_quo");
    SupplyPlan xa = PlanAt(q.Numbers("retailer_plan"), "status_quo.retailer_plan");
    SupplyPlan xs = PlanAt(q.Numbers("supplier_plan"), "status_quo.supplier_plan");
    q.Finish();
    if (xa.size() != xs.size()) throw SchemaError("status_quo.supplier_plan", "plan dimension mismatch");
    s.status_quo = ExplicitStatusQuo(std::move(xa), std::move(xs));
  }
  if (const json* dyn = root.Find("dynamic")) {
    Fields d(*dyn, "dynamic");
    DynamicConfig config;
    config.model.horizon = d.Count("horizon", 6);
    config.model.forecast = d.Numbers("forecast");
    config.model.target = d.Numbers("target", Vector{});
    config.model.holding_cost = d.Number("holding_cost");
    config.model.lost_sales_cost = d.Number("lost_sales_cost");
    config.model.retailer_margin = d.Number("retailer_margin");
    config.model.supplier_margin = d.Number("supplier_margin", 0.0);
    config.model.smoothing = d.Number("smoothing", 0.0);
    config.initial_inventory = d.Number("initial_inventory", 0.0);
    config.initial_order = d.Number("initial_order", 0.0);
    const std::string commitment = d.Text("commitment", "none");
    if (commitment == "none") {
      config.commitment = CommitmentMode::kNone;
    } else if (commitment == "full-horizon") {
      config.commitment = CommitmentMode::kFullHorizon;
    } else {
      throw SchemaError("dynamic.commitment", "expected none or full-horizon");
    }
    config.realized = d.Numbers("realized", Vector{});
    d.Finish();
    s.dynamic = std::move(config);
  }
  if (const json* c = root.Find("consensus")) {
    Fields f(*c, "consensus");
    s.consensus.rho = f.Number("rho", s.consensus.rho);
    s.consensus.eps_abs = f.Number("eps_abs", s.consensus.eps_abs);
    s.consensus.eps_rel = f.Number("eps_rel", s.consensus.eps_rel);
    const std::size_t iters = f.Count("max_iters", static_cast<std::size_t>(s.consensus.max_iters));
    if (iters > static_cast<std::size_t>(std::numeric_limits<int>::max())) {
      throw SchemaError("consensus.max_iters", "too large");
    }
    s.consensus.max_iters = static_cast<int>(iters);
    s.consensus.adaptive_rho = f.Flag("adaptive_rho", false);
    f.Finish();
  }
  try {
    s.mode = ParseRunMode(root.Text("mode", "centralized"));
  } catch (const ParameterError& e) {
    throw SchemaError("mode", e.what());
  }
  root.Finish();
  s.Validate();
  return s;
}

json ScenarioToJson(const Scenario& s) {
  json doc;
  doc["retailer"] = {{"demand", s.retailer.demand},
                     {"arc_costs", s.retailer.arc_costs},
                     {"gross_profit", s.retailer.gross_profit},
                     {"lost_sales_penalty", s.retailer.lost_sales_penalty}};
  doc["supplier"] = {{"capacity", s.supplier.capacity},
                     {"arc_costs", s.supplier.arc_costs},
                     {"gross_profit", s.supplier.gross_profit}};
  doc["fee"] = {{"kind", s.fee.name()},         {"alpha", s.fee.alpha},
                {"beta", s.fee.beta},           {"roi", s.fee.roi},
                {"over_rate", s.fee.over_rate}, {"under_rate", s.fee.under_rate}};
  if (s.menu) {
    json plans = json::array();
    for (const SupplyPlan& p : s.menu->plans) plans.push_back(PlanJson(p));
    doc["menu"] = {{"alpha", s.menu->alpha}, {"plans", plans}};
  }
  if (s.status_quo) {
    doc["status_quo"] = {{"retailer_plan", PlanJson(s.status_quo->retailer_plan)},
                         {"supplier_plan", PlanJson(s.status_quo->supplier_plan)}};
  }
  if (s.dynamic) {
    const InventoryModel& m = s.dynamic->model;
    doc["dynamic"] = {{"horizon", m.horizon},
                      {"forecast", m.forecast},
                      {"target", m.target},
                      {"holding_cost", m.holding_cost},
                      {"lost_sales_cost", m.lost_sales_cost},
                      {"retailer_margin", m.retailer_margin},
                      {"supplier_margin", m.supplier_margin},
                      {"smoothing", m.smoothing},
                      {"initial_inventory", s.dynamic->initial_inventory},
                      {"initial_order", s.dynamic->initial_order},
                      {"commitment", CommitmentName(s.dynamic->commitment)},
                      {"realized", s.dynamic->realized}};
  }
  doc["consensus"] = {{"rho", s.consensus.rho},
                      {"eps_abs", s.consensus.eps_abs},
                      {"eps_rel", s.consensus.eps_rel},
                      {"max_iters", s.consensus.max_iters},
                      {"adaptive_rho", s.consensus.adaptive_rho}};
  doc["mode"] = ToString(s.mode);
  return doc;
}

Scenario LoadScenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("<file>", "cannot open scenario file " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw SchemaError("<file>", std::string("not valid JSON: ") + e.what());
  }
  return ScenarioFromJson(doc);
}

void SaveScenario(const Scenario& scenario, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write scenario file " + path);
  out << ScenarioToJson(scenario).dump(2) << '\n';
  if (!out) throw Error("failed writing scenario file " + path);
}

std::string FormatMoney(double dollars) {
  double cents = std::round(dollars * 100.0) / 100.0;
  if (cents == 0.0) cents = 0.0;  // no "-0.00"
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", cents);
  return buf;
}

Report Run(const Scenario& input, const RunOptions& options) {
  Scenario s = input;
  if (options.alpha) {
    s.fee = FeePolicy::Additive(*options.alpha);
    if (s.menu) s.menu->alpha = *options.alpha;
  }
  s.Validate();
  const RunMode mode = options.mode ? *options.mode : s.mode;
  const auto wants = [&](Analysis a) { return options.analyses.contains(a); };
  const bool need_firstbest =
      wants(Analysis::kFirstBest) || wants(Analysis::kVcg) || wants(Analysis::kMenu);
  const bool need_jit = need_firstbest || wants(Analysis::kJit);

  ConsensusConfig consensus = s.consensus;
  consensus.trace = options.trace;
  consensus.record_history = false;

  Report report;
  json& doc = report.doc;
  std::ostringstream text;
  doc["mode"] = ToString(mode);
  doc["scenario"] = ScenarioToJson(s);
  text << "coplan report (mode: " << ToString(mode) << ")\n";

  StatusQuo sq;
  UtilityEval a_sq, s_sq;
  if (need_jit) {
    sq = s.status_quo ? *s.status_quo : StandalonePlans(s.retailer, s.supplier);
    a_sq = RetailerUtility(s.retailer, sq.retailer_plan);
    s_sq = SupplierUtility(s.supplier, sq.supplier_plan);
  }
  const double jit_total = a_sq.transport_cost + s_sq.transport_cost;
  if (wants(Analysis::kJit)) {
    CheckIdentity(Near(jit_total, a_sq.transport_cost + s_sq.transport_cost), "JIT cost total");
    doc["jit"] = {{"retailer_plan", PlanJson(sq.retailer_plan)},
                  {"supplier_plan", PlanJson(sq.supplier_plan)},
                  {"status_quo", sq.mode == StatusQuoMode::kExplicit ? "explicit" : "jit-derived"},
                  {"fully_confirmed", sq.fully_confirmed},
                  {"retailer_cost", a_sq.transport_cost},
                  {"supplier_cost", s_sq.transport_cost},
                  {"total_cost", jit_total},
                  {"retailer_utility", a_sq.utility},
                  {"supplier_utility", s_sq.utility}};
    text << "\nJIT status quo\n";
    Row(text, "retailer plan x_A", FormatPlan(sq.retailer_plan));
    Row(text, "supplier plan x_S", FormatPlan(sq.supplier_plan));
    Row(text, "retailer transport cost", FormatMoney(a_sq.transport_cost));
    Row(text, "supplier transport cost", FormatMoney(s_sq.transport_cost));
    Row(text, "total cost", FormatMoney(jit_total));
    Row(text, "retailer utility u_A(x_A)", FormatMoney(a_sq.utility));
    Row(text, "supplier utility u_S(x_S)", FormatMoney(s_sq.utility));
  }

  // Plans by the selected method. Protocol runs keep the plain session open
  // for the menu offer.
  WireSession wire;
  const auto wire_plan = [&](const FeePolicy& boost, WireSession& session) {
    const std::size_t n = s.retailer.inbound_nodes();
    if (options.agents.empty()) {
      ParticipationRule rule;
      auto supplier_agent = MakeSupplierAgent(s.supplier);
      Agent* supplier_view = supplier_agent.get();
      rule.utility = [supplier_view](const SupplyPlan& x) { return supplier_view->Utility(x); };
      rule.standalone_utility = s_sq.utility;
      session.loopback = std::make_unique<LoopbackAgents>(
          MakeBoostedRetailerAgent(s.retailer, boost, sq.retailer_plan), std::move(supplier_agent),
          std::move(rule));
      session.pool = std::make_unique<RemotePool>(session.loopback->endpoints(), n,
                                                  options.agent_timeout);
    } else {
      if (options.agents.size() != 2) {
        throw ParameterError("protocol mode takes two agents: retailer, supplier");
      }
      if (boost.distorts_allocation()) {
        throw ParameterError("a plan-dependent fee needs loopback agents in protocol mode");
      }
      session.pool = std::make_unique<RemotePool>(options.agents, n, options.agent_timeout);
    }
    ConsensusConfig cfg = consensus;
    cfg.initial = SnapToJointDomain(sq.retailer_plan.values(), s.retailer, s.supplier);
    const ConsensusResult run = RunConsensus(*session.pool, cfg);
    RequireConverged(run);
    return std::make_pair(SnapToJointDomain(run.plan.values(), s.retailer, s.supplier),
                          run.iterations);
  };
  const auto plan_for = [&](const FeePolicy& fee, WireSession& session) {
    if (mode == RunMode::kProtocol) return wire_plan(fee, session);
    EfficientPlanOptions opts;
    opts.method = mode == RunMode::kCentralized ? PlanMethod::kCentralized : PlanMethod::kCpp;
    opts.consensus = consensus;
    opts.status_quo_plan = sq.retailer_plan;
    const EfficientPlanResult r = EfficientPlan(s.retailer, s.supplier, fee, opts);
    return std::make_pair(r.plan, r.iterations);
  };

  SupplyPlan x_star;
  if (need_firstbest) {
    const auto [plan, iterations] = plan_for(FeePolicy::None(), wire);
    x_star = plan;
    const UtilityEval a = RetailerUtility(s.retailer, x_star);
    const UtilityEval b = SupplierUtility(s.supplier, x_star);
    const double total = a.transport_cost + b.transport_cost;
    const double gain = a.utility + b.utility - a_sq.utility - s_sq.utility;
    const double pct = jit_total > 0.0 ? 100.0 * (jit_total - total) / jit_total : 0.0;
    if (wants(Analysis::kFirstBest)) {
      doc["firstbest"] = {{"plan", PlanJson(x_star)},
                          {"retailer_cost", a.transport_cost},
                          {"supplier_cost", b.transport_cost},
                          {"total_cost", total},
                          {"retailer_utility", a.utility},
                          {"supplier_utility", b.utility},
                          {"joint_utility", a.utility + b.utility},
                          {"coordination_gain", gain},
                          {"cost_reduction", jit_total - total},
                          {"cost_reduction_pct", pct},
                          {"iterations", iterations}};
      text << "\nFirst-best plan\n";
      Row(text, "plan x*", FormatPlan(x_star));
      Row(text, "retailer transport cost", FormatMoney(a.transport_cost));
      Row(text, "supplier transport cost", FormatMoney(b.transport_cost));
      Row(text, "total cost", FormatMoney(total));
      Row(text, "joint utility", FormatMoney(a.utility + b.utility));
      Row(text, "coordination gain g", FormatMoney(gain));
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.2f%%", pct);
      Row(text, "cost reduction vs JIT", buf);
      if (mode != RunMode::kCentralized) Row(text, "consensus iterations", std::to_string(iterations));
    }
  }

  if (wants(Analysis::kVcg)) {
    SupplyPlan allocated = x_star;
    if (s.fee.distorts_allocation()) {
      WireSession boosted;
      allocated = plan_for(s.fee, boosted).first;
    }
    SettlementReport r = VcgTransfers(s.retailer, s.supplier, sq, allocated, s.fee);
    r.unboosted_plan = x_star;
    r.allocation_distorted = DistInf(x_star.values(), allocated.values()) >
                             (mode == RunMode::kCentralized ? 1e-7 : 1e-3 * (1.0 + x_star.total()));
    const BudgetDiagnosis budget = BudgetBalanceCheck(r);

    CheckIdentity(Near(r.retailer_utility + r.transfer_supplier,
                       r.retailer_standalone_utility + r.fee_term),
                  "u_A(x*) + t_S = u_A(x_A) + fee");
    CheckIdentity(Near(r.supplier_net_surplus + r.retailer_net_surplus, r.coordination_gain),
                  "supplier surplus + retailer surplus = g");
    CheckIdentity(Near(r.budget_sum, r.transfer_retailer + r.transfer_supplier), "budget sum");
    CheckIdentity(Near(r.coordination_gain, CoordinationGain(r)), "coordination gain");
    CheckIdentity(budget.agrees, "budget regime agrees with the joint-utility inequality");

    doc["vcg"] = {{"fee", ScenarioToJson(s)["fee"]},
                  {"plan", PlanJson(r.plan)},
                  {"unboosted_plan", PlanJson(r.unboosted_plan)},
                  {"allocation_distorted", r.allocation_distorted},
                  {"fee_term", r.fee_term},
                  {"transfer_supplier", r.transfer_supplier},
                  {"transfer_retailer", r.transfer_retailer},
                  {"budget_sum", r.budget_sum},
                  {"budget_sum_without_fee", budget.sum},
                  {"budget_regime", ToString(budget.regime)},
                  {"coordination_gain", r.coordination_gain},
                  {"supplier_surplus", r.supplier_net_surplus},
                  {"retailer_surplus", r.retailer_net_surplus},
                  {"retailer_utility", r.retailer_utility},
                  {"supplier_utility", r.supplier_utility}};
    text << "\nVCG settlement (fee: " << s.fee.name() << ")\n";
    Row(text, "allocated plan", FormatPlan(r.plan));
    if (r.allocation_distorted) Row(text, "efficient plan (no fee)", FormatPlan(r.unboosted_plan));
    Row(text, "fee term", FormatMoney(r.fee_term));
    Row(text, "supplier transfer t_S", FormatMoney(r.transfer_supplier));
    Row(text, "retailer-agent transfer t_A", FormatMoney(r.transfer_retailer));
    Row(text, "budget t_A + t_S", FormatMoney(r.budget_sum));
    Row(text, "budget regime (no fee)", ToString(budget.regime));
    Row(text, "coordination gain g", FormatMoney(r.coordination_gain));
    Row(text, "supplier surplus", FormatMoney(r.supplier_net_surplus));
    Row(text, "retailer surplus", FormatMoney(r.retailer_net_surplus));
  }

  if (wants(Analysis::kMenu)) {
    double alpha = 0.0;
    if (s.menu) {
      alpha = s.menu->alpha;
    } else if (s.fee.kind == FeePolicy::Kind::kAdditive) {
      alpha = s.fee.alpha;
    }
    const std::vector<SupplyPlan> plans = s.menu && !s.menu->plans.empty()
                                              ? s.menu->plans
                                              : DefaultMenuPlans(sq.retailer_plan, x_star,
                                                                 JointPlanCap(s.retailer, s.supplier));
    const MenuOffer menu = BuildMenu(s.retailer, sq, plans, alpha);
    const MenuChoice choice = SupplierChoose(s.supplier, menu, s_sq.utility);
    json items = json::array();
    text << "\nMenu of contracts (alpha " << FormatMoney(alpha) << ")\n";
    char header[160];
    std::snprintf(header, sizeof(header), "  %-6s %-20s %10s %12s %12s %10s\n", "option", "plan",
                  "fee", "u_S", "u_S - alpha", "u_S - fee");
    text << header;
    for (std::size_t k = 0; k < menu.items.size(); ++k) {
      const auto& u = choice.option_utilities[k];
      json item = {{"plan", PlanJson(menu.items[k].plan)}, {"fee", menu.items[k].fee}};
      item["supplier_utility"] = u ? json(*u) : json(nullptr);
      item["supplier_utility_less_alpha"] = u ? json(*u - alpha) : json(nullptr);
      item["net"] = u ? json(choice.option_net[k]) : json(nullptr);
      items.push_back(item);
      char line[200];
      std::snprintf(line, sizeof(line), "  %-6zu %-20s %10s %12s %12s %10s\n", k + 1,
                    FormatPlan(menu.items[k].plan).c_str(), FormatMoney(menu.items[k].fee).c_str(),
                    u ? FormatMoney(*u).c_str() : "infeasible",
                    u ? FormatMoney(*u - alpha).c_str() : "-",
                    u ? FormatMoney(choice.option_net[k]).c_str() : "-");
      text << line;
    }
    doc["menu"] = {{"alpha", alpha}, {"items", items}};
    if (choice.chosen) {
      doc["menu"]["chosen"] = *choice.chosen + 1;
      doc["menu"]["net_utility"] = choice.net_utility;
      text << "  supplier chooses option " << *choice.chosen + 1 << " "
           << FormatPlan(menu.items[*choice.chosen].plan) << ", net "
           << FormatMoney(choice.net_utility) << "\n";
    } else {
      doc["menu"]["chosen"] = nullptr;
      doc["menu"]["settlement"] = "status quo, zero transfers";
      text << "  supplier declines; status quo with zero transfers\n";
    }
    if (mode == RunMode::kProtocol && wire.pool) {
      // Take-it-or-leave-it offer of x* at its menu price.
      const double fee = a_sq.utility - RetailerUtility(s.retailer, x_star).utility + alpha;
      const bool accepted = wire.pool->client(1).Offer(x_star, fee, 1);
      doc["menu"]["offer"] = {{"plan", PlanJson(x_star)}, {"fee", fee}, {"accepted", accepted}};
      text << "  offer " << FormatPlan(x_star) << " at " << FormatMoney(fee) << ": "
           << (accepted ? "accepted" : "declined") << "\n";
    }
  }
  if (wire.pool) wire.pool->Close();

  if (wants(Analysis::kDynamic) && s.dynamic) {
    RollingState start;
    start.inventory = s.dynamic->initial_inventory;
    start.last_order = s.dynamic->initial_order;
    start.mode = s.dynamic->commitment;
    const std::vector<WeekRecord> weeks =
        Simulate(s.dynamic->model, start, s.dynamic->realized);
    json rows = json::array();
    double cumulative = 0.0;
    text << "\nRolling horizon (commitment: " << CommitmentName(s.dynamic->commitment) << ")\n";
    char header[200];
    std::snprintf(header, sizeof(header), "  %-4s %9s %9s %9s %9s %9s %9s %10s\n", "week", "order",
                  "jit", "start inv", "demand", "sales", "end inv", "CBT");
    text << header;
    for (const WeekRecord& w : weeks) {
      CheckIdentity(Near(w.end_inventory, w.start_inventory + w.order - w.sales), "inventory balance");
      cumulative += w.cbt;
      rows.push_back({{"week", w.week + 1},
                      {"order", w.order},
                      {"jit_order", w.jit_order},
                      {"start_inventory", w.start_inventory},
                      {"demand", w.demand},
                      {"sales", w.sales},
                      {"lost_sales", w.lost_sales},
                      {"end_inventory", w.end_inventory},
                      {"cbt", w.cbt}});
      char line[200];
      std::snprintf(line, sizeof(line), "  %-4zu %9.2f %9.2f %9.2f %9.2f %9.2f %9.2f %10s\n",
                    w.week + 1, w.order, w.jit_order, w.start_inventory, w.demand, w.sales,
                    w.end_inventory, FormatMoney(w.cbt).c_str());
      text << line;
    }
    doc["dynamic"] = {{"commitment", CommitmentName(s.dynamic->commitment)},
                      {"weeks", rows},
                      {"cumulative_cbt", cumulative}};
    Row(text, "cumulative CBT", FormatMoney(cumulative));
  }
  report.text = text.str();
  return report;
}

}  // namespace coplan
