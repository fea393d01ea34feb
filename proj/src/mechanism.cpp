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

#include "coplan/mechanism.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "coplan/errors.hpp"

namespace coplan {
namespace {

// Successive shortest paths with Bellman-Ford labels. Small networks only:
// the joint planning graph has K + 2I + J + 2 nodes.
class MinCostFlow {
 public:
  explicit MinCostFlow(int nodes) : adjacency_(static_cast<std::size_t>(nodes)) {}

  int AddArc(int from, int to, double capacity, double cost) {
    const int id = static_cast<int>(arcs_.size());
    arcs_.push_back({to, capacity, cost});
    arcs_.push_back({from, 0.0, -cost});
    adjacency_[static_cast<std::size_t>(from)].push_back(id);
    adjacency_[static_cast<std::size_t>(to)].push_back(id + 1);
    return id;
  }

  // Pushes `amount` from source to sink at minimum cost. Returns the amount
  // actually routed.
  double Run(int source, int sink, double amount) {
    constexpr double kCapEps = 1e-12;
    const std::size_t n = adjacency_.size();
    double routed = 0.0;
    while (routed < amount - kCapEps) {
      std::vector<double> dist(n, std::numeric_limits<double>::infinity());
      std::vector<int> via(n, -1);
      dist[static_cast<std::size_t>(source)] = 0.0;
      for (std::size_t round = 0; round < n; ++round) {
        bool changed = false;
        for (std::size_t u = 0; u < n; ++u) {
          if (!std::isfinite(dist[u])) continue;
          for (int id : adjacency_[u]) {
            const Arc& arc = arcs_[static_cast<std::size_t>(id)];
            if (arc.residual <= kCapEps) continue;
            const auto v = static_cast<std::size_t>(arc.to);
            const double candidate = dist[u] + arc.cost;
            if (candidate < dist[v] - 1e-12) {
              dist[v] = candidate;
              via[v] = id;
              changed = true;
            }
          }
        }
        if (!changed) break;
      }
      if (via[static_cast<std::size_t>(sink)] < 0) break;
      double push = amount - routed;
      for (int v = sink; v != source;) {
        const int id = via[static_cast<std::size_t>(v)];
        push = std::min(push, arcs_[static_cast<std::size_t>(id)].residual);
        v = arcs_[static_cast<std::size_t>(id ^ 1)].to;
      }
      for (int v = sink; v != source;) {
        const int id = via[static_cast<std::size_t>(v)];
        arcs_[static_cast<std::size_t>(id)].residual -= push;
        arcs_[static_cast<std::size_t>(id ^ 1)].residual += push;
        v = arcs_[static_cast<std::size_t>(id ^ 1)].to;
      }
      routed += push;
    }
    return routed;
  }

  double Flow(int arc) const { return arcs_[static_cast<std::size_t>(arc ^ 1)].residual; }

 private:
  struct Arc {
    int to;
    double residual;
    double cost;
  };
  std::vector<Arc> arcs_;
  std::vector<std::vector<int>> adjacency_;
};

void CheckShapes(const RetailerSpec& retailer, const SupplierSpec& supplier) {
  retailer.Validate();
  supplier.Validate();
  if (retailer.inbound_nodes() != supplier.inbound_nodes()) {
    throw DimensionError("retailer and supplier disagree on inbound nodes: " +
                         std::to_string(retailer.inbound_nodes()) + " vs " +
                         std::to_string(supplier.inbound_nodes()));
  }
}

void CheckPlanSize(const SupplyPlan& x, std::size_t n, const char* what) {
  if (x.size() != n) {
    throw DimensionError(std::string(what) + " has " + std::to_string(x.size()) +
                         " entries, expected " + std::to_string(n));
  }
}

// Joint plan by min-cost flow. Retailer-side costs are scaled by `weight`
// (multiplicative boost); with `deviation`, inbound throughflow pays the
// linear penalty around `anchor`.
SupplyPlan CentralizedPlan(const RetailerSpec& retailer, const SupplierSpec& supplier,
                           double weight, const FeePolicy* deviation,
                           const SupplyPlan* anchor) {
  const int k_count = static_cast<int>(supplier.sources());
  const int i_count = static_cast<int>(retailer.inbound_nodes());
  const int j_count = static_cast<int>(retailer.regions());
  const int source = 0;
  const int sink = 1;
  const auto source_node = [](int k) { return 2 + k; };
  const auto in_node = [&](int i) { return 2 + k_count + i; };
  const auto out_node = [&](int i) { return 2 + k_count + i_count + i; };
  const auto region_node = [&](int j) { return 2 + k_count + 2 * i_count + j; };

  const double total = retailer.total_demand();
  MinCostFlow graph(2 + k_count + 2 * i_count + j_count);
  for (int k = 0; k < k_count; ++k) {
    graph.AddArc(source, source_node(k), supplier.capacity[static_cast<std::size_t>(k)], 0.0);
    for (int i = 0; i < i_count; ++i) {
      graph.AddArc(source_node(k), in_node(i), total,
                   supplier.arc_costs[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] -
                       supplier.gross_profit[static_cast<std::size_t>(i)]);
    }
  }
  std::vector<std::vector<int>> through(static_cast<std::size_t>(i_count));
  for (int i = 0; i < i_count; ++i) {
    auto& arcs = through[static_cast<std::size_t>(i)];
    if (deviation != nullptr) {
      const double base = (*anchor)[static_cast<std::size_t>(i)];
      arcs.push_back(graph.AddArc(in_node(i), out_node(i), base, -deviation->under_rate));
      arcs.push_back(graph.AddArc(in_node(i), out_node(i), total, deviation->over_rate));
    } else {
      arcs.push_back(graph.AddArc(in_node(i), out_node(i), total, 0.0));
    }
    for (int j = 0; j < j_count; ++j) {
      graph.AddArc(out_node(i), region_node(j), total,
                   weight * retailer.arc_costs[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
    }
  }
  for (int j = 0; j < j_count; ++j) {
    graph.AddArc(source, region_node(j), total, weight * retailer.lost_sales_penalty);
    graph.AddArc(region_node(j), sink, retailer.demand[static_cast<std::size_t>(j)], 0.0);
  }
  const double routed = graph.Run(source, sink, total);
  if (routed < total - 1e-9 * (1.0 + total)) {
    throw InfeasibleError("joint planning network could not route total demand");
  }

  Vector x(static_cast<std::size_t>(i_count), 0.0);
  for (int i = 0; i < i_count; ++i) {
    for (int arc : through[static_cast<std::size_t>(i)]) {
      x[static_cast<std::size_t>(i)] += graph.Flow(arc);
    }
  }
  return SupplyPlan::ClampedFrom(x);
}

double FeeTerm(const FeePolicy& fee, double u_a_standalone, double u_a_star,
               const SupplyPlan& x_star, const SupplyPlan& x_a) {
  switch (fee.kind) {
    case FeePolicy::Kind::kNone:
      return 0.0;
    case FeePolicy::Kind::kAdditive:
      return fee.alpha;
    case FeePolicy::Kind::kMultiplicative:
      return fee.beta * (u_a_standalone - u_a_star);
    case FeePolicy::Kind::kRoi:
      return fee.roi * std::abs(u_a_standalone - u_a_star);
    case FeePolicy::Kind::kLinearDeviation:
      return DeviationPenalty(x_star, x_a, fee.over_rate, fee.under_rate);
  }
  return 0.0;
}

}  // namespace

SupplyPlan RetailerJitPlan(const RetailerSpec& retailer) {
  retailer.Validate();
  const Vector unlimited(retailer.inbound_nodes(), retailer.total_demand());
  const TransportSolution sol = SolveTransport(retailer.arc_costs, unlimited, retailer.demand,
                                               retailer.lost_sales_penalty);
  Vector x(retailer.inbound_nodes(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (double f : sol.flows[i]) x[i] += f;
  }
  return SupplyPlan::ClampedFrom(x);
}

SupplyPlan BestConfirmation(const SupplierSpec& supplier, const SupplyPlan& order) {
  supplier.Validate();
  CheckPlanSize(order, supplier.inbound_nodes(), "order");
  // Profit-maximizing partial fill: unmet order units are free slack, so
  // only arcs with positive margin carry flow.
  Matrix margin_costs = supplier.arc_costs;
  for (auto& row : margin_costs) {
    for (std::size_t i = 0; i < row.size(); ++i) row[i] -= supplier.gross_profit[i];
  }
  const TransportSolution sol =
      SolveTransport(margin_costs, supplier.capacity, order.values(), 0.0);
  Vector x(order.size(), 0.0);
  for (const auto& row : sol.flows) {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += row[i];
  }
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::min(x[i], order[i]);
  return SupplyPlan::ClampedFrom(x);
}

StatusQuo StandalonePlans(const RetailerSpec& retailer, const SupplierSpec& supplier) {
  CheckShapes(retailer, supplier);
  StatusQuo sq;
  sq.mode = StatusQuoMode::kJitDerived;
  sq.retailer_plan = RetailerJitPlan(retailer);
  if (sq.retailer_plan.total() <= supplier.total_capacity() + kLpTolerance) {
    sq.supplier_plan = sq.retailer_plan;
  } else {
    sq.supplier_plan = BestConfirmation(supplier, sq.retailer_plan);
    sq.fully_confirmed = false;
  }
  return sq;
}

StatusQuo ExplicitStatusQuo(SupplyPlan retailer_plan, SupplyPlan supplier_plan) {
  if (retailer_plan.size() != supplier_plan.size()) {
    throw DimensionError("status-quo plans differ in size");
  }
  StatusQuo sq;
  sq.mode = StatusQuoMode::kExplicit;
  sq.retailer_plan = std::move(retailer_plan);
  sq.supplier_plan = std::move(supplier_plan);
  return sq;
}

FeePolicy FeePolicy::Additive(double alpha) {
  FeePolicy p;
  p.kind = Kind::kAdditive;
  p.alpha = alpha;
  p.Validate();
  return p;
}

FeePolicy FeePolicy::Multiplicative(double beta) {
  FeePolicy p;
  p.kind = Kind::kMultiplicative;
  p.beta = beta;
  p.Validate();
  return p;
}

FeePolicy FeePolicy::Roi(double r) {
  FeePolicy p;
  p.kind = Kind::kRoi;
  p.roi = r;
  p.Validate();
  return p;
}

FeePolicy FeePolicy::LinearDeviation(double over_rate, double under_rate) {
  FeePolicy p;
  p.kind = Kind::kLinearDeviation;
  p.over_rate = over_rate;
  p.under_rate = under_rate;
  p.Validate();
  return p;
}

void FeePolicy::Validate() const {
  for (double v : {alpha, beta, roi, over_rate, under_rate}) {
    if (!std::isfinite(v) || v < 0.0) {
      throw ParameterError("fee parameters must be finite and nonnegative");
    }
  }
  if (under_rate > over_rate) {
    throw ParameterError("under-supply rate exceeds over-supply rate");
  }
}

std::string FeePolicy::name() const {
  switch (kind) {
    case Kind::kNone: return "none";
    case Kind::kAdditive: return "additive";
    case Kind::kMultiplicative: return "multiplicative";
    case Kind::kRoi: return "roi";
    case Kind::kLinearDeviation: return "linear-deviation";
  }
  return "unknown";
}

double DeviationPenalty(const SupplyPlan& x_star, const SupplyPlan& x_a, double over_rate,
                        double under_rate) {
  if (over_rate < 0.0 || under_rate < 0.0 || under_rate > over_rate) {
    throw ParameterError("deviation rates need 0 <= under <= over");
  }
  CheckPlanSize(x_star, x_a.size(), "x*");
  double penalty = 0.0;
  for (std::size_t i = 0; i < x_a.size(); ++i) {
    const double d = x_star[i] - x_a[i];
    penalty += d >= 0.0 ? over_rate * d : under_rate * -d;
  }
  return penalty;
}

double JointPlanCap(const RetailerSpec& retailer, const SupplierSpec& supplier) {
  return std::min(retailer.total_demand(), supplier.total_capacity());
}

SupplyPlan SnapToJointDomain(std::span<const double> x, const RetailerSpec& retailer,
                             const SupplierSpec& supplier) {
  return SupplyPlan::ClampedFrom(ProjectCappedOrthant(x, JointPlanCap(retailer, supplier)));
}

std::unique_ptr<CuttingPlaneAgent> MakeBoostedRetailerAgent(RetailerSpec retailer,
                                                            FeePolicy fee, SupplyPlan x_a) {
  retailer.Validate();
  fee.Validate();
  const std::size_t n = retailer.inbound_nodes();
  const double cap = retailer.total_demand();
  if (fee.kind == FeePolicy::Kind::kLinearDeviation) CheckPlanSize(x_a, n, "x_A");
  ConcaveOracle oracle = [retailer = std::move(retailer), fee,
                          x_a = std::move(x_a)](const SupplyPlan& x) {
    UtilityEval eval = RetailerUtility(retailer, x);
    ValueAndSupergradient out{eval.utility, std::move(eval.supergradient)};
    switch (fee.kind) {
      case FeePolicy::Kind::kAdditive:
        out.value += fee.alpha;
        break;
      case FeePolicy::Kind::kMultiplicative:
        out.value *= 1.0 + fee.beta;
        for (double& g : out.supergradient) g *= 1.0 + fee.beta;
        break;
      case FeePolicy::Kind::kLinearDeviation:
        out.value -= DeviationPenalty(x, x_a, fee.over_rate, fee.under_rate);
        // At a kink 0 lies in [-over, under], so it is a valid choice.
        for (std::size_t i = 0; i < x.size(); ++i) {
          if (x[i] > x_a[i]) out.supergradient[i] -= fee.over_rate;
          if (x[i] < x_a[i]) out.supergradient[i] += fee.under_rate;
        }
        break;
      case FeePolicy::Kind::kNone:
      case FeePolicy::Kind::kRoi:
        break;
    }
    return out;
  };
  return std::make_unique<CuttingPlaneAgent>(n, cap, std::move(oracle));
}

EfficientPlanResult EfficientPlan(const RetailerSpec& retailer, const SupplierSpec& supplier,
                                  const FeePolicy& fee, const EfficientPlanOptions& options) {
  CheckShapes(retailer, supplier);
  fee.Validate();
  const bool deviation = fee.kind == FeePolicy::Kind::kLinearDeviation;
  SupplyPlan anchor;
  if (deviation || (options.method == PlanMethod::kCpp && !options.consensus.initial)) {
    anchor = options.status_quo_plan ? *options.status_quo_plan : RetailerJitPlan(retailer);
    CheckPlanSize(anchor, retailer.inbound_nodes(), "status-quo plan");
  }

  EfficientPlanResult result;
  if (options.method == PlanMethod::kCentralized) {
    const double weight =
        fee.kind == FeePolicy::Kind::kMultiplicative ? 1.0 + fee.beta : 1.0;
    result.plan = CentralizedPlan(retailer, supplier, weight, deviation ? &fee : nullptr,
                                  deviation ? &anchor : nullptr);
    return result;
  }

  // Additive and ROI boosts are constants, so the plain utility is used.
  FeePolicy boost = fee.distorts_allocation() ? fee : FeePolicy::None();
  auto retailer_agent = MakeBoostedRetailerAgent(retailer, boost, anchor);
  auto supplier_agent = MakeSupplierAgent(supplier);
  std::vector<Agent*> agents{retailer_agent.get(), supplier_agent.get()};
  ConsensusConfig config = options.consensus;
  if (!config.initial) config.initial = SnapToJointDomain(anchor.values(), retailer, supplier);
  const ConsensusResult run = RunConsensus(agents, config);
  RequireConverged(run);
  result.plan = SnapToJointDomain(run.plan.values(), retailer, supplier);
  result.iterations = run.iterations;
  return result;
}

SettlementReport VcgTransfers(const RetailerSpec& retailer, const SupplierSpec& supplier,
                              const StatusQuo& status_quo, const SupplyPlan& x_star,
                              const FeePolicy& fee) {
  CheckShapes(retailer, supplier);
  fee.Validate();
  const std::size_t n = retailer.inbound_nodes();
  CheckPlanSize(x_star, n, "x*");
  CheckPlanSize(status_quo.retailer_plan, n, "x_A");
  CheckPlanSize(status_quo.supplier_plan, n, "x_S");

  SettlementReport r;
  r.plan = x_star;
  r.unboosted_plan = x_star;
  r.status_quo = status_quo;
  r.fee = fee;

  const UtilityEval a_star = RetailerUtility(retailer, x_star);
  const UtilityEval s_star = SupplierUtility(supplier, x_star);
  const UtilityEval a_sq = RetailerUtility(retailer, status_quo.retailer_plan);
  const UtilityEval s_sq = SupplierUtility(supplier, status_quo.supplier_plan);
  r.retailer_utility = a_star.utility;
  r.supplier_utility = s_star.utility;
  r.retailer_standalone_utility = a_sq.utility;
  r.supplier_standalone_utility = s_sq.utility;
  r.retailer_cost = a_star.transport_cost;
  r.supplier_cost = s_star.transport_cost;
  r.retailer_standalone_cost = a_sq.transport_cost;
  r.supplier_standalone_cost = s_sq.transport_cost;

  r.fee_term = FeeTerm(fee, a_sq.utility, a_star.utility, x_star, status_quo.retailer_plan);
  r.transfer_supplier = a_sq.utility - a_star.utility + r.fee_term;
  r.transfer_retailer = s_sq.utility - s_star.utility;
  r.budget_sum = r.transfer_retailer + r.transfer_supplier;
  r.coordination_gain = s_star.utility + a_star.utility - s_sq.utility - a_sq.utility;
  r.supplier_net_surplus = s_star.utility - r.transfer_supplier - s_sq.utility;
  r.retailer_net_surplus = a_star.utility + r.transfer_supplier - a_sq.utility;
  return r;
}

SettlementReport Settle(const RetailerSpec& retailer, const SupplierSpec& supplier,
                        const StatusQuo& status_quo, const FeePolicy& fee,
                        const EfficientPlanOptions& options) {
  EfficientPlanOptions opts = options;
  if (!opts.status_quo_plan) opts.status_quo_plan = status_quo.retailer_plan;
  const SupplyPlan plain = EfficientPlan(retailer, supplier, FeePolicy::None(), opts).plan;
  SupplyPlan allocated = plain;
  if (fee.distorts_allocation()) allocated = EfficientPlan(retailer, supplier, fee, opts).plan;
  SettlementReport report = VcgTransfers(retailer, supplier, status_quo, allocated, fee);
  report.unboosted_plan = plain;
  // Consensus plans carry solver noise, so cpp runs compare coarsely.
  const double tol = opts.method == PlanMethod::kCpp ? 1e-3 * (1.0 + plain.total()) : 1e-7;
  report.allocation_distorted = DistInf(plain.values(), allocated.values()) > tol;
  return report;
}

BudgetDiagnosis BudgetBalanceCheck(const SettlementReport& report, double tolerance) {
  BudgetDiagnosis d;
  // Fee-free sum, so diagnoses are comparable across fee policies.
  d.sum = report.budget_sum - report.fee_term;
  if (d.sum < -tolerance) {
    d.regime = BudgetRegime::kDeficit;
  } else if (d.sum > tolerance) {
    d.regime = BudgetRegime::kSurplus;
  } else {
    d.regime = BudgetRegime::kBalanced;
  }
  const double cooperative = report.supplier_utility + report.retailer_utility;
  const double standalone =
      report.supplier_standalone_utility + report.retailer_standalone_utility;
  d.cooperation_dominates = cooperative >= standalone - tolerance;
  const bool strictly_better = cooperative > standalone + tolerance;
  const bool strictly_worse = cooperative < standalone - tolerance;
  d.agrees = (d.regime == BudgetRegime::kDeficit) == strictly_better &&
             (d.regime == BudgetRegime::kSurplus) == strictly_worse;
  return d;
}

double CoordinationGain(const SettlementReport& report) {
  return report.supplier_utility + report.retailer_utility -
         report.supplier_standalone_utility - report.retailer_standalone_utility;
}

std::string ToString(BudgetRegime regime) {
  switch (regime) {
    case BudgetRegime::kDeficit: return "deficit";
    case BudgetRegime::kSurplus: return "surplus";
    case BudgetRegime::kBalanced: return "balanced";
  }
  return "unknown";
}

MenuOffer BuildMenu(const RetailerSpec& retailer, const StatusQuo& status_quo,
                    std::span<const SupplyPlan> plans, double alpha) {
  if (plans.empty()) throw ParameterError("menu needs at least one plan");
  if (!std::isfinite(alpha)) throw ParameterError("menu alpha must be finite");
  const double base = RetailerUtility(retailer, status_quo.retailer_plan).utility;
  MenuOffer menu;
  menu.alpha = alpha;
  for (const SupplyPlan& plan : plans) {
    CheckPlanSize(plan, retailer.inbound_nodes(), "menu plan");
    menu.items.push_back({plan, base - RetailerUtility(retailer, plan).utility + alpha});
  }
  return menu;
}

std::vector<SupplyPlan> DefaultMenuPlans(const SupplyPlan& x_a, const SupplyPlan& x_star,
                                         double cap) {
  CheckPlanSize(x_star, x_a.size(), "x*");
  std::vector<SupplyPlan> plans;
  for (int k = 1; k <= 4; ++k) {
    Vector v(x_a.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = x_a[i] + k * (x_star[i] - x_a[i]) / 3.0;
    }
    SupplyPlan plan = SupplyPlan::ClampedFrom(v);
    if (cap >= 0.0 && plan.total() > cap * (1.0 + 1e-12) + kLpTolerance) continue;
    plans.push_back(std::move(plan));
  }
  return plans;
}

MenuChoice SupplierChoose(const SupplierSpec& supplier, const MenuOffer& menu,
                          double standalone_utility) {
  if (menu.items.empty()) throw ParameterError("menu is empty");
  MenuChoice choice;
  double best = -std::numeric_limits<double>::infinity();
  std::optional<std::size_t> best_index;
  for (std::size_t k = 0; k < menu.items.size(); ++k) {
    const MenuItem& item = menu.items[k];
    std::optional<double> u;
    if (item.plan.size() == supplier.inbound_nodes() &&
        item.plan.total() <= supplier.total_capacity() + kLpTolerance) {
      u = SupplierUtility(supplier, item.plan).utility;
    }
    choice.option_utilities.push_back(u);
    const double net = u ? *u - item.fee : -std::numeric_limits<double>::infinity();
    choice.option_net.push_back(net);
    if (u && net > best + kLpTolerance) {
      best = net;
      best_index = k;
    }
  }
  if (best_index && best >= standalone_utility - kLpTolerance) {
    choice.chosen = best_index;
    choice.net_utility = best;
  }
  return choice;
}

}  // namespace coplan
