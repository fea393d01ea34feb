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

// Bilateral VCG settlement between a retailer (principal and agent) and a
// supplier: status-quo plans, efficient allocation, transfers, activity
// fees, and menus of contracts.
//
// Transfers run from agents to the retailer as principal:
//   t_S = u_A(x_A) - u_A(x*) + fee_term
//   t_A = u_S(x_S) - u_S(x*)
// The retailer as a whole (principal plus agent) ends at u_A(x_A) + fee_term,
// so without a fee every coordination gain goes to the supplier.

#ifndef COPLAN_MECHANISM_HPP_
#define COPLAN_MECHANISM_HPP_

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coplan/consensus.hpp"
#include "coplan/plan.hpp"
#include "coplan/transport.hpp"

namespace coplan {

enum class StatusQuoMode { kJitDerived, kExplicit };

struct StatusQuo {
  SupplyPlan retailer_plan;  // x_A
  SupplyPlan supplier_plan;  // x_S
  StatusQuoMode mode = StatusQuoMode::kJitDerived;
  // Jit-derived only: false when the supplier could not confirm the whole
  // order and x_S is its best partial confirmation z (.) q.
  bool fully_confirmed = true;
};

// The retailer's JIT order: row sums of its transport optimum with
// unconstrained inbound supply. Ties resolve by the solver's arc order.
SupplyPlan RetailerJitPlan(const RetailerSpec& retailer);

// The supplier's best confirmation of order q: argmax u_S(x) over
// 0 <= x <= q, x capacity-feasible.
SupplyPlan BestConfirmation(const SupplierSpec& supplier, const SupplyPlan& order);

// Jit-derived status quo: x_A = JIT order q; x_S = q when the supplier can
// fill it, otherwise BestConfirmation(q).
StatusQuo StandalonePlans(const RetailerSpec& retailer, const SupplierSpec& supplier);
StatusQuo ExplicitStatusQuo(SupplyPlan retailer_plan, SupplyPlan supplier_plan);

struct FeePolicy {
  enum class Kind { kNone, kAdditive, kMultiplicative, kRoi, kLinearDeviation };

  Kind kind = Kind::kNone;
  double alpha = 0.0;       // $ (additive)
  double beta = 0.0;        // fraction (multiplicative)
  double roi = 0.0;         // fraction (ROI)
  double over_rate = 0.0;   // c-bar, $/unit above x_A
  double under_rate = 0.0;  // c-underbar, $/unit below x_A

  static FeePolicy None() { return {}; }
  static FeePolicy Additive(double alpha);
  static FeePolicy Multiplicative(double beta);
  static FeePolicy Roi(double r);
  static FeePolicy LinearDeviation(double over_rate, double under_rate);

  // Throws ParameterError on negative parameters or under_rate > over_rate.
  void Validate() const;
  // True when the policy can move the efficient allocation.
  bool distorts_allocation() const {
    return kind == Kind::kMultiplicative || kind == Kind::kLinearDeviation;
  }
  std::string name() const;
};

// sum_i  over * (x*_i - x_A,i)   if x*_i >= x_A,i
//        under * (x_A,i - x*_i)  otherwise.
// Throws ParameterError when under > over or either is negative.
double DeviationPenalty(const SupplyPlan& x_star, const SupplyPlan& x_a,
                        double over_rate, double under_rate);

enum class PlanMethod { kCentralized, kCpp };

// The plan domain shared by both agents: x >= 0 and
// sum x <= min(total demand, total capacity).
double JointPlanCap(const RetailerSpec& retailer, const SupplierSpec& supplier);
SupplyPlan SnapToJointDomain(std::span<const double> x, const RetailerSpec& retailer,
                             const SupplierSpec& supplier);

// Consensus agent for the retailer's fee-boosted utility. `x_a` anchors the
// linear-deviation variant.
std::unique_ptr<CuttingPlaneAgent> MakeBoostedRetailerAgent(RetailerSpec retailer,
                                                            FeePolicy fee,
                                                            SupplyPlan x_a);

struct EfficientPlanOptions {
  PlanMethod method = PlanMethod::kCentralized;
  ConsensusConfig consensus;
  // Needed by the linear-deviation boost; defaults to the retailer JIT plan.
  std::optional<SupplyPlan> status_quo_plan;
};

struct EfficientPlanResult {
  SupplyPlan plan;
  int iterations = 0;  // consensus iterations (cpp only)
};

// argmax over the joint domain of ubar_A(x) + u_S(x), where ubar_A is u_A
// transformed by the fee policy. Additive and ROI fees are constants and do
// not move the argmax.
EfficientPlanResult EfficientPlan(const RetailerSpec& retailer,
                                  const SupplierSpec& supplier, const FeePolicy& fee,
                                  const EfficientPlanOptions& options = {});

struct SettlementReport {
  SupplyPlan plan;            // allocated plan x*
  SupplyPlan unboosted_plan;  // efficient plan without the fee transform
  bool allocation_distorted = false;
  StatusQuo status_quo;
  FeePolicy fee;

  double retailer_utility = 0.0;            // u_A(x*)
  double supplier_utility = 0.0;            // u_S(x*)
  double retailer_standalone_utility = 0.0; // u_A(x_A)
  double supplier_standalone_utility = 0.0; // u_S(x_S)
  double retailer_cost = 0.0;               // transport cost at x*
  double supplier_cost = 0.0;
  double retailer_standalone_cost = 0.0;
  double supplier_standalone_cost = 0.0;

  double fee_term = 0.0;
  double transfer_retailer = 0.0;  // t_A
  double transfer_supplier = 0.0;  // t_S
  double budget_sum = 0.0;         // t_A + t_S
  double coordination_gain = 0.0;  // g(theta)
  double supplier_net_surplus = 0.0;  // u_S(x*) - t_S - u_S(x_S)
  double retailer_net_surplus = 0.0;  // u_A(x*) + t_S - u_A(x_A); t_A nets out
};

// Transfers and diagnostics at the given allocation. `unboosted_plan` and
// `allocation_distorted` are left at x_star / false; Settle fills them.
SettlementReport VcgTransfers(const RetailerSpec& retailer, const SupplierSpec& supplier,
                              const StatusQuo& status_quo, const SupplyPlan& x_star,
                              const FeePolicy& fee);

// Efficient plan (boosted when the fee distorts) followed by VcgTransfers.
SettlementReport Settle(const RetailerSpec& retailer, const SupplierSpec& supplier,
                        const StatusQuo& status_quo, const FeePolicy& fee,
                        const EfficientPlanOptions& options = {});

enum class BudgetRegime { kDeficit, kSurplus, kBalanced };

struct BudgetDiagnosis {
  double sum = 0.0;  // fee-free t_A + t_S
  BudgetRegime regime = BudgetRegime::kBalanced;
  // u_S(x*) + u_A(x*) >= u_S(x_S) + u_A(x_A)
  bool cooperation_dominates = false;
  // Regime is deficit or balanced exactly when cooperation dominates.
  bool agrees = false;
};

BudgetDiagnosis BudgetBalanceCheck(const SettlementReport& report,
                                   double tolerance = 1e-6);
double CoordinationGain(const SettlementReport& report);
std::string ToString(BudgetRegime regime);

struct MenuItem {
  SupplyPlan plan;
  double fee = 0.0;
};

struct MenuOffer {
  std::vector<MenuItem> items;
  double alpha = 0.0;
};

// Prices each plan at u_A(x_A) - u_A(x) + alpha.
MenuOffer BuildMenu(const RetailerSpec& retailer, const StatusQuo& status_quo,
                    std::span<const SupplyPlan> plans, double alpha);

// Retailer-generated sweep x_A + k (x* - x_A) / 3 for k = 1..4, clamped at 0.
// With cap >= 0, plans totalling more than cap are left out.
std::vector<SupplyPlan> DefaultMenuPlans(const SupplyPlan& x_a, const SupplyPlan& x_star,
                                         double cap = -1.0);

struct MenuChoice {
  std::optional<std::size_t> chosen;  // nullopt = decline
  double net_utility = 0.0;           // u_S(plan) - fee of the chosen item
  std::vector<std::optional<double>> option_utilities;  // u_S(plan), nullopt if infeasible
  std::vector<double> option_net;  // u_S(plan) - fee, -inf if infeasible
};

// Supplier picks argmax u_S(plan) - fee (lowest index on ties) and declines
// unless the pick is worth at least its standalone utility.
MenuChoice SupplierChoose(const SupplierSpec& supplier, const MenuOffer& menu,
                          double standalone_utility);

}  // namespace coplan

#endif  // COPLAN_MECHANISM_HPP_
