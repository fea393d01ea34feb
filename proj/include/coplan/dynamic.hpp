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

// Rolling-horizon ordering for one product: the retailer's ideal JIT
// (order-up-to) baseline, coordinated order plans agreed by consensus with
// the supplier, and cost-benefit transfers (CBT) paid by the supplier for
// pulling orders off the baseline.
//
// Weekly flow utilities, with orders arriving in the week they are placed:
//   retailer  a_t = m_A sales_t - h end_inv_t - p lost_t
//   supplier  v_t = m_S z_t - kappa (z_t - z_{t-1})^2
// where sales_t = min(inv_t + z_t, f_t). Future weeks are valued at their
// forecasts (certainty equivalence).

#ifndef COPLAN_DYNAMIC_HPP_
#define COPLAN_DYNAMIC_HPP_

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "coplan/consensus.hpp"
#include "coplan/plan.hpp"

namespace coplan {

struct InventoryModel {
  std::size_t horizon = 6;  // T_h, weeks per planning window
  Vector forecast;          // f_t for every week of the path
  Vector target;            // TIP_t; empty means TIP_t = f_t
  double holding_cost = 0.0;     // h, $/unit/week
  double lost_sales_cost = 0.0;  // p, $/unit
  double retailer_margin = 0.0;  // m_A, $/unit sold
  double supplier_margin = 0.0;  // m_S, $/unit ordered
  double smoothing = 0.0;        // kappa, $/unit^2

  std::size_t weeks() const { return forecast.size(); }
  double tip(std::size_t week) const;
  // Throws ParameterError on T_h = 0, negative costs, or a bad forecast.
  void Validate() const;
};

enum class CommitmentMode { kNone, kFullHorizon };

struct RollingState {
  std::size_t week = 0;
  std::size_t start_week = 0;
  double inventory = 0.0;   // on hand at the start of `week`
  double last_order = 0.0;  // order issued the week before (smoothing anchor)
  // Committed orders for week, week+1, ... (full-horizon mode after the
  // first week only).
  std::optional<Vector> plan_of_record;
  double cumulative_cbt = 0.0;
  CommitmentMode mode = CommitmentMode::kNone;
};

// Weeks [begin, end) planned at the state's week: T_h weeks, cut short at
// the end of the path.
struct PlanWindow {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};
PlanWindow WindowAt(const InventoryModel& model, const RollingState& state);

// Order-up-to-TIP orders over the window, projected on forecasts. With
// `pinned_first` the first order is fixed and later weeks order up to TIP
// from wherever that leaves inventory.
Vector JitPolicy(const InventoryModel& model, const RollingState& state,
                 std::optional<double> pinned_first = std::nullopt);

struct FlowEvaluation {
  Vector weekly;  // a_t (or v_t) per window week
  double total = 0.0;
  Vector sales;
  Vector lost_sales;
  Vector end_inventory;
};

// Certainty-equivalent a_t along the window. Throws DimensionError when the
// sequence does not match the window.
FlowEvaluation FlowUtilityRetailer(const InventoryModel& model,
                                   std::span<const double> orders,
                                   const RollingState& state);
FlowEvaluation FlowUtilitySupplier(const InventoryModel& model,
                                   std::span<const double> orders,
                                   const RollingState& state);
// A supergradient of sum a_t in the orders. A unit that exactly meets
// forecast demand counts as sold.
Vector RetailerFlowSupergradient(const InventoryModel& model,
                                 std::span<const double> orders,
                                 const RollingState& state);

std::unique_ptr<Agent> MakeRetailerFlowAgent(const InventoryModel& model,
                                             const RollingState& state);

// Solves its quadratic best response exactly.
class SupplierFlowAgent : public Agent {
 public:
  SupplierFlowAgent(InventoryModel model, RollingState state);
  std::size_t dimension() const override { return window_.size(); }
  SupplyPlan BestResponse(std::span<const double> prices, const SupplyPlan& z,
                          double rho) override;
  std::optional<double> Utility(const SupplyPlan& x) const override;

 private:
  InventoryModel model_;
  RollingState state_;
  PlanWindow window_;
};

// Tight tolerances: CBT compares utilities of nearby plans.
ConsensusConfig DefaultDynamicConsensus();

struct CoordinatedPlanResult {
  SupplyPlan plan;
  int iterations = 0;
};

// argmax of sum (a_t + v_t) over nonnegative window order sequences, by
// consensus between the two flow agents. Throws NonConvergenceError.
CoordinatedPlanResult CoordinatedPlan(const InventoryModel& model,
                                      const RollingState& state,
                                      const ConsensusConfig& config = DefaultDynamicConsensus());

// Joint flow utility sum (a_t + v_t) of a window sequence.
double JointFlowUtility(const InventoryModel& model, std::span<const double> orders,
                        const RollingState& state);

// One-week commitment: retailer value of the free JIT plan minus that of
// x*_s followed by JIT orders pinned at x*_s.
double CbtOne(const InventoryModel& model, const RollingState& state,
              std::span<const double> x_star, std::span<const double> jit);

// The full-horizon baseline: the plan of record where one exists, with JIT
// orders for the uncommitted tail; otherwise `jit`.
Vector CommitmentBaseline(const InventoryModel& model, const RollingState& state,
                          std::span<const double> jit);

// Full-horizon commitment: baseline value minus the value of all of x*.
// Throws StateError unless the state is in full-horizon mode.
double CbtSix(const InventoryModel& model, const RollingState& state,
              std::span<const double> x_star, std::span<const double> jit);

struct WeekRecord {
  std::size_t week = 0;
  double order = 0.0;
  double jit_order = 0.0;
  double start_inventory = 0.0;
  double demand = 0.0;
  double sales = 0.0;
  double lost_sales = 0.0;
  double end_inventory = 0.0;
  double cbt = 0.0;
};

struct RollResult {
  RollingState state;
  WeekRecord record;
};

// Issues x*_s, books realized demand, charges the week's CBT, and advances.
// In full-horizon mode the rest of x* becomes the plan of record.
RollResult RollForward(const InventoryModel& model, const RollingState& state,
                       double realized_demand, std::span<const double> consensus);

// Plans and rolls every week of the path. `realized` defaults to the
// forecasts.
std::vector<WeekRecord> Simulate(const InventoryModel& model, RollingState initial,
                                 std::span<const double> realized = {},
                                 const ConsensusConfig& config = DefaultDynamicConsensus());

}  // namespace coplan

#endif  // COPLAN_DYNAMIC_HPP_
