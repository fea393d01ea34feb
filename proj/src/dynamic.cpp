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

#include "coplan/dynamic.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "coplan/errors.hpp"
#include "coplan/qp.hpp"

namespace coplan {
namespace {

void CheckLength(std::span<const double> orders, const PlanWindow& window, const char* what) {
  if (orders.size() != window.size()) {
    throw DimensionError(std::string(what) + " has " + std::to_string(orders.size()) +
                         " weeks, window has " + std::to_string(window.size()));
  }
}

// Inventory after one week under forecast demand.
double NextInventory(double inventory, double order, double demand) {
  return std::max(0.0, inventory + order - demand);
}

// Order-up-to from `inventory` over weeks [from, window.end), written into
// orders[from - window.begin ...].
void FillJit(const InventoryModel& model, const PlanWindow& window, std::size_t from,
             double inventory, Vector& orders) {
  for (std::size_t t = from; t < window.end; ++t) {
    const double z = std::max(0.0, model.tip(t) - inventory);
    orders[t - window.begin] = z;
    inventory = NextInventory(inventory, z, model.forecast[t]);
  }
}

// Inventory at the start of week `until`, following `orders` from the
// window start.
double InventoryAfter(const InventoryModel& model, const PlanWindow& window,
                      std::span<const double> orders, double inventory, std::size_t until) {
  for (std::size_t t = window.begin; t < until; ++t) {
    inventory = NextInventory(inventory, orders[t - window.begin], model.forecast[t]);
  }
  return inventory;
}

}  // namespace

double InventoryModel::tip(std::size_t week) const {
  return target.empty() ? forecast.at(week) : target.at(week);
}

void InventoryModel::Validate() const {
  if (horizon == 0) throw ParameterError("planning horizon must be at least one week");
  if (forecast.empty()) throw ParameterError("forecast is empty");
  if (!target.empty() && target.size() != forecast.size()) {
    throw DimensionError("target inventory positions do not match forecast length");
  }
  for (double v : {holding_cost, lost_sales_cost, retailer_margin, supplier_margin, smoothing}) {
    if (!std::isfinite(v) || v < 0.0) {
      throw ParameterError("inventory model costs must be finite and nonnegative");
    }
  }
  for (double f : forecast) {
    if (!std::isfinite(f) || f < 0.0) throw ParameterError("forecasts must be nonnegative");
  }
  for (double t : target) {
    if (!std::isfinite(t) || t < 0.0) throw ParameterError("TIP must be nonnegative");
  }
}

PlanWindow WindowAt(const InventoryModel& model, const RollingState& state) {
  if (state.week >= model.weeks()) {
    throw StateError("week " + std::to_string(state.week) + " is past the end of the path");
  }
  return {state.week, std::min(state.week + model.horizon, model.weeks())};
}

Vector JitPolicy(const InventoryModel& model, const RollingState& state,
                 std::optional<double> pinned_first) {
  const PlanWindow window = WindowAt(model, state);
  Vector orders(window.size(), 0.0);
  if (!pinned_first) {
    FillJit(model, window, window.begin, state.inventory, orders);
    return orders;
  }
  if (*pinned_first < 0.0) throw ParameterError("pinned order must be nonnegative");
  orders[0] = *pinned_first;
  FillJit(model, window, window.begin + 1,
          NextInventory(state.inventory, *pinned_first, model.forecast[window.begin]), orders);
  return orders;
}

FlowEvaluation FlowUtilityRetailer(const InventoryModel& model, std::span<const double> orders,
                                   const RollingState& state) {
  const PlanWindow window = WindowAt(model, state);
  CheckLength(orders, window, "order sequence");
  FlowEvaluation out;
  double inventory = state.inventory;
  for (std::size_t t = window.begin; t < window.end; ++t) {
    const double available = inventory + orders[t - window.begin];
    const double demand = model.forecast[t];
    const double sales = std::min(available, demand);
    const double lost = demand - sales;
    const double end = available - sales;
    const double a = model.retailer_margin * sales - model.holding_cost * end -
                     model.lost_sales_cost * lost;
    out.weekly.push_back(a);
    out.sales.push_back(sales);
    out.lost_sales.push_back(lost);
    out.end_inventory.push_back(end);
    out.total += a;
    inventory = end;
  }
  return out;
}

FlowEvaluation FlowUtilitySupplier(const InventoryModel& model, std::span<const double> orders,
                                   const RollingState& state) {
  const PlanWindow window = WindowAt(model, state);
  CheckLength(orders, window, "order sequence");
  FlowEvaluation out;
  double previous = state.last_order;
  for (double z : orders) {
    const double v = model.supplier_margin * z - model.smoothing * (z - previous) * (z - previous);
    out.weekly.push_back(v);
    out.total += v;
    previous = z;
  }
  return out;
}

Vector RetailerFlowSupergradient(const InventoryModel& model, std::span<const double> orders,
                                 const RollingState& state) {
  const PlanWindow window = WindowAt(model, state);
  CheckLength(orders, window, "order sequence");
  const std::size_t n = window.size();
  // carried[t]: leftover stock leaves week t. A marginal unit ordered in
  // week k rides forward while stock is carried, paying h per week, and
  // replaces a lost sale in the first week that is not carried. At a
  // stock-out tie the carry derivative is taken as 0, which is a valid
  // choice in the chain rule for inv_{t+1} = max(0, inv_t + z_t - f_t).
  std::vector<bool> carried(n, false);
  double inventory = state.inventory;
  for (std::size_t k = 0; k < n; ++k) {
    const double available = inventory + orders[k];
    const double demand = model.forecast[window.begin + k];
    carried[k] = available > demand;
    inventory = std::max(0.0, available - demand);
  }
  const double sell_value = model.retailer_margin + model.lost_sales_cost;
  Vector g(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double value = 0.0;
    std::size_t t = k;
    for (; t < n && carried[t]; ++t) value -= model.holding_cost;
    if (t < n) value += sell_value;
    g[k] = value;
  }
  return g;
}

std::unique_ptr<Agent> MakeRetailerFlowAgent(const InventoryModel& model,
                                             const RollingState& state) {
  model.Validate();
  const PlanWindow window = WindowAt(model, state);
  ConcaveOracle oracle = [model, state](const SupplyPlan& x) {
    return ValueAndSupergradient{FlowUtilityRetailer(model, x.values(), state).total,
                                 RetailerFlowSupergradient(model, x.values(), state)};
  };
  return std::make_unique<CuttingPlaneAgent>(window.size(), -1.0, std::move(oracle));
}

SupplierFlowAgent::SupplierFlowAgent(InventoryModel model, RollingState state)
    : model_(std::move(model)), state_(std::move(state)), window_(WindowAt(model_, state_)) {
  model_.Validate();
}

SupplyPlan SupplierFlowAgent::BestResponse(std::span<const double> prices, const SupplyPlan& z,
                                           double rho) {
  const auto n = static_cast<Eigen::Index>(window_.size());
  if (prices.size() != window_.size() || z.size() != window_.size()) {
    throw DimensionError("supplier flow agent got a query of the wrong dimension");
  }
  if (!(rho > 0.0)) throw ParameterError("rho must be positive");
  // minimize -(v(x) - pi'x - rho/2 |x - z|^2) over x >= 0.
  const double two_kappa = 2.0 * model_.smoothing;
  QpProblem qp;
  qp.H = rho * Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index t = 0; t < n; ++t) {
    qp.H(t, t) += two_kappa * (t + 1 < n ? 2.0 : 1.0);
    if (t + 1 < n) {
      qp.H(t, t + 1) -= two_kappa;
      qp.H(t + 1, t) -= two_kappa;
    }
  }
  qp.f = Eigen::VectorXd(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    qp.f[t] = -model_.supplier_margin + prices[static_cast<std::size_t>(t)] -
              rho * z[static_cast<std::size_t>(t)];
  }
  qp.f[0] -= two_kappa * state_.last_order;
  qp.A = -Eigen::MatrixXd::Identity(n, n);
  qp.b = Eigen::VectorXd::Zero(n);
  std::vector<int> working(static_cast<std::size_t>(n));
  for (Eigen::Index t = 0; t < n; ++t) working[static_cast<std::size_t>(t)] = static_cast<int>(t);
  const QpResult result = SolveActiveSetQp(qp, Eigen::VectorXd::Zero(n), std::move(working));
  Vector x(result.y.data(), result.y.data() + n);
  return SupplyPlan::ClampedFrom(x);
}

std::optional<double> SupplierFlowAgent::Utility(const SupplyPlan& x) const {
  return FlowUtilitySupplier(model_, x.values(), state_).total;
}

ConsensusConfig DefaultDynamicConsensus() {
  ConsensusConfig config;
  config.eps_abs = 1e-12;
  config.eps_rel = 1e-12;
  config.max_iters = 20000;
  return config;
}

CoordinatedPlanResult CoordinatedPlan(const InventoryModel& model, const RollingState& state,
                                      const ConsensusConfig& config) {
  model.Validate();
  auto retailer = MakeRetailerFlowAgent(model, state);
  SupplierFlowAgent supplier(model, state);
  std::vector<Agent*> agents{retailer.get(), &supplier};
  ConsensusConfig cfg = config;
  if (!cfg.initial) {
    const Vector start = state.plan_of_record ? CommitmentBaseline(model, state, JitPolicy(model, state))
                                              : JitPolicy(model, state);
    cfg.initial = SupplyPlan::ClampedFrom(start);
  }
  const ConsensusResult run = RunConsensus(agents, cfg);
  RequireConverged(run);
  return {run.plan, run.iterations};
}

double JointFlowUtility(const InventoryModel& model, std::span<const double> orders,
                        const RollingState& state) {
  return FlowUtilityRetailer(model, orders, state).total +
         FlowUtilitySupplier(model, orders, state).total;
}

double CbtOne(const InventoryModel& model, const RollingState& state,
              std::span<const double> x_star, std::span<const double> jit) {
  const PlanWindow window = WindowAt(model, state);
  CheckLength(x_star, window, "consensus plan");
  CheckLength(jit, window, "JIT plan");
  const Vector pinned = JitPolicy(model, state, x_star[0]);
  return FlowUtilityRetailer(model, jit, state).total -
         FlowUtilityRetailer(model, pinned, state).total;
}

Vector CommitmentBaseline(const InventoryModel& model, const RollingState& state,
                          std::span<const double> jit) {
  const PlanWindow window = WindowAt(model, state);
  CheckLength(jit, window, "JIT plan");
  if (!state.plan_of_record) return Vector(jit.begin(), jit.end());
  const Vector& record = *state.plan_of_record;
  const std::size_t committed = std::min(record.size(), window.size());
  Vector baseline(window.size(), 0.0);
  std::copy_n(record.begin(), committed, baseline.begin());
  const double inventory = InventoryAfter(model, window, baseline, state.inventory,
                                          window.begin + committed);
  FillJit(model, window, window.begin + committed, inventory, baseline);
  return baseline;
}

double CbtSix(const InventoryModel& model, const RollingState& state,
              std::span<const double> x_star, std::span<const double> jit) {
  if (state.mode != CommitmentMode::kFullHorizon) {
    throw StateError("full-horizon CBT needs a full-horizon commitment state");
  }
  const PlanWindow window = WindowAt(model, state);
  CheckLength(x_star, window, "consensus plan");
  const Vector baseline = CommitmentBaseline(model, state, jit);
  return FlowUtilityRetailer(model, baseline, state).total -
         FlowUtilityRetailer(model, x_star, state).total;
}

RollResult RollForward(const InventoryModel& model, const RollingState& state,
                       double realized_demand, std::span<const double> consensus) {
  const PlanWindow window = WindowAt(model, state);
  CheckLength(consensus, window, "consensus plan");
  if (!std::isfinite(realized_demand) || realized_demand < 0.0) {
    throw ParameterError("realized demand must be nonnegative");
  }
  const Vector jit = JitPolicy(model, state);

  RollResult out;
  WeekRecord& rec = out.record;
  rec.week = state.week;
  rec.order = std::max(0.0, consensus[0]);
  rec.jit_order = jit[0];
  rec.start_inventory = state.inventory;
  rec.demand = realized_demand;
  const double available = state.inventory + rec.order;
  rec.sales = std::min(available, realized_demand);
  rec.lost_sales = realized_demand - rec.sales;
  rec.end_inventory = available - rec.sales;
  rec.cbt = state.mode == CommitmentMode::kFullHorizon ? CbtSix(model, state, consensus, jit)
                                                       : CbtOne(model, state, consensus, jit);

  RollingState& next = out.state;
  next = state;
  next.week = state.week + 1;
  next.inventory = rec.end_inventory;
  next.last_order = rec.order;
  next.cumulative_cbt = state.cumulative_cbt + rec.cbt;
  next.plan_of_record.reset();
  if (state.mode == CommitmentMode::kFullHorizon && consensus.size() > 1) {
    next.plan_of_record = Vector(consensus.begin() + 1, consensus.end());
  }
  return out;
}

std::vector<WeekRecord> Simulate(const InventoryModel& model, RollingState initial,
                                 std::span<const double> realized,
                                 const ConsensusConfig& config) {
  model.Validate();
  if (!realized.empty() && realized.size() != model.weeks()) {
    throw DimensionError("realized demand does not cover the path");
  }
  std::vector<WeekRecord> records;
  RollingState state = std::move(initial);
  while (state.week < model.weeks()) {
    const CoordinatedPlanResult plan = CoordinatedPlan(model, state, config);
    const double demand = realized.empty() ? model.forecast[state.week] : realized[state.week];
    RollResult step = RollForward(model, state, demand, plan.plan.values());
    records.push_back(step.record);
    state = std::move(step.state);
  }
  return records;
}

}  // namespace coplan
