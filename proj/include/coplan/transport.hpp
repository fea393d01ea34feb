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

// Transportation LPs behind the retailer and supplier utilities.
//
// Both agents value a supply plan x through a min-cost transportation
// problem parameterized by x: the retailer routes inbound supply (caps x_i)
// to demand regions, the supplier routes source capacity to inbound nodes
// (requirements x_i). The utilities are concave piecewise-linear in x and
// the dual prices of the x-coupled constraints give supergradients.

#ifndef COPLAN_TRANSPORT_HPP_
#define COPLAN_TRANSPORT_HPP_

#include <optional>
#include <span>
#include <vector>

#include "coplan/plan.hpp"

namespace coplan {

using Matrix = std::vector<Vector>;

// Absolute tolerance for LP identities on dollar-scale data.
inline constexpr double kLpTolerance = 1e-9;

struct TransportSolution {
  enum class Status {
    kOptimal,
    // Requirements exceed the row bounds; the gap is carried by slack.
    kInfeasibleWithoutSlack,
  };

  Matrix flows;           // rows x cols
  Vector slack;           // unmet requirement per column (zeros if no slack)
  double objective = 0.0; // arc costs plus slack penalty
  // d objective / d row_bound[i]; always <= 0.
  Vector row_duals;
  // d objective / d col_requirement[j].
  Vector col_duals;
  double slack_dual = 0.0;  // potential of the virtual slack source
  double dual_objective = 0.0;
  Status status = Status::kOptimal;
  int pivots = 0;
};

// Minimum-cost flow from rows (outflow <= row_bounds) to columns (inflow
// meets col_requirements exactly, counting slack). With a slack penalty a
// virtual source may cover any column at that price per unit. Pivoting uses
// Bland's rule over row-major arc order, so tied optima are reproducible.
//
// Throws DimensionError on shape mismatch, ParameterError on negative
// bounds, InfeasibleError when short and no slack penalty is given.
TransportSolution SolveTransport(const Matrix& costs,
                                 std::span<const double> row_bounds,
                                 std::span<const double> col_requirements,
                                 std::optional<double> slack_penalty = {});

// Retailer private data: I inbound nodes x J demand regions.
struct RetailerSpec {
  Vector demand;        // d_j
  Matrix arc_costs;     // c^A_ij, I x J
  Vector gross_profit;  // g^A_j per unit of demand
  double lost_sales_penalty = 1000.0;

  std::size_t inbound_nodes() const { return arc_costs.size(); }
  std::size_t regions() const { return demand.size(); }
  double total_demand() const;
  // pi_A(d) = sum_j g^A_j d_j.
  double demand_profit() const;
  void Validate() const;
};

// Supplier private data: K source nodes x I inbound nodes.
struct SupplierSpec {
  Vector capacity;      // s_k
  Matrix arc_costs;     // c^S_ki, K x I
  Vector gross_profit;  // g^S_i per unit delivered

  std::size_t sources() const { return capacity.size(); }
  std::size_t inbound_nodes() const { return gross_profit.size(); }
  double total_capacity() const;
  void Validate() const;
};

struct UtilityEval {
  double utility = 0.0;
  double gross_profit = 0.0;
  double transport_cost = 0.0;  // includes lost-sales penalty
  Vector supergradient;         // $/unit per inbound node
  TransportSolution solution;
};

// u_A(x) = pi_A(d) - min transport cost with caps x_i, lost sales at
// p_lost. Total on the nonnegative orthant.
UtilityEval RetailerUtility(const RetailerSpec& spec, const SupplyPlan& x);

// u_S(x) = sum_i g^S_i x_i - min transport cost meeting x_i from sources.
// Throws InfeasibleError when sum(x) exceeds total capacity.
UtilityEval SupplierUtility(const SupplierSpec& spec, const SupplyPlan& x);

Vector UtilitySupergradient(const RetailerSpec& spec, const SupplyPlan& x);
Vector UtilitySupergradient(const SupplierSpec& spec, const SupplyPlan& x);

}  // namespace coplan

#endif  // COPLAN_TRANSPORT_HPP_
