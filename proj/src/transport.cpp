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

#include "coplan/transport.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <numeric>
#include <string>

#include "coplan/errors.hpp"

namespace coplan {
namespace {

constexpr int kMaxPivots = 100000;

// Balanced transportation tableau solved by the primal (MODI) simplex.
// Node ids: rows are 0..R-1, columns are R..R+C-1.
class Tableau {
 public:
  Tableau(Matrix cost, Vector supply, Vector demand)
      : rows_(supply.size()),
        cols_(demand.size()),
        cost_(std::move(cost)),
        supply_(std::move(supply)),
        demand_(std::move(demand)),
        flow_(rows_ * cols_, 0.0),
        basic_(rows_ * cols_, false),
        u_(rows_, 0.0),
        v_(cols_, 0.0) {
    double scale = 1.0;
    for (const auto& row : cost_) {
      for (double c : row) scale = std::max(scale, std::abs(c));
    }
    tol_ = 1e-11 * scale;
  }

  int Solve() {
    NorthwestCorner();
    int pivots = 0;
    for (;;) {
      ComputePotentials();
      const std::ptrdiff_t entering = FindEntering();
      if (entering < 0) break;
      Pivot(static_cast<std::size_t>(entering));
      if (++pivots > kMaxPivots) {
        throw NonConvergenceError("transportation simplex exceeded pivot cap");
      }
    }
    return pivots;
  }

  double flow(std::size_t r, std::size_t c) const { return flow_[r * cols_ + c]; }
  double u(std::size_t r) const { return u_[r]; }
  double v(std::size_t c) const { return v_[c]; }
  double cost(std::size_t r, std::size_t c) const { return cost_[r][c]; }

 private:
  std::size_t Index(std::size_t r, std::size_t c) const { return r * cols_ + c; }

  void NorthwestCorner() {
    Vector s = supply_;
    Vector d = demand_;
    std::size_t r = 0;
    std::size_t c = 0;
    while (r < rows_ && c < cols_) {
      const double q = std::min(s[r], d[c]);
      flow_[Index(r, c)] = q;
      basic_[Index(r, c)] = true;
      if (r + 1 == rows_ && c + 1 == cols_) break;
      // Advance exactly one index per step so the basis stays a spanning
      // tree with rows + cols - 1 cells (degenerate zeros included).
      if ((s[r] <= d[c] && r + 1 < rows_) || c + 1 == cols_) {
        d[c] -= q;
        s[r] = 0.0;
        ++r;
      } else {
        s[r] -= q;
        d[c] = 0.0;
        ++c;
      }
    }
  }

  std::vector<std::vector<std::size_t>> Adjacency() const {
    std::vector<std::vector<std::size_t>> adj(rows_ + cols_);
    for (std::size_t r = 0; r < rows_; ++r) {
      for (std::size_t c = 0; c < cols_; ++c) {
        if (!basic_[Index(r, c)]) continue;
        adj[r].push_back(rows_ + c);
        adj[rows_ + c].push_back(r);
      }
    }
    return adj;
  }

  // Root: the last column (the surplus sink) has potential zero.
  void ComputePotentials() {
    const auto adj = Adjacency();
    std::vector<bool> seen(rows_ + cols_, false);
    std::deque<std::size_t> queue;
    const std::size_t root = rows_ + cols_ - 1;
    v_[cols_ - 1] = 0.0;
    seen[root] = true;
    queue.push_back(root);
    while (!queue.empty()) {
      const std::size_t node = queue.front();
      queue.pop_front();
      for (std::size_t next : adj[node]) {
        if (seen[next]) continue;
        seen[next] = true;
        if (node >= rows_) {
          const std::size_t c = node - rows_;
          u_[next] = cost_[next][c] - v_[c];
        } else {
          const std::size_t c = next - rows_;
          v_[c] = cost_[node][c] - u_[node];
        }
        queue.push_back(next);
      }
    }
  }

  std::ptrdiff_t FindEntering() const {
    for (std::size_t r = 0; r < rows_; ++r) {
      for (std::size_t c = 0; c < cols_; ++c) {
        const std::size_t k = Index(r, c);
        if (basic_[k]) continue;
        if (cost_[r][c] - u_[r] - v_[c] < -tol_) {
          return static_cast<std::ptrdiff_t>(k);
        }
      }
    }
    return -1;
  }

  void Pivot(std::size_t entering) {
    const std::size_t er = entering / cols_;
    const std::size_t ec = entering % cols_;
    // Tree path from column node ec back to row node er.
    const auto adj = Adjacency();
    std::vector<std::size_t> parent(rows_ + cols_, SIZE_MAX);
    std::deque<std::size_t> queue{rows_ + ec};
    parent[rows_ + ec] = rows_ + ec;
    while (!queue.empty()) {
      const std::size_t node = queue.front();
      queue.pop_front();
      if (node == er) break;
      for (std::size_t next : adj[node]) {
        if (parent[next] != SIZE_MAX) continue;
        parent[next] = node;
        queue.push_back(next);
      }
    }
    // Walk er -> ... -> ec; cells in order from the row end.
    std::vector<std::size_t> path;
    for (std::size_t node = er; node != rows_ + ec; node = parent[node]) {
      const std::size_t up = parent[node];
      const std::size_t r = node < rows_ ? node : up;
      const std::size_t c = (node < rows_ ? up : node) - rows_;
      path.push_back(Index(r, c));
    }
    // Path length is odd; cells at even offsets from either end lose flow.
    double theta = std::numeric_limits<double>::infinity();
    std::size_t leaving = SIZE_MAX;
    for (std::size_t k = 0; k < path.size(); k += 2) {
      const std::size_t cell = path[k];
      const double f = flow_[cell];
      if (f < theta || (f == theta && cell < leaving)) {
        theta = f;
        leaving = cell;
      }
    }
    for (std::size_t k = 0; k < path.size(); ++k) {
      flow_[path[k]] += (k % 2 == 0) ? -theta : theta;
    }
    flow_[entering] = theta;
    flow_[leaving] = 0.0;
    basic_[entering] = true;
    basic_[leaving] = false;
  }

  std::size_t rows_;
  std::size_t cols_;
  Matrix cost_;
  Vector supply_;
  Vector demand_;
  Vector flow_;
  std::vector<bool> basic_;
  Vector u_;
  Vector v_;
  double tol_ = 0.0;
};

double Sum(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0);
}

void CheckNonnegative(std::span<const double> v, const char* what) {
  for (double e : v) {
    if (!std::isfinite(e) || e < 0.0) {
      throw ParameterError(std::string(what) + " must be finite and >= 0");
    }
  }
}

}  // namespace

TransportSolution SolveTransport(const Matrix& costs,
                                 std::span<const double> row_bounds,
                                 std::span<const double> col_requirements,
                                 std::optional<double> slack_penalty) {
  const std::size_t m = row_bounds.size();
  const std::size_t n = col_requirements.size();
  if (costs.size() != m) {
    throw DimensionError("cost matrix has " + std::to_string(costs.size()) +
                         " rows, expected " + std::to_string(m));
  }
  for (const auto& row : costs) {
    if (row.size() != n) throw DimensionError("cost matrix row width mismatch");
  }
  CheckNonnegative(row_bounds, "row bounds");
  CheckNonnegative(col_requirements, "column requirements");

  Vector bounds(row_bounds.begin(), row_bounds.end());
  const double total_req = Sum(col_requirements);
  double total_rows = Sum(bounds);
  const bool short_supply = total_rows < total_req;
  const double shortfall = total_req - total_rows;
  if (short_supply && !slack_penalty) {
    // Rounding-level shortfalls are absorbed by the largest bound.
    if (m > 0 && shortfall <= kLpTolerance * (1.0 + total_req)) {
      *std::max_element(bounds.begin(), bounds.end()) += shortfall;
      total_rows = Sum(bounds);
    } else {
      throw InfeasibleError("requirements exceed bounds by " +
                            std::to_string(shortfall));
    }
  }

  const bool with_slack = slack_penalty.has_value();
  const std::size_t R = m + (with_slack ? 1 : 0);
  const std::size_t C = n + 1;
  Matrix cost(R, Vector(C, 0.0));
  Vector supply(R);
  Vector demand(C);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) cost[i][j] = costs[i][j];
    supply[i] = bounds[i];
  }
  if (with_slack) {
    for (std::size_t j = 0; j < n; ++j) cost[m][j] = *slack_penalty;
    supply[m] = total_req;
  }
  for (std::size_t j = 0; j < n; ++j) demand[j] = col_requirements[j];
  demand[n] = std::max(0.0, Sum(supply) - total_req);

  Tableau tableau(cost, supply, demand);
  TransportSolution out;
  out.pivots = tableau.Solve();
  out.status = short_supply && with_slack
                   ? TransportSolution::Status::kInfeasibleWithoutSlack
                   : TransportSolution::Status::kOptimal;
  out.flows.assign(m, Vector(n, 0.0));
  out.slack.assign(n, 0.0);
  out.row_duals.assign(m, 0.0);
  out.col_duals.assign(n, 0.0);
  double primal = 0.0;
  for (std::size_t i = 0; i < R; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double f = tableau.flow(i, j);
      primal += cost[i][j] * f;
      if (i < m) {
        out.flows[i][j] = f;
      } else {
        out.slack[j] = f;
      }
    }
  }
  double dual = 0.0;
  for (std::size_t i = 0; i < R; ++i) dual += tableau.u(i) * supply[i];
  for (std::size_t j = 0; j < C; ++j) dual += tableau.v(j) * demand[j];
  for (std::size_t i = 0; i < m; ++i) out.row_duals[i] = tableau.u(i);
  out.slack_dual = with_slack ? tableau.u(m) : 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    // Raising a requirement also raises the slack source's supply.
    out.col_duals[j] = tableau.v(j) + out.slack_dual;
  }
  out.objective = primal;
  out.dual_objective = dual;
  return out;
}

double RetailerSpec::total_demand() const { return Sum(demand); }

double RetailerSpec::demand_profit() const { return Dot(gross_profit, demand); }

void RetailerSpec::Validate() const {
  if (arc_costs.empty()) throw DimensionError("retailer has no inbound nodes");
  if (gross_profit.size() != demand.size()) {
    throw DimensionError("retailer gross_profit must have one entry per region");
  }
  double max_cost = 0.0;
  for (const auto& row : arc_costs) {
    if (row.size() != demand.size()) {
      throw DimensionError("retailer arc_costs must be I x J");
    }
    CheckNonnegative(row, "retailer arc costs");
    for (double c : row) max_cost = std::max(max_cost, c);
  }
  CheckNonnegative(demand, "demand");
  if (!(lost_sales_penalty > max_cost)) {
    throw ParameterError("lost_sales_penalty must exceed every arc cost");
  }
}

double SupplierSpec::total_capacity() const { return Sum(capacity); }

void SupplierSpec::Validate() const {
  if (arc_costs.size() != capacity.size()) {
    throw DimensionError("supplier arc_costs must have one row per source");
  }
  if (gross_profit.empty()) throw DimensionError("supplier has no inbound nodes");
  for (const auto& row : arc_costs) {
    if (row.size() != gross_profit.size()) {
      throw DimensionError("supplier arc_costs must be K x I");
    }
    CheckNonnegative(row, "supplier arc costs");
  }
  CheckNonnegative(capacity, "capacity");
}

UtilityEval RetailerUtility(const RetailerSpec& spec, const SupplyPlan& x) {
  if (x.size() != spec.inbound_nodes()) {
    throw DimensionError("plan has " + std::to_string(x.size()) +
                         " entries, retailer has " +
                         std::to_string(spec.inbound_nodes()) + " inbound nodes");
  }
  UtilityEval eval;
  eval.solution = SolveTransport(spec.arc_costs, x.values(), spec.demand,
                                 spec.lost_sales_penalty);
  eval.gross_profit = spec.demand_profit();
  eval.transport_cost = eval.solution.objective;
  eval.utility = eval.gross_profit - eval.transport_cost;
  eval.supergradient.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    eval.supergradient[i] = -eval.solution.row_duals[i];
  }
  return eval;
}

UtilityEval SupplierUtility(const SupplierSpec& spec, const SupplyPlan& x) {
  if (x.size() != spec.inbound_nodes()) {
    throw DimensionError("plan has " + std::to_string(x.size()) +
                         " entries, supplier serves " +
                         std::to_string(spec.inbound_nodes()) + " inbound nodes");
  }
  UtilityEval eval;
  eval.solution = SolveTransport(spec.arc_costs, spec.capacity, x.values());
  eval.gross_profit = Dot(spec.gross_profit, x.values());
  eval.transport_cost = eval.solution.objective;
  eval.utility = eval.gross_profit - eval.transport_cost;
  eval.supergradient.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    eval.supergradient[i] = spec.gross_profit[i] - eval.solution.col_duals[i];
  }
  return eval;
}

Vector UtilitySupergradient(const RetailerSpec& spec, const SupplyPlan& x) {
  return RetailerUtility(spec, x).supergradient;
}

Vector UtilitySupergradient(const SupplierSpec& spec, const SupplyPlan& x) {
  return SupplierUtility(spec, x).supergradient;
}

}  // namespace coplan
