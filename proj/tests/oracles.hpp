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

// Independent oracles for the test suites. Nothing here calls the solvers
// under test: transport optima come from exhaustive enumeration over integer
// flows and the inventory values from a direct replay of the weekly books.

#ifndef COPLAN_TESTS_ORACLES_HPP_
#define COPLAN_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "coplan/dynamic.hpp"
#include "coplan/transport.hpp"

namespace coplan::testing {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Minimum cost over integer flow matrices. Rows ship at most their bound;
// columns receive exactly their requirement, or at most it when a slack
// penalty prices the shortfall. Returns +inf when nothing is feasible.
inline double EnumerateTransport(const Matrix& costs, const std::vector<int>& rows,
                                 const std::vector<int>& cols,
                                 std::optional<double> slack_penalty = std::nullopt) {
  const std::size_t m = rows.size();
  const std::size_t n = cols.size();
  std::vector<int> row_left = rows;
  std::vector<int> col_got(n, 0);
  double best = kInf;
  std::function<void(std::size_t, double)> visit = [&](std::size_t cell, double cost) {
    if (cost >= best) return;
    if (cell == m * n) {
      double total = cost;
      for (std::size_t j = 0; j < n; ++j) {
        const int missing = cols[j] - col_got[j];
        if (missing > 0) {
          if (!slack_penalty) return;
          total += *slack_penalty * missing;
        }
      }
      best = std::min(best, total);
      return;
    }
    const std::size_t i = cell / n;
    const std::size_t j = cell % n;
    const int most = std::min(row_left[i], cols[j] - col_got[j]);
    for (int v = 0; v <= most; ++v) {
      row_left[i] -= v;
      col_got[j] += v;
      visit(cell + 1, cost + costs[i][j] * v);
      row_left[i] += v;
      col_got[j] -= v;
    }
  };
  visit(0, 0.0);
  return best;
}

inline std::vector<int> AsInts(const Vector& v) {
  std::vector<int> out;
  for (double d : v) out.push_back(static_cast<int>(std::lround(d)));
  return out;
}

inline Matrix Transpose(const Matrix& a) {
  if (a.empty()) return {};
  Matrix t(a[0].size(), Vector(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a[i].size(); ++j) t[j][i] = a[i][j];
  }
  return t;
}

// u_A(x) by enumeration; x, demand integral.
inline double EnumeratedRetailerUtility(const RetailerSpec& r, const std::vector<int>& x) {
  double profit = 0.0;
  for (std::size_t j = 0; j < r.demand.size(); ++j) profit += r.gross_profit[j] * r.demand[j];
  return profit - EnumerateTransport(r.arc_costs, x, AsInts(r.demand), r.lost_sales_penalty);
}

// u_S(x) by enumeration; -inf when the capacity cannot cover x.
inline double EnumeratedSupplierUtility(const SupplierSpec& s, const std::vector<int>& x) {
  double profit = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) profit += s.gross_profit[i] * x[i];
  const double cost = EnumerateTransport(s.arc_costs, AsInts(s.capacity), x);
  return std::isinf(cost) ? -kInf : profit - cost;
}

// Calls `f` on every integer vector of length n with entries summing to at
// most `total`.
inline void ForEachIntegerPlan(std::size_t n, int total,
                               const std::function<void(const std::vector<int>&)>& f) {
  std::vector<int> x(n, 0);
  std::function<void(std::size_t, int)> rec = [&](std::size_t i, int left) {
    if (i == n) {
      f(x);
      return;
    }
    for (int v = 0; v <= left; ++v) {
      x[i] = v;
      rec(i + 1, left - v);
    }
    x[i] = 0;
  };
  rec(0, total);
}

// Retailer books replayed week by week over a window of forecasts.
struct Books {
  double retailer = 0.0;
  double supplier = 0.0;
};

inline Books ReplayWindow(const InventoryModel& m, std::size_t begin, double inventory,
                          double last_order, const std::vector<double>& orders) {
  Books b;
  double prev = last_order;
  for (std::size_t k = 0; k < orders.size(); ++k) {
    const double f = m.forecast[begin + k];
    const double on_hand = inventory + orders[k];
    const double sold = std::min(on_hand, f);
    const double left = on_hand - sold;
    b.retailer += m.retailer_margin * sold - m.holding_cost * left - m.lost_sales_cost * (f - sold);
    b.supplier += m.supplier_margin * orders[k] -
                  m.smoothing * (orders[k] - prev) * (orders[k] - prev);
    prev = orders[k];
    inventory = left;
  }
  return b;
}

// Order-up-to-forecast sequence from `inventory`, projected on forecasts.
inline std::vector<double> UpToForecast(const InventoryModel& m, std::size_t begin,
                                        std::size_t end, double inventory) {
  std::vector<double> out;
  for (std::size_t t = begin; t < end; ++t) {
    const double f = m.forecast[t];
    const double z = std::max(0.0, f - inventory);
    out.push_back(z);
    inventory = inventory + z - std::min(inventory + z, f);
  }
  return out;
}

// Maximizes a concave function of one variable on [lo, hi].
inline double TernaryMax(const std::function<double(double)>& f, double lo, double hi,
                         int rounds = 200) {
  for (int k = 0; k < rounds && hi - lo > 1e-12; ++k) {
    const double a = lo + (hi - lo) / 3.0;
    const double b = hi - (hi - lo) / 3.0;
    if (f(a) < f(b)) {
      lo = a;
    } else {
      hi = b;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace coplan::testing

#endif  // COPLAN_TESTS_ORACLES_HPP_
