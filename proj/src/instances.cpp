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

#include "coplan/instances.hpp"

#include <cmath>

#include "coplan/mechanism.hpp"

namespace coplan {
namespace {

double Uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::size_t Dim(std::mt19937_64& rng, std::size_t max_dim) {
  return std::uniform_int_distribution<std::size_t>(1, max_dim)(rng);
}

Matrix RandomMatrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double lo,
                    double hi) {
  Matrix m(rows, Vector(cols));
  for (auto& row : m) {
    for (double& v : row) v = Uniform(rng, lo, hi);
  }
  return m;
}

Vector RandomVector(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  Vector v(n);
  for (double& x : v) x = Uniform(rng, lo, hi);
  return v;
}

}  // namespace

BilateralInstance RandomBilateral(std::mt19937_64& rng, const BilateralOptions& options) {
  const std::size_t i = Dim(rng, options.max_dim);
  const std::size_t j = Dim(rng, options.max_dim);
  const std::size_t k = Dim(rng, options.max_dim);
  BilateralInstance out;
  out.retailer.demand = RandomVector(rng, j, 0.0, options.max_quantity);
  out.retailer.arc_costs = RandomMatrix(rng, i, j, options.min_cost, options.max_cost);
  out.retailer.gross_profit = RandomVector(rng, j, options.min_margin, options.max_margin);
  out.supplier.capacity = RandomVector(rng, k, 0.0, options.max_quantity);
  out.supplier.arc_costs = RandomMatrix(rng, k, i, options.min_cost, options.max_cost);
  out.supplier.gross_profit = RandomVector(rng, i, options.min_margin, options.max_margin);
  if (options.capacity_covers_jit) {
    const double order = RetailerJitPlan(out.retailer).total();
    for (int attempt = 0; out.supplier.total_capacity() < order; ++attempt) {
      if (attempt < 100) {
        out.supplier.capacity = RandomVector(rng, k, 0.0, options.max_quantity);
        continue;
      }
      // Orders beyond what K sources can ever draw: top up evenly.
      const double gap = order - out.supplier.total_capacity();
      for (double& s : out.supplier.capacity) s += gap / static_cast<double>(k);
    }
  }
  return out;
}

SupplierSpec Misreport(const SupplierSpec& truth, std::mt19937_64& rng, double spread) {
  SupplierSpec lie = truth;
  for (auto& row : lie.arc_costs) {
    for (double& c : row) c *= Uniform(rng, 1.0 - spread, 1.0 + spread);
  }
  for (double& s : lie.capacity) s *= Uniform(rng, 1.0 - spread, 1.0 + spread);
  return lie;
}

InventoryModel RandomInventoryModel(std::mt19937_64& rng, const InventoryOptions& options) {
  InventoryModel m;
  m.horizon = options.horizon;
  for (std::size_t t = 0; t < options.weeks; ++t) {
    m.forecast.push_back(std::round(Uniform(rng, 0.0, options.max_forecast)));
  }
  m.holding_cost = Uniform(rng, 0.5, 2.5);
  m.lost_sales_cost = Uniform(rng, 1.0, 6.0);
  m.retailer_margin = Uniform(rng, 2.0, 10.0);
  m.supplier_margin = m.holding_cost * Uniform(rng, 0.0, 0.9);
  m.smoothing = Uniform(rng, 0.01, 0.5);
  return m;
}

}  // namespace coplan
