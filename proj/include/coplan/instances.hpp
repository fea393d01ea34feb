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

// Seeded random instances for property suites and `coplan run --seed`.

#ifndef COPLAN_INSTANCES_HPP_
#define COPLAN_INSTANCES_HPP_

#include <cstddef>
#include <random>

#include "coplan/dynamic.hpp"
#include "coplan/transport.hpp"

namespace coplan {

struct BilateralInstance {
  RetailerSpec retailer;
  SupplierSpec supplier;
};

struct BilateralOptions {
  std::size_t max_dim = 5;  // I, J, K each drawn from 1..max_dim
  double min_cost = 1.0;
  double max_cost = 10.0;
  double max_quantity = 100.0;  // demands and capacities in [0, max]
  double min_margin = 5.0;      // gross profits per unit
  double max_margin = 30.0;
  // Redraw capacities until the supplier can fill the retailer's JIT order,
  // which makes the status quo a feasible joint plan.
  bool capacity_covers_jit = false;
};

BilateralInstance RandomBilateral(std::mt19937_64& rng, const BilateralOptions& options = {});

// Scales every supplier arc cost and capacity by an independent factor in
// [1 - spread, 1 + spread].
SupplierSpec Misreport(const SupplierSpec& truth, std::mt19937_64& rng, double spread = 0.5);

struct InventoryOptions {
  std::size_t weeks = 6;
  std::size_t horizon = 6;
  double max_forecast = 30.0;
};

// TIP = forecast and m_S < h, so the JIT plan is the retailer's optimum and
// the supplier's margin alone never justifies carrying stock.
InventoryModel RandomInventoryModel(std::mt19937_64& rng, const InventoryOptions& options = {});

}  // namespace coplan

#endif  // COPLAN_INSTANCES_HPP_
