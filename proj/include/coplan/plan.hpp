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

#ifndef COPLAN_PLAN_HPP_
#define COPLAN_PLAN_HPP_

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace coplan {

using Vector = std::vector<double>;

// The public decision variable: a nonnegative quantity per inbound node
// (or per week, in the rolling-horizon model).
class SupplyPlan {
 public:
  SupplyPlan() = default;
  // Throws ParameterError on negative or non-finite entries.
  explicit SupplyPlan(Vector quantities);
  SupplyPlan(std::initializer_list<double> quantities);

  static SupplyPlan Zeros(std::size_t n);
  // Clamps negative entries to zero.
  static SupplyPlan ClampedFrom(std::span<const double> v);

  std::size_t size() const { return q_.size(); }
  bool empty() const { return q_.empty(); }
  double operator[](std::size_t i) const { return q_[i]; }
  const Vector& values() const { return q_; }
  double total() const;

  friend bool operator==(const SupplyPlan&, const SupplyPlan&) = default;

 private:
  Vector q_;
};

// Small dense helpers shared by the solvers.
double Dot(std::span<const double> a, std::span<const double> b);
double Norm2(std::span<const double> a);
double DistInf(std::span<const double> a, std::span<const double> b);
double Dist2(std::span<const double> a, std::span<const double> b);

// Euclidean projection onto {x >= 0, sum(x) <= cap}. `cap` < 0 means no cap.
Vector ProjectCappedOrthant(std::span<const double> v, double cap);

}  // namespace coplan

#endif  // COPLAN_PLAN_HPP_
