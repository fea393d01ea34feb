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

#include "coplan/plan.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "coplan/errors.hpp"

namespace coplan {

SupplyPlan::SupplyPlan(Vector quantities) : q_(std::move(quantities)) {
  for (double v : q_) {
    if (!std::isfinite(v) || v < 0.0) {
      throw ParameterError("supply plan entries must be finite and >= 0");
    }
  }
}

SupplyPlan::SupplyPlan(std::initializer_list<double> quantities)
    : SupplyPlan(Vector(quantities)) {}

SupplyPlan SupplyPlan::Zeros(std::size_t n) { return SupplyPlan(Vector(n)); }

SupplyPlan SupplyPlan::ClampedFrom(std::span<const double> v) {
  Vector q(v.begin(), v.end());
  for (double& e : q) e = std::max(0.0, e);
  return SupplyPlan(std::move(q));
}

double SupplyPlan::total() const {
  return std::accumulate(q_.begin(), q_.end(), 0.0);
}

double Dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double Norm2(std::span<const double> a) { return std::sqrt(Dot(a, a)); }

double DistInf(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d = std::max(d, std::abs(a[i] - b[i]));
  }
  return d;
}

double Dist2(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += (a[i] - b[i]) * (a[i] - b[i]);
  }
  return std::sqrt(s);
}

Vector ProjectCappedOrthant(std::span<const double> v, double cap) {
  Vector out(v.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::max(0.0, v[i]);
    sum += out[i];
  }
  if (cap < 0.0 || sum <= cap) return out;
  // Sum constraint binds: find tau with sum(max(v - tau, 0)) = cap.
  Vector sorted(v.begin(), v.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double running = 0.0;
  double tau = 0.0;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    running += sorted[k];
    const double candidate = (running - cap) / static_cast<double>(k + 1);
    const double next = k + 1 < sorted.size() ? sorted[k + 1] : -INFINITY;
    if (candidate >= next) {
      tau = candidate;
      break;
    }
  }
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::max(0.0, v[i] - tau);
  }
  return out;
}

}  // namespace coplan
