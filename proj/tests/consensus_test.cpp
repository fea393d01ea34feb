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

#include <random>
#include <sstream>

#include "coplan/consensus.hpp"
#include "coplan/errors.hpp"
#include "coplan/instances.hpp"
#include "coplan/mechanism.hpp"
#include "doctest.h"
#include "json.hpp"
#include "toy.hpp"

namespace coplan {
namespace {

double Prox(const RetailerSpec& r, const Vector& pi, const SupplyPlan& x, const SupplyPlan& z,
            double rho) {
  return ProximalObjective(RetailerUtility(r, x).utility, pi, x, z, rho);
}

TEST_CASE("a huge rho pins the best response to z") {
  auto agent = MakeRetailerAgent(ToyRetailer());
  const SupplyPlan z{12.5, 33.0};
  const SupplyPlan x = agent->BestResponse(Vector{0, 0}, z, 1e6);
  CHECK(DistInf(x.values(), z.values()) < 1e-3);
}

TEST_CASE("retailer best response beats every lattice point") {
  const RetailerSpec r = ToyRetailer();
  auto agent = MakeRetailerAgent(r);
  const SupplyPlan z{40, 60};
  const Vector pi{0, 0};
  const SupplyPlan x = agent->BestResponse(pi, z, 1.0);
  const double best = Prox(r, pi, x, z, 1.0);
  double lattice_best = -1e300;
  SupplyPlan lattice_arg;
  for (double a = 0.0; a <= 100.0; a += 0.25) {
    for (double b = 0.0; a + b <= 100.0; b += 0.25) {
      const double v = Prox(r, pi, {a, b}, z, 1.0);
      if (v > lattice_best) {
        lattice_best = v;
        lattice_arg = {a, b};
      }
    }
  }
  CHECK(best >= lattice_best - 1e-9);
  CHECK(DistInf(x.values(), lattice_arg.values()) <= 0.25);
}

TEST_CASE("supplier best response dominates the lattice for random queries") {
  const SupplierSpec s = ToySupplier();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto agent = MakeSupplierAgent(s);
  for (int trial = 0; trial < 5; ++trial) {
    const Vector pi{20.0 * u(rng) - 10.0, 20.0 * u(rng) - 10.0};
    const SupplyPlan z{60.0 * u(rng), 60.0 * u(rng)};
    const SupplyPlan x = agent->BestResponse(pi, z, 1.0);
    const double got = ProximalObjective(SupplierUtility(s, x).utility, pi, x, z, 1.0);
    for (double a = 0.0; a <= 110.0; a += 1.0) {
      for (double b = 0.0; a + b <= 110.0; b += 1.0) {
        const SupplyPlan y{a, b};
        CHECK(got >= ProximalObjective(SupplierUtility(s, y).utility, pi, y, z, 1.0) - 1e-9);
      }
    }
  }
}

TEST_CASE("coordinator step arithmetic") {
  ConsensusState st = ConsensusState::Initial(2, SupplyPlan{0, 0}, 1.0);
  const std::vector<SupplyPlan> responses{SupplyPlan{0, 0}, SupplyPlan{2, 2}};
  const ConsensusState next = CoordinatorStep(st, responses);
  CHECK(next.z == Vector{1, 1});
  CHECK(next.prices[0] == Vector{-1, -1});
  CHECK(next.prices[1] == Vector{1, 1});

  ConsensusState fixed = ConsensusState::Initial(2, SupplyPlan{3, 4}, 2.0);
  const std::vector<SupplyPlan> same{SupplyPlan{3, 4}, SupplyPlan{3, 4}};
  const ConsensusState after = CoordinatorStep(fixed, same);
  CHECK(after.z == fixed.z);
  CHECK(after.primal_residual == 0.0);
  CHECK(after.prices[0] == Vector{0, 0});

  const std::vector<SupplyPlan> short_list{SupplyPlan{1, 1}};
  CHECK_THROWS_AS(CoordinatorStep(st, short_list), DimensionError);
}

TEST_CASE("prices sum to exactly zero after every step") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t agents = 2 + trial % 4;
    const std::size_t dim = 1 + trial % 5;
    ConsensusState st = ConsensusState::Initial(agents, SupplyPlan::Zeros(dim), 0.5 + trial % 3);
    for (auto& p : st.prices) {
      for (double& v : p) v = u(rng);
    }
    std::vector<SupplyPlan> responses;
    for (std::size_t m = 0; m < agents; ++m) {
      Vector x(dim);
      for (double& v : x) v = std::abs(u(rng));
      responses.emplace_back(x);
    }
    const ConsensusState next = CoordinatorStep(st, responses);
    for (std::size_t i = 0; i < dim; ++i) {
      double sum = 0.0;
      for (const auto& p : next.prices) sum += p[i];
      CHECK(sum == 0.0);
    }
    CHECK(next.primal_residual >= 0.0);
    CHECK(next.dual_residual >= 0.0);
  }
}

TEST_CASE("toy consensus reaches the first-best plan") {
  auto r = MakeRetailerAgent(ToyRetailer());
  auto s = MakeSupplierAgent(ToySupplier());
  std::vector<Agent*> agents{r.get(), s.get()};
  ConsensusConfig cfg;
  cfg.initial = SupplyPlan{40, 60};
  cfg.record_history = true;
  const ConsensusResult res = RunConsensus(agents, cfg);
  REQUIRE(res.converged);
  CHECK(DistInf(res.plan.values(), Vector{10, 90}) <= 0.05);
  CHECK(*res.utilities[0] + *res.utilities[1] == doctest::Approx(3290.0).epsilon(0.5 / 3290.0));

  // Residual trend, sampled every 25 iterations after the first 50.
  double prev = 1e300;
  for (std::size_t k = 50; k < res.history.size(); k += 25) {
    CHECK(res.history[k].primal_residual <= 1.05 * prev);
    prev = res.history[k].primal_residual;
  }

  // Joint optimality on a lattice around x*.
  const double joint = RetailerUtility(ToyRetailer(), res.plan).utility +
                       SupplierUtility(ToySupplier(), res.plan).utility;
  for (int da = -5; da <= 5; ++da) {
    for (int db = -5; db <= 5; ++db) {
      const SupplyPlan y{std::max(0.0, res.plan[0] + da), std::max(0.0, res.plan[1] + db)};
      if (y.total() > 100.0) continue;  // joint domain: total demand
      CHECK(joint >= RetailerUtility(ToyRetailer(), y).utility +
                         SupplierUtility(ToySupplier(), y).utility - 1e-3);
    }
  }
}

TEST_CASE("adaptive rho also converges on the toy") {
  auto r = MakeRetailerAgent(ToyRetailer());
  auto s = MakeSupplierAgent(ToySupplier());
  std::vector<Agent*> agents{r.get(), s.get()};
  ConsensusConfig cfg;
  cfg.adaptive_rho = true;
  const ConsensusResult res = RunConsensus(agents, cfg);
  REQUIRE(res.converged);
  CHECK(DistInf(res.plan.values(), Vector{10, 90}) <= 0.05);
}

TEST_CASE("a single agent settles on its own maximizer") {
  auto r = MakeRetailerAgent(ToyRetailer());
  std::vector<Agent*> agents{r.get()};
  const ConsensusResult res = RunConsensus(agents, ConsensusConfig{});
  REQUIRE(res.converged);
  CHECK(RetailerUtility(ToyRetailer(), res.plan).utility == doctest::Approx(1780.0).epsilon(1e-6));
}

TEST_CASE("an exhausted iteration budget is reported, then raised on request") {
  auto r = MakeRetailerAgent(ToyRetailer());
  auto s = MakeSupplierAgent(ToySupplier());
  std::vector<Agent*> agents{r.get(), s.get()};
  ConsensusConfig cfg;
  cfg.max_iters = 3;
  const ConsensusResult res = RunConsensus(agents, cfg);
  CHECK_FALSE(res.converged);
  CHECK(res.iterations == 3);
  CHECK_THROWS_AS(RequireConverged(res), NonConvergenceError);
}

TEST_CASE("trace lines are one JSON object per iteration") {
  auto r = MakeRetailerAgent(ToyRetailer());
  auto s = MakeSupplierAgent(ToySupplier());
  std::vector<Agent*> agents{r.get(), s.get()};
  std::ostringstream trace;
  ConsensusConfig cfg;
  cfg.trace = &trace;
  const ConsensusResult res = RunConsensus(agents, cfg);
  std::istringstream lines(trace.str());
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) {
    const auto doc = nlohmann::json::parse(line);
    CHECK(doc.contains("z"));
    ++count;
  }
  CHECK(count == res.iterations);
}

TEST_CASE("consensus matches the centralized plan on random instances") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    const BilateralInstance inst = RandomBilateral(rng);
    const double central = [&] {
      const SupplyPlan x = EfficientPlan(inst.retailer, inst.supplier, FeePolicy::None()).plan;
      return RetailerUtility(inst.retailer, x).utility + SupplierUtility(inst.supplier, x).utility;
    }();
    EfficientPlanOptions opts;
    opts.method = PlanMethod::kCpp;
    const SupplyPlan x = EfficientPlan(inst.retailer, inst.supplier, FeePolicy::None(), opts).plan;
    const double cpp =
        RetailerUtility(inst.retailer, x).utility + SupplierUtility(inst.supplier, x).utility;
    CHECK(std::abs(cpp - central) <= 1e-3 * std::max(1.0, std::abs(central)));
  }
}

}  // namespace
}  // namespace coplan
