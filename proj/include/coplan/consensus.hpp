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

// Consensus planning: agents answer price/consensus queries with proximal
// best responses, and a coordinator reconciles them by consensus ADMM.
//
// Each agent m privately holds a concave utility u_m over the shared plan.
// At iteration k the coordinator sends (pi_m, z) and agent m returns
//
//     argmax_x  u_m(x) - pi_m' x - (rho/2) |x - z|^2     over its domain,
//
// after which z is re-averaged and each pi_m moves by rho (x_m - z).

#ifndef COPLAN_CONSENSUS_HPP_
#define COPLAN_CONSENSUS_HPP_

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "coplan/plan.hpp"
#include "coplan/transport.hpp"

namespace coplan {

// A black-box best-response endpoint.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual std::size_t dimension() const = 0;
  virtual SupplyPlan BestResponse(std::span<const double> prices,
                                  const SupplyPlan& z, double rho) = 0;
  // Own utility, when the agent is willing to evaluate it in-process;
  // nullopt outside its domain.
  virtual std::optional<double> Utility(const SupplyPlan&) const {
    return std::nullopt;
  }
};

struct ValueAndSupergradient {
  double value = 0.0;
  Vector supergradient;
};
using ConcaveOracle = std::function<ValueAndSupergradient(const SupplyPlan&)>;

// Exact proximal best response for a concave piecewise-linear utility.
//
// Keeps a bundle of supporting hyperplanes u(x) <= a_k + g_k'x built from
// oracle supergradients and maximizes the model plus the proximal term by
// an active-set QP. When the model value at the QP solution matches the
// oracle the solution is exact; otherwise the new cut is added. Polyhedral
// utilities have finitely many pieces, so the loop terminates. The bundle
// persists across calls.
class ProximalCuttingPlane {
 public:
  // `cap` bounds sum(x) when >= 0; x >= 0 always.
  ProximalCuttingPlane(std::size_t dimension, double cap);

  SupplyPlan Solve(const ConcaveOracle& oracle, std::span<const double> prices,
                   const SupplyPlan& z, double rho);

  std::size_t cuts() const { return slopes_.size(); }
  // Oracle evaluations made by the last Solve call.
  int last_evaluations() const { return last_evaluations_; }

 private:
  bool AddCut(const ValueAndSupergradient& eval, const SupplyPlan& at);

  std::size_t dim_;
  double cap_;
  std::vector<Vector> slopes_;
  Vector intercepts_;
  int last_evaluations_ = 0;
};

// Agent backed by a concave piecewise-linear oracle on {x >= 0, sum x <= cap}.
class CuttingPlaneAgent : public Agent {
 public:
  CuttingPlaneAgent(std::size_t dimension, double cap, ConcaveOracle oracle);

  std::size_t dimension() const override { return dim_; }
  SupplyPlan BestResponse(std::span<const double> prices, const SupplyPlan& z,
                          double rho) override;
  std::optional<double> Utility(const SupplyPlan& x) const override;
  double cap() const { return cap_; }

 private:
  std::size_t dim_;
  double cap_;
  ConcaveOracle oracle_;
  ProximalCuttingPlane prox_;
};

// The retailer orders at most its total demand; u_A is evaluated by the
// transport LP with lost-sales slack.
std::unique_ptr<CuttingPlaneAgent> MakeRetailerAgent(RetailerSpec spec);
// The supplier cannot be asked for more than its total capacity.
std::unique_ptr<CuttingPlaneAgent> MakeSupplierAgent(SupplierSpec spec);

// The proximal objective u(x) - pi'x - (rho/2)|x - z|^2.
double ProximalObjective(double utility, std::span<const double> prices,
                         const SupplyPlan& x, const SupplyPlan& z, double rho);

SupplyPlan BestResponse(Agent& agent, std::span<const double> prices,
                        const SupplyPlan& z, double rho);

struct ConsensusState {
  int iteration = 0;
  Vector z;
  std::vector<Vector> prices;     // pi_m per agent
  std::vector<Vector> responses;  // last best responses
  double primal_residual = 0.0;   // max_m |x_m - z|
  double dual_residual = 0.0;     // rho |z - z_prev|
  double rho = 1.0;

  static ConsensusState Initial(std::size_t agents, const SupplyPlan& z0,
                                double rho);
};

// One consensus-ADMM coordinator update. The last agent's price is set to
// minus the sum of the others, so sum_m pi_m == 0 holds exactly.
// Throws DimensionError when responses do not match the state.
ConsensusState CoordinatorStep(const ConsensusState& state,
                               std::span<const SupplyPlan> responses);

// Source of best responses for one coordinator iteration: in-process agents
// or remote sessions.
class ResponderPool {
 public:
  virtual ~ResponderPool() = default;
  virtual std::size_t size() const = 0;
  virtual std::size_t dimension() const = 0;
  virtual std::vector<SupplyPlan> Query(int iteration,
                                        std::span<const Vector> prices,
                                        const SupplyPlan& z, double rho) = 0;
};

class InProcessPool : public ResponderPool {
 public:
  explicit InProcessPool(std::vector<Agent*> agents);
  std::size_t size() const override { return agents_.size(); }
  std::size_t dimension() const override;
  std::vector<SupplyPlan> Query(int iteration, std::span<const Vector> prices,
                                const SupplyPlan& z, double rho) override;

 private:
  std::vector<Agent*> agents_;
};

inline constexpr int kAdaptiveRhoIterations = 100;

struct ConsensusConfig {
  double rho = 1.0;
  double eps_abs = 1e-6;
  double eps_rel = 1e-6;
  int max_iters = 5000;
  // Residual balancing: double rho when r_p > 10 r_d, halve when r_d > 10 r_p.
  // Only during the first kAdaptiveRhoIterations; after that rho is frozen,
  // since balancing can cycle forever on piecewise-linear utilities.
  bool adaptive_rho = false;
  std::optional<SupplyPlan> initial;  // z^0; zeros when absent
  std::ostream* trace = nullptr;      // one JSON line per iteration
  bool record_history = false;
};

struct TraceRecord {
  int iteration = 0;
  Vector z;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double rho = 0.0;
};

struct ConsensusResult {
  SupplyPlan plan;  // final z, clamped to x >= 0
  std::vector<std::optional<double>> utilities;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  bool converged = false;
  ConsensusState final_state;
  std::vector<TraceRecord> history;
};

// Iterates queries and coordinator steps until the residual tests pass or
// max_iters is reached. A non-converged run still returns its best state
// with converged = false; use RequireConverged to turn that into an error.
ConsensusResult RunConsensus(ResponderPool& pool, const ConsensusConfig& config);
ConsensusResult RunConsensus(std::span<Agent* const> agents,
                             const ConsensusConfig& config);

// Throws NonConvergenceError if the run did not converge.
const ConsensusResult& RequireConverged(const ConsensusResult& result);

void WriteTraceLine(std::ostream& out, const TraceRecord& record);

}  // namespace coplan

#endif  // COPLAN_CONSENSUS_HPP_
