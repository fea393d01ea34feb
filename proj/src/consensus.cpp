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

#include "coplan/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "json.hpp"

#include "coplan/errors.hpp"
#include "coplan/qp.hpp"

namespace coplan {
namespace {

constexpr int kMaxCutRounds = 1000;

}  // namespace

ProximalCuttingPlane::ProximalCuttingPlane(std::size_t dimension, double cap)
    : dim_(dimension), cap_(cap) {}

bool ProximalCuttingPlane::AddCut(const ValueAndSupergradient& eval,
                                  const SupplyPlan& at) {
  const double intercept = eval.value - Dot(eval.supergradient, at.values());
  for (std::size_t k = 0; k < slopes_.size(); ++k) {
    if (DistInf(slopes_[k], eval.supergradient) <= 1e-12 * (1.0 + Norm2(slopes_[k])) &&
        std::abs(intercepts_[k] - intercept) <= 1e-9 * (1.0 + std::abs(intercept))) {
      return false;
    }
  }
  slopes_.push_back(eval.supergradient);
  intercepts_.push_back(intercept);
  return true;
}

SupplyPlan ProximalCuttingPlane::Solve(const ConcaveOracle& oracle,
                                       std::span<const double> prices,
                                       const SupplyPlan& z, double rho) {
  if (!(rho > 0.0)) throw ParameterError("rho must be positive");
  if (prices.size() != dim_ || z.size() != dim_) {
    throw DimensionError("best-response query does not match plan dimension");
  }
  const Eigen::Index n = static_cast<Eigen::Index>(dim_);
  Vector start(dim_);
  for (std::size_t i = 0; i < dim_; ++i) start[i] = z[i] - prices[i] / rho;
  SupplyPlan x(ProjectCappedOrthant(start, cap_));
  last_evaluations_ = 1;
  AddCut(oracle(x), x);

  QpProblem qp;
  qp.H = Eigen::MatrixXd::Zero(n + 1, n + 1);
  qp.f = Eigen::VectorXd::Zero(n + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    qp.H(i, i) = rho;
    qp.f[i] = prices[static_cast<std::size_t>(i)] - rho * z[static_cast<std::size_t>(i)];
  }
  qp.f[n] = -1.0;

  for (int round = 0; round < kMaxCutRounds; ++round) {
    const Eigen::Index cuts = static_cast<Eigen::Index>(slopes_.size());
    const Eigen::Index rows = cuts + n + (cap_ >= 0.0 ? 1 : 0);
    qp.A = Eigen::MatrixXd::Zero(rows, n + 1);
    qp.b = Eigen::VectorXd::Zero(rows);
    for (Eigen::Index k = 0; k < cuts; ++k) {
      for (Eigen::Index i = 0; i < n; ++i) {
        qp.A(k, i) = -slopes_[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
      }
      qp.A(k, n) = 1.0;
      qp.b[k] = intercepts_[static_cast<std::size_t>(k)];
    }
    for (Eigen::Index i = 0; i < n; ++i) qp.A(cuts + i, i) = -1.0;
    if (cap_ >= 0.0) {
      for (Eigen::Index i = 0; i < n; ++i) qp.A(cuts + n, i) = 1.0;
      qp.b[cuts + n] = cap_;
    }

    // Feasible start: current x with t on the lowest cut.
    Eigen::VectorXd y(n + 1);
    for (Eigen::Index i = 0; i < n; ++i) y[i] = x[static_cast<std::size_t>(i)];
    int lowest = 0;
    double t = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < cuts; ++k) {
      const double value =
          intercepts_[static_cast<std::size_t>(k)] +
          Dot(slopes_[static_cast<std::size_t>(k)], x.values());
      if (value < t) {
        t = value;
        lowest = static_cast<int>(k);
      }
    }
    y[n] = t;
    const QpResult sol = SolveActiveSetQp(qp, y, {lowest});

    Vector candidate(dim_);
    for (Eigen::Index i = 0; i < n; ++i) candidate[static_cast<std::size_t>(i)] = sol.y[i];
    x = SupplyPlan(ProjectCappedOrthant(candidate, cap_));
    const double model = sol.y[n];
    const ValueAndSupergradient eval = oracle(x);
    ++last_evaluations_;
    if (model - eval.value <= 1e-10 * (1.0 + std::abs(eval.value))) return x;
    if (!AddCut(eval, x)) return x;
  }
  throw NonConvergenceError("proximal best response did not settle");
}

CuttingPlaneAgent::CuttingPlaneAgent(std::size_t dimension, double cap,
                                     ConcaveOracle oracle)
    : dim_(dimension), cap_(cap), oracle_(std::move(oracle)), prox_(dimension, cap) {}

SupplyPlan CuttingPlaneAgent::BestResponse(std::span<const double> prices,
                                           const SupplyPlan& z, double rho) {
  return prox_.Solve(oracle_, prices, z, rho);
}

std::optional<double> CuttingPlaneAgent::Utility(const SupplyPlan& x) const {
  try {
    return oracle_(x).value;
  } catch (const InfeasibleError&) {
    return std::nullopt;  // outside the agent's domain
  }
}

std::unique_ptr<CuttingPlaneAgent> MakeRetailerAgent(RetailerSpec spec) {
  spec.Validate();
  const std::size_t dim = spec.inbound_nodes();
  const double cap = spec.total_demand();
  return std::make_unique<CuttingPlaneAgent>(
      dim, cap, [spec = std::move(spec)](const SupplyPlan& x) {
        UtilityEval eval = RetailerUtility(spec, x);
        return ValueAndSupergradient{eval.utility, std::move(eval.supergradient)};
      });
}

std::unique_ptr<CuttingPlaneAgent> MakeSupplierAgent(SupplierSpec spec) {
  spec.Validate();
  const std::size_t dim = spec.inbound_nodes();
  const double cap = spec.total_capacity();
  return std::make_unique<CuttingPlaneAgent>(
      dim, cap, [spec = std::move(spec)](const SupplyPlan& x) {
        UtilityEval eval = SupplierUtility(spec, x);
        return ValueAndSupergradient{eval.utility, std::move(eval.supergradient)};
      });
}

double ProximalObjective(double utility, std::span<const double> prices,
                         const SupplyPlan& x, const SupplyPlan& z, double rho) {
  const double d = Dist2(x.values(), z.values());
  return utility - Dot(prices, x.values()) - 0.5 * rho * d * d;
}

SupplyPlan BestResponse(Agent& agent, std::span<const double> prices,
                        const SupplyPlan& z, double rho) {
  return agent.BestResponse(prices, z, rho);
}

ConsensusState ConsensusState::Initial(std::size_t agents, const SupplyPlan& z0,
                                       double rho) {
  if (!(rho > 0.0)) throw ParameterError("rho must be positive");
  ConsensusState state;
  state.z = z0.values();
  state.prices.assign(agents, Vector(z0.size(), 0.0));
  state.responses.assign(agents, z0.values());
  state.rho = rho;
  return state;
}

ConsensusState CoordinatorStep(const ConsensusState& state,
                               std::span<const SupplyPlan> responses) {
  const std::size_t agents = state.prices.size();
  const std::size_t n = state.z.size();
  if (responses.size() != agents) {
    throw DimensionError("expected " + std::to_string(agents) + " responses, got " +
                         std::to_string(responses.size()));
  }
  for (const auto& r : responses) {
    if (r.size() != n) throw DimensionError("response dimension mismatch");
  }
  const double rho = state.rho;
  ConsensusState next;
  next.iteration = state.iteration + 1;
  next.rho = rho;
  next.z.assign(n, 0.0);
  for (std::size_t m = 0; m < agents; ++m) {
    for (std::size_t i = 0; i < n; ++i) {
      next.z[i] += responses[m][i] + state.prices[m][i] / rho;
    }
  }
  for (double& v : next.z) v /= static_cast<double>(agents);

  next.prices.assign(agents, Vector(n, 0.0));
  for (std::size_t m = 0; m + 1 < agents; ++m) {
    for (std::size_t i = 0; i < n; ++i) {
      next.prices[m][i] = state.prices[m][i] + rho * (responses[m][i] - next.z[i]);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t m = 0; m + 1 < agents; ++m) sum += next.prices[m][i];
    next.prices[agents - 1][i] = -sum;
  }

  next.responses.reserve(agents);
  next.primal_residual = 0.0;
  for (const auto& r : responses) {
    next.responses.push_back(r.values());
    next.primal_residual = std::max(next.primal_residual, Dist2(r.values(), next.z));
  }
  next.dual_residual = rho * Dist2(next.z, state.z);
  return next;
}

InProcessPool::InProcessPool(std::vector<Agent*> agents) : agents_(std::move(agents)) {
  if (agents_.empty()) throw ParameterError("consensus needs at least one agent");
  for (const Agent* a : agents_) {
    if (a->dimension() != agents_.front()->dimension()) {
      throw DimensionError("agents disagree on plan dimension");
    }
  }
}

std::size_t InProcessPool::dimension() const { return agents_.front()->dimension(); }

std::vector<SupplyPlan> InProcessPool::Query(int, std::span<const Vector> prices,
                                             const SupplyPlan& z, double rho) {
  std::vector<SupplyPlan> out;
  out.reserve(agents_.size());
  for (std::size_t m = 0; m < agents_.size(); ++m) {
    out.push_back(agents_[m]->BestResponse(prices[m], z, rho));
  }
  return out;
}

void WriteTraceLine(std::ostream& out, const TraceRecord& record) {
  nlohmann::json line;
  line["iteration"] = record.iteration;
  line["z"] = record.z;
  line["primal_residual"] = record.primal_residual;
  line["dual_residual"] = record.dual_residual;
  line["rho"] = record.rho;
  out << line.dump() << '\n';
}

ConsensusResult RunConsensus(ResponderPool& pool, const ConsensusConfig& config) {
  const std::size_t n = pool.dimension();
  const SupplyPlan z0 = config.initial ? *config.initial : SupplyPlan::Zeros(n);
  if (z0.size() != n) throw DimensionError("initial plan dimension mismatch");
  if (config.max_iters < 1) throw ParameterError("max_iters must be >= 1");

  ConsensusState state = ConsensusState::Initial(pool.size(), z0, config.rho);
  ConsensusResult result;
  ConsensusState best = state;
  double best_score = std::numeric_limits<double>::infinity();
  bool converged = false;

  for (int k = 1; k <= config.max_iters; ++k) {
    const SupplyPlan z = SupplyPlan::ClampedFrom(state.z);
    const std::vector<SupplyPlan> responses = pool.Query(k, state.prices, z, state.rho);
    state = CoordinatorStep(state, responses);

    const double znorm = Norm2(state.z);
    const double primal_tol = config.eps_abs + config.eps_rel * znorm;
    const double dual_tol = config.eps_abs + config.eps_rel * state.rho * znorm;
    const double score =
        std::max(state.primal_residual / primal_tol, state.dual_residual / dual_tol);

    TraceRecord record{state.iteration, state.z, state.primal_residual,
                       state.dual_residual, state.rho};
    if (config.trace) WriteTraceLine(*config.trace, record);
    if (config.record_history) result.history.push_back(std::move(record));

    if (score < best_score) {
      best_score = score;
      best = state;
    }
    if (score <= 1.0) {
      converged = true;
      break;
    }
    if (config.adaptive_rho && state.iteration <= kAdaptiveRhoIterations) {
      if (state.primal_residual > 10.0 * state.dual_residual) {
        state.rho *= 2.0;
      } else if (state.dual_residual > 10.0 * state.primal_residual) {
        state.rho /= 2.0;
      }
    }
  }

  const ConsensusState& final_state = converged ? state : best;
  result.plan = SupplyPlan::ClampedFrom(final_state.z);
  result.iterations = state.iteration;
  result.primal_residual = final_state.primal_residual;
  result.dual_residual = final_state.dual_residual;
  result.converged = converged;
  result.final_state = final_state;
  return result;
}

ConsensusResult RunConsensus(std::span<Agent* const> agents,
                             const ConsensusConfig& config) {
  InProcessPool pool(std::vector<Agent*>(agents.begin(), agents.end()));
  ConsensusResult result = RunConsensus(pool, config);
  for (Agent* a : agents) result.utilities.push_back(a->Utility(result.plan));
  return result;
}

const ConsensusResult& RequireConverged(const ConsensusResult& result) {
  if (!result.converged) {
    throw NonConvergenceError(
        "consensus did not converge in " + std::to_string(result.iterations) +
        " iterations (r_p=" + std::to_string(result.primal_residual) +
        ", r_d=" + std::to_string(result.dual_residual) + ")");
  }
  return result;
}

}  // namespace coplan
