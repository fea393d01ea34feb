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

#include "coplan/qp.hpp"

#include <algorithm>
#include <cmath>

#include "coplan/errors.hpp"

namespace coplan {

QpResult SolveActiveSetQp(const QpProblem& qp, Eigen::VectorXd start,
                          std::vector<int> working, int max_iterations) {
  const Eigen::Index n = qp.H.rows();
  const Eigen::Index m = qp.A.rows();
  Eigen::VectorXd y = std::move(start);
  std::vector<bool> in_working(static_cast<std::size_t>(m), false);
  for (int i : working) in_working[static_cast<std::size_t>(i)] = true;

  const double scale = 1.0 + qp.H.cwiseAbs().maxCoeff() + qp.f.cwiseAbs().maxCoeff();

  for (int iter = 1; iter <= max_iterations; ++iter) {
    const Eigen::Index w = static_cast<Eigen::Index>(working.size());
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + w, n + w);
    kkt.topLeftCorner(n, n) = qp.H;
    for (Eigen::Index k = 0; k < w; ++k) {
      const auto row = qp.A.row(working[static_cast<std::size_t>(k)]);
      kkt.block(n + k, 0, 1, n) = row;
      kkt.block(0, n + k, n, 1) = row.transpose();
    }
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + w);
    rhs.head(n) = -(qp.H * y + qp.f);
    const Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);
    const Eigen::VectorXd p = sol.head(n);
    const Eigen::VectorXd lambda = sol.tail(w);

    const double step_tol = 1e-12 * (1.0 + y.cwiseAbs().maxCoeff());
    if (p.cwiseAbs().maxCoeff() <= step_tol) {
      Eigen::Index drop = -1;
      double most_negative = -1e-10 * scale;
      for (Eigen::Index k = 0; k < w; ++k) {
        if (lambda[k] < most_negative) {
          most_negative = lambda[k];
          drop = k;
        }
      }
      if (drop < 0) {
        QpResult result;
        result.y = y;
        result.active = working;
        result.multipliers = lambda.cwiseMax(0.0);
        result.iterations = iter;
        return result;
      }
      in_working[static_cast<std::size_t>(working[static_cast<std::size_t>(drop)])] = false;
      working.erase(working.begin() + drop);
      continue;
    }

    double alpha = 1.0;
    int blocking = -1;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (in_working[static_cast<std::size_t>(i)]) continue;
      const double ap = qp.A.row(i).dot(p);
      if (ap <= 1e-14 * (1.0 + qp.A.row(i).cwiseAbs().maxCoeff())) continue;
      const double slack = std::max(0.0, qp.b[i] - qp.A.row(i).dot(y));
      const double step = slack / ap;
      if (step < alpha) {
        alpha = step;
        blocking = static_cast<int>(i);
      }
    }
    y += alpha * p;
    if (blocking >= 0) {
      working.push_back(blocking);
      in_working[static_cast<std::size_t>(blocking)] = true;
    }
  }
  throw NonConvergenceError("active-set QP exceeded iteration cap");
}

}  // namespace coplan
