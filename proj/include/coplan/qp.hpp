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

#ifndef COPLAN_QP_HPP_
#define COPLAN_QP_HPP_

#include <vector>

#include <Eigen/Dense>

namespace coplan {

// minimize 1/2 y'Hy + f'y  subject to  A y <= b.
struct QpProblem {
  Eigen::MatrixXd H;
  Eigen::VectorXd f;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
};

struct QpResult {
  Eigen::VectorXd y;
  std::vector<int> active;  // indices into the rows of A
  Eigen::VectorXd multipliers;  // one per active row, all >= 0
  int iterations = 0;
};

// Primal active-set method. `start` must be feasible and `working` a set of
// linearly independent rows that are tight at `start`. H must be positive
// definite on the null space of every working set the iteration visits
// (positive semidefinite H is fine when the working set pins the flat
// directions). Throws NonConvergenceError past the iteration cap.
QpResult SolveActiveSetQp(const QpProblem& qp, Eigen::VectorXd start,
                          std::vector<int> working, int max_iterations = 500);

}  // namespace coplan

#endif  // COPLAN_QP_HPP_
