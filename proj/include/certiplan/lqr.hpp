// Copyright 2026 The certiplan Authors
//
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

#pragma once

#include <Eigen/Dense>

#include "certiplan/error.hpp"

namespace certiplan {

struct LqrWeights {
  Eigen::MatrixXd Q;
  Eigen::MatrixXd R;
};

/// Fixed point of the discrete Riccati recursion
///   P <- Q + A' (P - P B (R + B'PB)^-1 B'P) A
/// iterated until the relative update drops below 1e-10.
inline Eigen::MatrixXd dare_solve(const Eigen::MatrixXd& A,
                                  const Eigen::MatrixXd& B,
                                  const Eigen::MatrixXd& Q,
                                  const Eigen::MatrixXd& R,
                                  int max_iters = 10000) {
  const int n = static_cast<int>(A.rows());
  require(A.cols() == n && B.rows() == n, ErrorCode::DimensionMismatch,
          "system matrices are inconsistent");
  require(Q.rows() == n && Q.cols() == n && R.rows() == B.cols() &&
              R.cols() == B.cols(),
          ErrorCode::DimensionMismatch, "weight dimensions are inconsistent");

  Eigen::MatrixXd P = Q;
  for (int it = 0; it < max_iters; ++it) {
    const Eigen::MatrixXd BtP = B.transpose() * P;
    const Eigen::MatrixXd gain_denom = R + BtP * B;
    const Eigen::MatrixXd next =
        Q + A.transpose() *
                (P - BtP.transpose() * gain_denom.ldlt().solve(BtP)) * A;
    const double delta = (next - P).norm() / std::max(1.0, next.norm());
    P = 0.5 * (next + next.transpose());
    if (delta <= 1e-10) return P;
  }
  throw Error(ErrorCode::Numerical,
              "Riccati recursion did not converge in " +
                  std::to_string(max_iters) + " iterations");
}

/// Infinite-horizon regulator gain K = -(R + B'PB)^-1 B'PA for the Riccati
/// fixed point P.
inline Eigen::MatrixXd lqr_gain(const Eigen::MatrixXd& A,
                                const Eigen::MatrixXd& B,
                                const Eigen::MatrixXd& Q,
                                const Eigen::MatrixXd& R) {
  const Eigen::MatrixXd P = dare_solve(A, B, Q, R);
  const Eigen::MatrixXd denom = R + B.transpose() * P * B;
  return -denom.ldlt().solve(B.transpose() * P * A);
}

inline Eigen::MatrixXd lqr_gain(const Eigen::MatrixXd& A,
                                const Eigen::MatrixXd& B,
                                const LqrWeights& weights) {
  return lqr_gain(A, B, weights.Q, weights.R);
}

inline double spectral_radius(const Eigen::MatrixXd& M) {
  return M.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace certiplan
