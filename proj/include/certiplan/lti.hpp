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
#include <unsupported/Eigen/MatrixFunctions>

#include "certiplan/error.hpp"

namespace certiplan {

/// Continuous-time dynamics x' = Ac x + Bc u with planar position output C x.
struct ContinuousModel {
  Eigen::MatrixXd Ac;
  Eigen::MatrixXd Bc;
  Eigen::MatrixXd C;
};

/// Discrete-time dynamics x(k+1) = A x(k) + B u(k), y = C x, sampled at Ts.
///
/// The ground-truth matrices are used only by the simulator and by test
/// oracles. Planning and certificate synthesis consume trajectory data alone.
struct LtiModel {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Eigen::MatrixXd C;
  double Ts = 0.0;

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B.cols()); }
};

/// Exact zero-order-hold discretization through the augmented matrix
/// exponential exp([[Ac, Bc], [0, 0]] Ts).
inline LtiModel discretize_zoh(const ContinuousModel& cm, double Ts) {
  require(Ts > 0.0, ErrorCode::InvalidModel, "sampling period must be positive");
  const int n = static_cast<int>(cm.Ac.rows());
  const int m = static_cast<int>(cm.Bc.cols());
  require(cm.Ac.cols() == n && cm.Bc.rows() == n, ErrorCode::InvalidModel,
          "continuous model dimensions are inconsistent");
  require(cm.C.cols() == n, ErrorCode::InvalidModel,
          "output matrix column count must match the state dimension");
  require(cm.Ac.allFinite() && cm.Bc.allFinite() && cm.C.allFinite(),
          ErrorCode::InvalidModel, "continuous model has non-finite entries");

  Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n + m, n + m);
  aug.topLeftCorner(n, n) = cm.Ac;
  aug.topRightCorner(n, m) = cm.Bc;
  const Eigen::MatrixXd phi = (aug * Ts).exp();

  LtiModel model;
  model.A = phi.topLeftCorner(n, n);
  model.B = phi.topRightCorner(n, m);
  model.C = cm.C;
  model.Ts = Ts;
  require(model.A.allFinite() && model.B.allFinite(), ErrorCode::InvalidModel,
          "discretization produced non-finite entries");
  return model;
}

/// One simulation step x(k+1) = A x + B u.
inline Eigen::VectorXd step(const LtiModel& model, const Eigen::VectorXd& x,
                            const Eigen::VectorXd& u) {
  require(x.size() == model.A.rows(), ErrorCode::DimensionMismatch,
          "state vector length does not match the model");
  require(u.size() == model.B.cols(), ErrorCode::DimensionMismatch,
          "input vector length does not match the model");
  return model.A * x + model.B * u;
}

/// In-plane Clohessy-Wiltshire relative motion about a circular reference
/// orbit with mean motion r. States are (z1, z2, z1', z2'), inputs are the
/// two in-plane thrust accelerations, and the output selects the positions.
///
///   z1'' = 3 r^2 z1 + 2 r z2' + v1
///   z2'' = -2 r z1' + v2
inline ContinuousModel cw_inplane_model(double r) {
  require(r > 0.0, ErrorCode::InvalidModel, "mean motion must be positive");
  ContinuousModel cm;
  cm.Ac = Eigen::MatrixXd::Zero(4, 4);
  cm.Ac(0, 2) = 1.0;
  cm.Ac(1, 3) = 1.0;
  cm.Ac(2, 0) = 3.0 * r * r;
  cm.Ac(2, 3) = 2.0 * r;
  cm.Ac(3, 2) = -2.0 * r;
  cm.Bc = Eigen::MatrixXd::Zero(4, 2);
  cm.Bc(2, 0) = 1.0;
  cm.Bc(3, 1) = 1.0;
  cm.C = Eigen::MatrixXd::Zero(2, 4);
  cm.C(0, 0) = 1.0;
  cm.C(1, 1) = 1.0;
  return cm;
}

/// Two independent double-integrator axes (the r -> 0 limit of the in-plane
/// relative motion model). Useful as a small well-conditioned test system.
inline ContinuousModel double_integrator_2d() {
  ContinuousModel cm;
  cm.Ac = Eigen::MatrixXd::Zero(4, 4);
  cm.Ac(0, 2) = 1.0;
  cm.Ac(1, 3) = 1.0;
  cm.Bc = Eigen::MatrixXd::Zero(4, 2);
  cm.Bc(2, 0) = 1.0;
  cm.Bc(3, 1) = 1.0;
  cm.C = Eigen::MatrixXd::Zero(2, 4);
  cm.C(0, 0) = 1.0;
  cm.C(1, 1) = 1.0;
  return cm;
}

}  // namespace certiplan
