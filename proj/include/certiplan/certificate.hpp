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

#include "certiplan/data.hpp"
#include "certiplan/error.hpp"
#include "certiplan/polytope.hpp"
#include "certiplan/rng.hpp"

namespace certiplan {

/// Per-edge safety object: a lambda-contractive ellipsoid E = { e : e' P^-1 e <= 1 }
/// in error coordinates, its data-driven feedback gain, and the half-space set
/// it was certified against. The lifted variable S ties the closed loop to the
/// data matrices (X0 S = P, closed-loop transition X1 S P^-1), and G2 carries
/// the input-direction factor used by the equality constraints.
struct Certificate {
  Eigen::MatrixXd P;             // n x n, symmetric positive definite
  Eigen::MatrixXd S;             // N x n
  Eigen::MatrixXd K;             // m x n
  Eigen::MatrixXd G2;            // N x m
  double lambda = 0.0;           // contraction factor in (0, 1]
  Eigen::VectorXd center_state;  // equilibrium x_bar the errors are taken from
  Eigen::Vector2d center_output; // output-space center of the ellipsoid
  Polytope polytope;             // admissible set in error coordinates
};

/// Output-space ellipsoid { y : (y - center)' Pproj^-1 (y - center) <= 1 }.
struct OutputEllipsoid {
  Eigen::Matrix2d Pproj;
  Eigen::Vector2d center;
};

/// Central cross-section of the state ellipsoid in output space, defined by
/// Pproj^-1 = C P^-1 C'.
inline OutputEllipsoid project_ellipsoid(const Certificate& cert,
                                         const Eigen::MatrixXd& C) {
  require(C.rows() == 2 && C.cols() == cert.P.rows(),
          ErrorCode::DimensionMismatch, "output matrix must be 2 x n");
  const Eigen::MatrixXd Pinv = cert.P.ldlt().solve(
      Eigen::MatrixXd::Identity(cert.P.rows(), cert.P.cols()));
  const Eigen::Matrix2d proj_inv = C * Pinv * C.transpose();
  Eigen::FullPivLU<Eigen::Matrix2d> lu(proj_inv);
  require(lu.isInvertible(), ErrorCode::SingularMap,
          "projected ellipsoid is degenerate");
  OutputEllipsoid e;
  e.Pproj = lu.inverse();
  e.center = cert.center_output;
  return e;
}

inline bool contains(const OutputEllipsoid& e, const Eigen::Vector2d& y) {
  const Eigen::Vector2d d = y - e.center;
  const Eigen::Matrix2d proj_inv = e.Pproj.inverse();
  return d.dot(proj_inv * d) <= 1.0;
}

/// Membership value (y - center)' Pproj^-1 (y - center); <= 1 means inside.
inline double membership(const OutputEllipsoid& e, const Eigen::Vector2d& y) {
  const Eigen::Vector2d d = y - e.center;
  return d.dot(e.Pproj.inverse() * d);
}

/// Independent check of everything a certificate claims. Solver output is
/// never trusted raw: every certificate stored in the system must pass.
struct VerificationReport {
  double contraction_min_eig = 0.0;  // min eig of lambda P - S'X1' P^-1 X1 S
  double facet_worst = 0.0;          // max over facets of F P F' - g^2
  double residual_x0s_p = 0.0;       // || X0 S - P ||_F
  double residual_x0g2 = 0.0;        // || X0 G2 ||_F
  double residual_u0g2 = 0.0;        // || U0 G2 - I ||_F
  bool contraction_ok = false;
  bool facets_ok = false;
  bool equalities_ok = false;
  bool pass = false;
};

inline VerificationReport verify_certificate(const Certificate& cert,
                                             const DataRecord& rec,
                                             double eps = 1e-6) {
  VerificationReport rep;
  const int n = rec.n;
  const Eigen::MatrixXd Pinv =
      cert.P.ldlt().solve(Eigen::MatrixXd::Identity(n, n));
  const Eigen::MatrixXd X1S = rec.X1 * cert.S;
  const Eigen::MatrixXd contraction =
      cert.lambda * cert.P - X1S.transpose() * Pinv * X1S;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
      0.5 * (contraction + contraction.transpose()));
  rep.contraction_min_eig = eig.eigenvalues().minCoeff();
  rep.contraction_ok =
      rep.contraction_min_eig >= -eps * cert.P.trace() / static_cast<double>(n);

  rep.facet_worst = -1e300;
  for (int r = 0; r < cert.polytope.q(); ++r) {
    const Eigen::RowVectorXd f = cert.polytope.F.row(r);
    const double slack =
        (f * cert.P * f.transpose())(0, 0) -
        cert.polytope.g(r) * cert.polytope.g(r);
    rep.facet_worst = std::max(rep.facet_worst, slack);
  }
  rep.facets_ok = rep.facet_worst <= eps;

  const double scale = std::max(1.0, cert.P.norm());
  rep.residual_x0s_p = (rec.X0 * cert.S - cert.P).norm();
  rep.residual_x0g2 = (rec.X0 * cert.G2).norm();
  rep.residual_u0g2 =
      (rec.U0 * cert.G2 - Eigen::MatrixXd::Identity(rec.m, rec.m)).norm();
  rep.equalities_ok = rep.residual_x0s_p <= eps * scale &&
                      rep.residual_x0g2 <= eps * scale &&
                      rep.residual_u0g2 <= eps * scale;

  rep.pass = rep.contraction_ok && rep.facets_ok && rep.equalities_ok;
  return rep;
}

/// Empirical contraction probe: propagates sampled boundary points of the
/// ellipsoid through the data-reconstructed closed loop X1 S P^-1 and returns
/// the worst one-step quadratic-form value. A verified certificate must stay
/// at or below lambda up to rounding.
inline double sampled_invariance_check(const Certificate& cert,
                                       const DataRecord& rec, int samples,
                                       Rng& rng) {
  const int n = rec.n;
  const Eigen::MatrixXd Pinv =
      cert.P.ldlt().solve(Eigen::MatrixXd::Identity(n, n));
  const Eigen::MatrixXd propagate = rec.X1 * cert.S * Pinv;
  Eigen::LLT<Eigen::MatrixXd> llt(cert.P);
  require(llt.info() == Eigen::Success, ErrorCode::Precondition,
          "certificate shape matrix is not positive definite");
  const Eigen::MatrixXd L = llt.matrixL();

  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    Eigen::VectorXd z(n);
    for (int i = 0; i < n; ++i) z(i) = rng.gaussian();
    const double norm = z.norm();
    if (norm == 0.0) continue;
    const Eigen::VectorXd e = L * (z / norm);  // boundary point e'P^-1 e = 1
    const Eigen::VectorXd e_next = propagate * e;
    worst = std::max(worst, e_next.dot(Pinv * e_next));
  }
  return worst;
}

}  // namespace certiplan
