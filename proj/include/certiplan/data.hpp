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
#include <filesystem>
#include <string>

#include "certiplan/csv.hpp"
#include "certiplan/error.hpp"
#include "certiplan/lti.hpp"
#include "certiplan/rng.hpp"

namespace certiplan {

/// One excitation experiment arranged as data matrices. Column j of X1 is the
/// one-step successor of column j of X0 under input column j of U0, and Y0
/// holds the measured outputs. All downstream synthesis works from these
/// matrices; the generating model is never consulted again.
struct DataRecord {
  Eigen::MatrixXd U0;  // m x N
  Eigen::MatrixXd X0;  // n x N
  Eigen::MatrixXd X1;  // n x N
  Eigen::MatrixXd Y0;  // 2 x N
  int n = 0;
  int m = 0;
  int N = 0;
};

/// Equilibrium pair holding the system at output reference r.
struct SteadyStatePair {
  Eigen::VectorXd x_bar;
  Eigen::VectorXd u_bar;
  Eigen::Vector2d r;
};

/// Run an excitation experiment: N steps from x0 with inputs drawn uniformly
/// from [-amplitude, amplitude]^m, recorded as data matrices.
inline DataRecord collect_trajectory(const LtiModel& model,
                                     const Eigen::VectorXd& x0, int N, Rng& rng,
                                     double amplitude = 1.0) {
  const int n = model.n();
  const int m = model.m();
  require(N >= m + n, ErrorCode::InsufficientData,
          "need at least m+n samples, got " + std::to_string(N));
  require(x0.size() == n, ErrorCode::DimensionMismatch, "x0 length mismatch");

  DataRecord rec;
  rec.n = n;
  rec.m = m;
  rec.N = N;
  rec.U0.resize(m, N);
  rec.X0.resize(n, N);
  rec.X1.resize(n, N);
  rec.Y0.resize(2, N);

  Eigen::VectorXd x = x0;
  for (int k = 0; k < N; ++k) {
    Eigen::VectorXd u(m);
    for (int j = 0; j < m; ++j) u(j) = rng.uniform(-amplitude, amplitude);
    rec.U0.col(k) = u;
    rec.X0.col(k) = x;
    rec.Y0.col(k) = model.C * x;
    x = step(model, x, u);
    rec.X1.col(k) = x;
  }
  return rec;
}

/// Rank of the stacked matrix [U0; X0] by singular values, with the
/// persistent-excitation flag rank == m + n.
inline std::pair<int, bool> excitation_rank(const DataRecord& rec) {
  Eigen::MatrixXd stacked(rec.m + rec.n, rec.N);
  stacked.topRows(rec.m) = rec.U0;
  stacked.bottomRows(rec.n) = rec.X0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(stacked);
  const Eigen::VectorXd sv = svd.singularValues();
  const double smax = sv.size() > 0 ? sv(0) : 0.0;
  const double threshold =
      static_cast<double>(std::max(rec.m + rec.n, rec.N)) * smax * 1e-12;
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > threshold) ++rank;
  return {rank, rank == rec.m + rec.n};
}

namespace detail {

/// Minimum-norm right inverse of [U0; X0], computed once and partitioned as
/// [Gu Gx] with U0 Gu = I, X0 Gu = 0, U0 Gx = 0, X0 Gx = I.
inline Eigen::MatrixXd stacked_pseudoinverse(const DataRecord& rec) {
  Eigen::MatrixXd stacked(rec.m + rec.n, rec.N);
  stacked.topRows(rec.m) = rec.U0;
  stacked.bottomRows(rec.n) = rec.X0;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(stacked);
  return cod.pseudoInverse();
}

}  // namespace detail

/// Reconstruct the discrete dynamics from data: with [Gu Gx] the right
/// inverse of [U0; X0], exact data give X1 Gx = A and X1 Gu = B. Returned as
/// the pair (A, B).
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> reconstruct_dynamics(
    const DataRecord& rec) {
  const Eigen::MatrixXd pinv = detail::stacked_pseudoinverse(rec);
  return {rec.X1 * pinv.rightCols(rec.n), rec.X1 * pinv.leftCols(rec.m)};
}

/// Minimum-norm solution G of [U0; X0] G = [[K, I_m], [I_n, 0]]. The first n
/// columns G1 reproduce the closed loop (X1 G1 = A + B K on exact data) and
/// the last m columns G2 isolate the input direction (X1 G2 = B).
inline Eigen::MatrixXd right_inverse_g(const DataRecord& rec,
                                       const Eigen::MatrixXd& K) {
  require(K.rows() == rec.m && K.cols() == rec.n, ErrorCode::DimensionMismatch,
          "gain must be m x n");
  auto [rank, pe] = excitation_rank(rec);
  require(pe, ErrorCode::RankDeficient,
          "data is not persistently exciting (rank " + std::to_string(rank) +
              " of " + std::to_string(rec.m + rec.n) + ")");

  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(rec.m + rec.n, rec.n + rec.m);
  rhs.topLeftCorner(rec.m, rec.n) = K;
  rhs.topRightCorner(rec.m, rec.m) = Eigen::MatrixXd::Identity(rec.m, rec.m);
  rhs.bottomLeftCorner(rec.n, rec.n) = Eigen::MatrixXd::Identity(rec.n, rec.n);

  const Eigen::MatrixXd pinv = detail::stacked_pseudoinverse(rec);
  Eigen::MatrixXd G = pinv * rhs;

  Eigen::MatrixXd stacked(rec.m + rec.n, rec.N);
  stacked.topRows(rec.m) = rec.U0;
  stacked.bottomRows(rec.n) = rec.X0;
  const double residual = (stacked * G - rhs).norm();
  require(residual <= 1e-10 * std::max(1.0, rhs.norm()), ErrorCode::Numerical,
          "right inverse residual " + std::to_string(residual));
  return G;
}

/// Data-driven steady-state map. With G1, G2 from the K = 0 right inverse,
///
///   T = [ X1 (I - G2 U0) G1 - I_n   X1 G2 ]
///       [ Y0 G1                     0     ]
///
/// The data product X1 (I - G2 U0) G1 realizes the state transition itself,
/// so the identity is subtracted to express the equilibrium condition
/// (A - I) x + B u = 0 purely from data.
inline Eigen::MatrixXd steady_state_map(const DataRecord& rec) {
  const Eigen::MatrixXd G =
      right_inverse_g(rec, Eigen::MatrixXd::Zero(rec.m, rec.n));
  const Eigen::MatrixXd G1 = G.leftCols(rec.n);
  const Eigen::MatrixXd G2 = G.rightCols(rec.m);

  const Eigen::MatrixXd A_data =
      rec.X1 * (Eigen::MatrixXd::Identity(rec.N, rec.N) - G2 * rec.U0) * G1;
  const Eigen::MatrixXd B_data = rec.X1 * G2;
  const Eigen::MatrixXd C_data = rec.Y0 * G1;

  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(rec.n + 2, rec.n + rec.m);
  T.topLeftCorner(rec.n, rec.n) =
      A_data - Eigen::MatrixXd::Identity(rec.n, rec.n);
  T.topRightCorner(rec.n, rec.m) = B_data;
  T.bottomLeftCorner(2, rec.n) = C_data;
  return T;
}

/// Solve [x_bar; u_bar] = T^{-1} [0; r] for the equilibrium tracking r.
inline SteadyStatePair steady_state(const Eigen::MatrixXd& T_hat,
                                    const Eigen::Vector2d& r) {
  require(T_hat.rows() == T_hat.cols(), ErrorCode::SingularMap,
          "steady-state map must be square (m = 2 inputs required)");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(T_hat, Eigen::ComputeThinU |
                                                   Eigen::ComputeThinV);
  const Eigen::VectorXd sv = svd.singularValues();
  const double cond =
      sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : 1e300;
  require(cond < 1e12, ErrorCode::SingularMap,
          "steady-state map is numerically singular (cond " +
              std::to_string(cond) + ")");

  const int n = static_cast<int>(T_hat.rows()) - 2;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(T_hat.rows());
  rhs.tail(2) = r;
  const Eigen::VectorXd sol = svd.solve(rhs);

  SteadyStatePair ss;
  ss.x_bar = sol.head(n);
  ss.u_bar = sol.tail(T_hat.cols() - n);
  ss.r = r;
  return ss;
}

/// Save the four data matrices as a CSV bundle, one file per matrix.
inline void save_data_record(const DataRecord& rec, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_matrix_csv(dir + "/u0.csv", rec.U0);
  write_matrix_csv(dir + "/x0.csv", rec.X0);
  write_matrix_csv(dir + "/x1.csv", rec.X1);
  write_matrix_csv(dir + "/y0.csv", rec.Y0);
}

inline DataRecord load_data_record(const std::string& dir) {
  DataRecord rec;
  rec.U0 = read_matrix_csv(dir + "/u0.csv");
  rec.X0 = read_matrix_csv(dir + "/x0.csv");
  rec.X1 = read_matrix_csv(dir + "/x1.csv");
  rec.Y0 = read_matrix_csv(dir + "/y0.csv");
  rec.m = static_cast<int>(rec.U0.rows());
  rec.n = static_cast<int>(rec.X0.rows());
  rec.N = static_cast<int>(rec.U0.cols());
  require(rec.X0.cols() == rec.N && rec.X1.cols() == rec.N &&
              rec.Y0.cols() == rec.N && rec.X1.rows() == rec.n &&
              rec.Y0.rows() == 2,
          ErrorCode::Io, "inconsistent data bundle in " + dir);
  return rec;
}

}  // namespace certiplan
