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
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "certiplan/certificate.hpp"
#include "certiplan/data.hpp"
#include "certiplan/error.hpp"
#include "certiplan/lqr.hpp"
#include "certiplan/polytope.hpp"

namespace certiplan {

/// Declarative statement of the certificate program over the full variable
/// set (P symmetric n x n, S in R^{N x n}, G2 in R^{N x m}):
///
///   maximize    log det P
///   subject to  [ P      X1 S ]
///               [ S'X1'  lambda P ]  >= 0
///               [ P      P F_r' ]
///               [ F_r P  g_r^2  ]    >= 0   for every facet r
///               X0 S = P,  X0 G2 = 0,  U0 G2 = I_m
///
/// The struct records the variable counts and cone block shapes so the
/// program can be audited independently of how it is solved.
struct ConicProblemDescription {
  int n = 0;
  int m = 0;
  int N = 0;
  int q = 0;
  double lambda = 0.0;

  int p_vars = 0;             // n(n+1)/2 free entries of symmetric P
  int s_vars = 0;             // N * n
  int g2_vars = 0;            // N * m
  int total_vars = 0;

  int contraction_block_dim = 0;      // 2n
  int facet_block_dim = 0;            // n + 1, one block per facet
  Eigen::VectorXd facet_corners;      // the g_r^2 literals in the facet blocks

  Eigen::MatrixXd U0, X0, X1;
  Polytope polytope;
};

inline ConicProblemDescription build_sdp(const DataRecord& rec,
                                         const Polytope& poly, double lambda) {
  require(lambda > 0.0 && lambda < 1.0, ErrorCode::Precondition,
          "contraction factor must lie in (0, 1)");
  require(poly.d() == rec.n, ErrorCode::DimensionMismatch,
          "polytope facets must have the state dimension");
  for (Eigen::Index r = 0; r < poly.g.size(); ++r)
    require(poly.g(r) > 0.0, ErrorCode::Precondition,
            "facet bounds must be strictly positive");
  auto [rank, pe] = excitation_rank(rec);
  require(pe, ErrorCode::RankDeficient,
          "data is not persistently exciting (rank " + std::to_string(rank) +
              ")");

  ConicProblemDescription d;
  d.n = rec.n;
  d.m = rec.m;
  d.N = rec.N;
  d.q = poly.q();
  d.lambda = lambda;
  d.p_vars = rec.n * (rec.n + 1) / 2;
  d.s_vars = rec.N * rec.n;
  d.g2_vars = rec.N * rec.m;
  d.total_vars = d.p_vars + d.s_vars + d.g2_vars;
  d.contraction_block_dim = 2 * rec.n;
  d.facet_block_dim = rec.n + 1;
  d.facet_corners = poly.g.array().square();
  d.U0 = rec.U0;
  d.X0 = rec.X0;
  d.X1 = rec.X1;
  d.polytope = poly;
  return d;
}

enum class SolveStatus { Feasible, Infeasible, SolverError };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Feasible: return "feasible";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::SolverError: return "solver-error";
  }
  return "unknown";
}

struct CertificateSolve {
  SolveStatus status = SolveStatus::SolverError;
  Certificate cert;        // meaningful only when status == Feasible
  int newton_iterations = 0;
  double barrier_gap = 0.0;
  std::string message;
};

namespace detail {

/// Reduced coordinates for the certificate program. The equality constraints
/// pin S to the affine family S = Gu Y + Gx P (with Y = U0 S) built from the
/// minimum-norm right inverse [Gu Gx] of [U0; X0]; any remaining null-space
/// component of S is annihilated by X1 on exact data, so nothing is lost by
/// dropping it. What remains is a strictly convex log-det barrier problem in
/// the n(n+1)/2 entries of P and the m*n entries of Y.
struct ReducedCertificateProblem {
  int n = 0;
  int m = 0;
  int q = 0;
  double lambda = 0.0;
  Eigen::MatrixXd Ad;  // X1 Gx, the data realization of the open-loop map
  Eigen::MatrixXd Bd;  // X1 Gu, the data realization of the input map
  Eigen::MatrixXd Gu;  // N x m
  Eigen::MatrixXd Gx;  // N x n
  Eigen::MatrixXd F;   // q x n
  Eigen::VectorXd g2;  // squared facet bounds

  int np() const { return n * (n + 1) / 2; }
  int ny() const { return m * n; }
  int dim() const { return np() + ny(); }

  Eigen::MatrixXd unpack_p(const Eigen::VectorXd& theta) const {
    Eigen::MatrixXd P(n, n);
    int k = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        P(i, j) = theta(k);
        P(j, i) = theta(k);
        ++k;
      }
    return P;
  }

  Eigen::MatrixXd unpack_y(const Eigen::VectorXd& theta) const {
    Eigen::MatrixXd Y(m, n);
    int k = np();
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < n; ++c) Y(r, c) = theta(k++);
    return Y;
  }

  Eigen::VectorXd pack(const Eigen::MatrixXd& P, const Eigen::MatrixXd& Y) const {
    Eigen::VectorXd theta(dim());
    int k = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) theta(k++) = P(i, j);
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < n; ++c) theta(k++) = Y(r, c);
    return theta;
  }

  Eigen::MatrixXd contraction_block(const Eigen::MatrixXd& P,
                                    const Eigen::MatrixXd& Y) const {
    const Eigen::MatrixXd T = Ad * P + Bd * Y;
    Eigen::MatrixXd M(2 * n, 2 * n);
    M.topLeftCorner(n, n) = P;
    M.topRightCorner(n, n) = T;
    M.bottomLeftCorner(n, n) = T.transpose();
    M.bottomRightCorner(n, n) = lambda * P;
    return M;
  }

  Eigen::VectorXd facet_slacks(const Eigen::MatrixXd& P) const {
    Eigen::VectorXd s(q);
    for (int r = 0; r < q; ++r) {
      const Eigen::RowVectorXd f = F.row(r);
      s(r) = g2(r) - (f * P * f.transpose())(0, 0);
    }
    return s;
  }
};

struct BarrierState {
  Eigen::MatrixXd P, Y, M;
  Eigen::LLT<Eigen::MatrixXd> llt_p, llt_m;
  Eigen::VectorXd slacks;
  bool feasible = false;
  double phi = 0.0;  // t-weighted barrier value
};

inline double logdet_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  const Eigen::MatrixXd L = llt.matrixL();
  double v = 0.0;
  for (Eigen::Index i = 0; i < L.rows(); ++i) v += std::log(L(i, i));
  return 2.0 * v;
}

inline BarrierState evaluate_barrier(const ReducedCertificateProblem& prob,
                                     const Eigen::VectorXd& theta, double t) {
  BarrierState st;
  st.P = prob.unpack_p(theta);
  st.Y = prob.unpack_y(theta);
  st.llt_p.compute(st.P);
  if (st.llt_p.info() != Eigen::Success) return st;
  st.M = prob.contraction_block(st.P, st.Y);
  st.llt_m.compute(st.M);
  if (st.llt_m.info() != Eigen::Success) return st;
  st.slacks = prob.facet_slacks(st.P);
  if ((st.slacks.array() <= 0.0).any()) return st;
  st.feasible = true;
  st.phi = -t * logdet_from_llt(st.llt_p) - logdet_from_llt(st.llt_m) -
           st.slacks.array().log().sum();
  return st;
}

/// Gradient and Hessian of the barrier at a strictly feasible point. The
/// parameter dimension is tiny (n(n+1)/2 + mn), so dense assembly from the
/// basis directions is both simple and fast.
inline void barrier_derivatives(const ReducedCertificateProblem& prob,
                                const BarrierState& st, double t,
                                Eigen::VectorXd& grad, Eigen::MatrixXd& hess) {
  const int n = prob.n;
  const int np = prob.np();
  const int dim = prob.dim();
  const Eigen::MatrixXd Pinv =
      st.llt_p.solve(Eigen::MatrixXd::Identity(n, n));
  const Eigen::MatrixXd Minv =
      st.llt_m.solve(Eigen::MatrixXd::Identity(2 * n, 2 * n));

  // Directional derivative matrices for every parameter.
  std::vector<Eigen::MatrixXd> dM(dim);
  std::vector<Eigen::MatrixXd> dP(np);
  {
    int k = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        Eigen::MatrixXd E = Eigen::MatrixXd::Zero(n, n);
        E(i, j) = 1.0;
        E(j, i) = 1.0;
        dP[k] = E;
        const Eigen::MatrixXd AdE = prob.Ad * E;
        Eigen::MatrixXd D = Eigen::MatrixXd::Zero(2 * n, 2 * n);
        D.topLeftCorner(n, n) = E;
        D.topRightCorner(n, n) = AdE;
        D.bottomLeftCorner(n, n) = AdE.transpose();
        D.bottomRightCorner(n, n) = prob.lambda * E;
        dM[k] = D;
        ++k;
      }
    for (int r = 0; r < prob.m; ++r)
      for (int c = 0; c < n; ++c) {
        Eigen::MatrixXd D = Eigen::MatrixXd::Zero(2 * n, 2 * n);
        Eigen::MatrixXd BU = Eigen::MatrixXd::Zero(n, n);
        BU.col(c) = prob.Bd.col(r);
        D.topRightCorner(n, n) = BU;
        D.bottomLeftCorner(n, n) = BU.transpose();
        dM[k] = D;
        ++k;
      }
  }

  // Facet sensitivities c_{rk} = F_r dP_k F_r'.
  Eigen::MatrixXd fc = Eigen::MatrixXd::Zero(prob.q, np);
  for (int r = 0; r < prob.q; ++r) {
    const Eigen::RowVectorXd f = prob.F.row(r);
    int k = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        fc(r, k) = (i == j) ? f(i) * f(i) : 2.0 * f(i) * f(j);
        ++k;
      }
  }

  std::vector<Eigen::MatrixXd> WP(np), WM(dim);
  for (int k = 0; k < np; ++k) WP[k] = Pinv * dP[k];
  for (int k = 0; k < dim; ++k) WM[k] = Minv * dM[k];

  grad.setZero(dim);
  hess.setZero(dim, dim);
  for (int a = 0; a < dim; ++a) {
    double ga = -WM[a].trace();
    if (a < np) {
      ga -= t * WP[a].trace();
      for (int r = 0; r < prob.q; ++r) ga += fc(r, a) / st.slacks(r);
    }
    grad(a) = ga;
    for (int b = a; b < dim; ++b) {
      double h = (WM[a].array() * WM[b].transpose().array()).sum();
      if (a < np && b < np) {
        h += t * (WP[a].array() * WP[b].transpose().array()).sum();
        for (int r = 0; r < prob.q; ++r)
          h += fc(r, a) * fc(r, b) / (st.slacks(r) * st.slacks(r));
      }
      hess(a, b) = h;
      hess(b, a) = h;
    }
  }
}

/// Strictly feasible starting point. A stabilizing gain with closed-loop
/// spectral radius safely below sqrt(lambda) is found by a cheap-control
/// ladder, a Lyapunov shape for it is accumulated, and the result is scaled
/// until every facet holds with slack to spare.
inline bool feasible_start(const ReducedCertificateProblem& prob,
                           Eigen::MatrixXd& P0, Eigen::MatrixXd& Y0,
                           std::string& why) {
  const int n = prob.n;
  const double target = 0.9 * std::sqrt(prob.lambda);
  Eigen::MatrixXd Khat;
  bool found = false;
  for (double rho : {1.0, 1e-2, 1e-4, 1e-6}) {
    try {
      const Eigen::MatrixXd K =
          lqr_gain(prob.Ad, prob.Bd, Eigen::MatrixXd::Identity(n, n),
                   rho * Eigen::MatrixXd::Identity(prob.m, prob.m));
      if (spectral_radius(prob.Ad + prob.Bd * K) < target) {
        Khat = K;
        found = true;
        break;
      }
    } catch (const Error&) {
      // recursion failed at this weight; try a cheaper one
    }
  }
  if (!found) {
    why = "no gain with closed-loop spectral radius below 0.9 sqrt(lambda)";
    return false;
  }

  const Eigen::MatrixXd Acl = prob.Ad + prob.Bd * Khat;
  Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(n, n);
  for (int it = 0; it < 20000; ++it) {
    const Eigen::MatrixXd next =
        Eigen::MatrixXd::Identity(n, n) +
        (1.0 / prob.lambda) * Acl.transpose() * Q * Acl;
    const double delta = (next - Q).norm() / next.norm();
    Q = 0.5 * (next + next.transpose());
    if (delta <= 1e-14) break;
    if (!Q.allFinite()) {
      why = "Lyapunov accumulation diverged";
      return false;
    }
  }

  const Eigen::MatrixXd Qinv = Q.ldlt().solve(Eigen::MatrixXd::Identity(n, n));
  double c = 1e300;
  for (int r = 0; r < prob.q; ++r) {
    const Eigen::RowVectorXd f = prob.F.row(r);
    const double reach = (f * Qinv * f.transpose())(0, 0);
    if (reach > 0.0) c = std::min(c, prob.g2(r) / reach);
  }
  if (!(c > 0.0) || !std::isfinite(c)) {
    why = "facet scaling failed";
    return false;
  }
  P0 = 0.5 * c * Qinv;
  P0 = 0.5 * (P0 + P0.transpose());
  Y0 = Khat * P0;
  return true;
}

}  // namespace detail

/// Synthesize the largest-volume lambda-contractive certificate for the given
/// polytope by maximizing log det P along a barrier path. The returned
/// certificate has already passed the independent verifier at solver
/// tolerance; callers re-verify at their own tolerance.
inline CertificateSolve solve_certificate(const DataRecord& rec,
                                          const Polytope& poly, double lambda,
                                          const Eigen::VectorXd& center_state,
                                          const Eigen::Vector2d& center_output) {
  CertificateSolve out;
  const ConicProblemDescription desc = build_sdp(rec, poly, lambda);

  detail::ReducedCertificateProblem prob;
  prob.n = rec.n;
  prob.m = rec.m;
  prob.q = poly.q();
  prob.lambda = lambda;
  const Eigen::MatrixXd pinv = detail::stacked_pseudoinverse(rec);
  prob.Gu = pinv.leftCols(rec.m);
  prob.Gx = pinv.rightCols(rec.n);
  prob.Ad = rec.X1 * prob.Gx;
  prob.Bd = rec.X1 * prob.Gu;
  prob.F = poly.F;
  prob.g2 = desc.facet_corners;

  Eigen::MatrixXd P0, Y0;
  std::string why;
  if (!detail::feasible_start(prob, P0, Y0, why)) {
    out.status = SolveStatus::Infeasible;
    out.message = "no strictly feasible start: " + why;
    return out;
  }

  Eigen::VectorXd theta = prob.pack(P0, Y0);
  {
    // Guard against rounding at the constructed start.
    detail::BarrierState st = detail::evaluate_barrier(prob, theta, 1.0);
    int shrink = 0;
    while (!st.feasible && shrink < 80) {
      P0 *= 0.5;
      Y0 *= 0.5;
      theta = prob.pack(P0, Y0);
      st = detail::evaluate_barrier(prob, theta, 1.0);
      ++shrink;
    }
    if (!st.feasible) {
      out.status = SolveStatus::SolverError;
      out.message = "constructed start is not strictly feasible";
      return out;
    }
  }

  const double nu = 2.0 * rec.n + poly.q();  // barrier parameter
  const double gap_tol = 1e-7;
  double t = 1.0;
  int newton_total = 0;

  while (true) {
    detail::BarrierState st = detail::evaluate_barrier(prob, theta, t);
    for (int it = 0; it < 80; ++it) {
      Eigen::VectorXd grad;
      Eigen::MatrixXd hess;
      detail::barrier_derivatives(prob, st, t, grad, hess);

      Eigen::VectorXd dir;
      double ridge = 0.0;
      for (int attempt = 0; attempt < 8; ++attempt) {
        Eigen::MatrixXd H = hess;
        if (ridge > 0.0)
          H.diagonal().array() += ridge * std::max(1.0, hess.trace());
        Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
        if (ldlt.info() == Eigen::Success) {
          dir = -ldlt.solve(grad);
          if (dir.allFinite() && grad.dot(dir) < 0.0) break;
        }
        ridge = (ridge == 0.0) ? 1e-12 : ridge * 100.0;
        dir.setZero();
      }
      if (dir.size() == 0 || !dir.allFinite() || grad.dot(dir) >= 0.0) {
        out.status = SolveStatus::SolverError;
        out.message = "Newton direction failed";
        return out;
      }

      const double decrement2 = -grad.dot(dir);
      if (0.5 * decrement2 <= 1e-10) break;

      double alpha = 1.0;
      detail::BarrierState trial;
      bool accepted = false;
      for (int ls = 0; ls < 70; ++ls) {
        trial = detail::evaluate_barrier(prob, theta + alpha * dir, t);
        if (trial.feasible &&
            trial.phi <= st.phi + 0.01 * alpha * grad.dot(dir)) {
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) break;  // centered as far as rounding allows
      theta += alpha * dir;
      st = trial;
      ++newton_total;
    }

    if (nu / t <= gap_tol) {
      out.barrier_gap = nu / t;
      break;
    }
    t *= 10.0;
  }
  out.newton_iterations = newton_total;

  const Eigen::MatrixXd P = prob.unpack_p(theta);
  const Eigen::MatrixXd Y = prob.unpack_y(theta);
  Certificate cert;
  cert.P = 0.5 * (P + P.transpose());
  cert.S = prob.Gu * Y + prob.Gx * cert.P;
  cert.K = cert.P.ldlt().solve(Y.transpose()).transpose();
  cert.G2 = prob.Gu;
  cert.lambda = lambda;
  cert.center_state = center_state;
  cert.center_output = center_output;
  cert.polytope = poly;

  const VerificationReport rep = verify_certificate(cert, rec, 1e-8);
  if (!rep.pass) {
    out.status = SolveStatus::SolverError;
    out.message = "solution failed verification at solver tolerance";
    return out;
  }
  out.status = SolveStatus::Feasible;
  out.cert = std::move(cert);
  return out;
}

}  // namespace certiplan
