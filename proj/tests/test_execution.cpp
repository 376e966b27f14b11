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

// Execution semantics: segment schedules, event-based handoff, violation
// accounting, the regulator baseline, and multi-agent lockstep runs.

#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include "certiplan/data.hpp"
#include "certiplan/executor.hpp"
#include "certiplan/grid.hpp"
#include "certiplan/lqr.hpp"
#include "certiplan/lti.hpp"
#include "certiplan/planner.hpp"
#include "oracles.hpp"

using namespace certiplan;

namespace {

const Rect kBounds{-50.0, 50.0, -50.0, 50.0};

LtiModel reference_spacecraft() {
  return discretize_zoh(cw_inplane_model(0.11), 30.0);
}

DataRecord reference_record(uint64_t seed = 7) {
  Rng rng(seed);
  return collect_trajectory(reference_spacecraft(), Eigen::Vector4d::Zero(),
                            20, rng, 1.0);
}

std::vector<Rect> debris_field() {
  const double hw = 8.0;
  const std::vector<std::pair<double, double>> centers = {
      {-30, 40}, {-40, -30}, {30, 30}, {40, -20}, {-30, 10}, {10, -30}, {0, 0}};
  std::vector<Rect> out;
  for (const auto& [cx, cy] : centers)
    out.push_back({cx - hw, cx + hw, cy - hw, cy + hw});
  return out;
}

Certificate synthetic_cert(const Eigen::Vector2d& center_output) {
  Certificate c;
  c.P = Eigen::Matrix4d::Identity();
  c.S = Eigen::MatrixXd::Zero(20, 4);
  c.K = Eigen::MatrixXd::Zero(2, 4);
  c.G2 = Eigen::MatrixXd::Zero(20, 2);
  c.lambda = 0.94;
  c.center_state = Eigen::Vector4d::Zero();
  c.center_output = center_output;
  return c;
}

/// Straight east-running path over `cells` cells on a synthetic strip grid;
/// every edge settles at its arrival center, so nothing is clipped.
CertifiedPath straight_synthetic_path(int cells) {
  const GridWorld g =
      build_grid({0.0, 10.0 * cells, 0.0, 10.0}, 10.0, {});
  CertifiedPath path;
  for (int c = 0; c < cells; ++c) path.cells.push_back({0, c});
  attach_waypoints(path, g);
  for (int e = 0; e + 1 < cells; ++e)
    path.edge_certs.push_back(synthetic_cert(path.waypoints[size_t(e) + 1]));
  path.root_cert = synthetic_cert(path.waypoints.front());
  path.goal_cert = synthetic_cert(path.waypoints.back());
  return path;
}

}  // namespace

TEST_CASE("segment schedules count holds, edges, and junction settles") {
  SECTION("a path that never leaves its cell is a single hold") {
    const CertifiedPath path = straight_synthetic_path(1);
    CHECK(segment_count(path) == 1);
  }

  SECTION("a straight path is hold + edges + hold") {
    const CertifiedPath path = straight_synthetic_path(3);
    CHECK(segment_count(path) == 4);
    CHECK_FALSE(edge_is_clipped(path, 0));
    CHECK_FALSE(edge_is_clipped(path, 1));
  }

  SECTION("a clipped edge inserts a settle hold unless it is the last edge") {
    CertifiedPath path = straight_synthetic_path(3);
    // Pull edge 0 short of its arrival: a junction hold must follow.
    path.edge_certs[0].center_output =
        path.waypoints[0] + Eigen::Vector2d(6.0, 0.0);
    CHECK(edge_is_clipped(path, 0));
    CHECK(segment_count(path) == 5);

    // Clipping only the final edge adds nothing: the goal hold follows
    // anyway.
    CertifiedPath tail = straight_synthetic_path(3);
    tail.edge_certs[1].center_output =
        tail.waypoints[1] + Eigen::Vector2d(6.0, 0.0);
    CHECK(segment_count(tail) == 4);
  }

  SECTION("the 44-cell straight corridor has 45 segments") {
    CHECK(segment_count(straight_synthetic_path(44)) == 45);
  }
}

TEST_CASE("violation accounting is per segment against the full schedule") {
  const CertifiedPath path = straight_synthetic_path(44);
  REQUIRE(segment_count(path) == 45);

  ExecutionTrace trace;
  for (int t = 0; t < 45; ++t) trace.active_segment.push_back(t);

  SECTION("a clean trace reports zero") {
    const ViolationStats s = violation_stats(trace, path);
    CHECK(s.violating_segments == 0);
    CHECK(s.total_segments == 45);
    CHECK(s.percent == 0.0);
  }

  SECTION("seven distinct bad segments out of 45 round to 15.6 percent") {
    for (const int step : {3, 7, 11, 19, 23, 31, 40})
      trace.violations.emplace_back(step, 1.5);
    const ViolationStats s = violation_stats(trace, path);
    CHECK(s.violating_segments == 7);
    CHECK(s.total_segments == 45);
    CHECK(s.percent == 15.6);
  }

  SECTION("repeat violations inside one segment count that segment once") {
    trace.violations.emplace_back(3, 1.5);
    trace.violations.emplace_back(3, 2.5);
    const ViolationStats s = violation_stats(trace, path);
    CHECK(s.violating_segments == 1);
  }

  SECTION("every segment bad means one hundred percent") {
    for (int t = 0; t < 45; ++t) trace.violations.emplace_back(t, 1.01);
    const ViolationStats s = violation_stats(trace, path);
    CHECK(s.percent == 100.0);
  }
}

TEST_CASE("execution finishes immediately when it starts at the goal") {
  const GridWorld g = build_grid(kBounds, 10.0, {});
  const LtiModel model = reference_spacecraft();
  const DataRecord rec = reference_record();
  const Eigen::MatrixXd T_hat = steady_state_map(rec);
  PlannerParams params;
  params.seed = 2;
  const SinglePlan plan = plan_single(g, {0, 0}, {0, 0}, rec, T_hat, params);

  const Eigen::VectorXd x0 = steady_state(T_hat, center(g, {0, 0})).x_bar;
  ExecParams ep;
  const ExecutionTrace trace = execute_single(model, plan.path, T_hat, x0, ep);
  REQUIRE(trace.finished_step.has_value());
  CHECK(*trace.finished_step == 0);
  CHECK(trace.states.empty());
  CHECK(trace.violations.empty());
  CHECK_FALSE(trace.timed_out);

  SECTION("a zero step budget times out before anything happens") {
    ExecParams none;
    none.max_steps = 0;
    const ExecutionTrace t0 =
        execute_single(model, plan.path, T_hat, x0, none);
    CHECK(t0.timed_out);
    CHECK_FALSE(t0.finished_step.has_value());
    CHECK(t0.states.empty());
  }

  SECTION("starting outside the first certified set is rejected") {
    const Eigen::VectorXd far =
        steady_state(T_hat, center(g, {9, 9})).x_bar;
    CHECK_THROWS_AS(execute_single(model, plan.path, T_hat, far, ep), Error);
  }
}

TEST_CASE("certified execution runs clean and hands off inside both sets") {
  const GridWorld g = build_grid(kBounds, 10.0, debris_field());
  const LtiModel model = reference_spacecraft();
  const DataRecord rec = reference_record();
  const Eigen::MatrixXd T_hat = steady_state_map(rec);
  PlannerParams params;
  params.seed = 1;
  params.extra = state_interval_caps(4, {2, 3}, 2.0);
  const SinglePlan plan = plan_single(g, {0, 0}, {9, 9}, rec, T_hat, params);

  const std::vector<Segment> segs = build_segments(plan.path, T_hat, model.C);
  REQUIRE(int(segs.size()) == segment_count(plan.path));

  const Eigen::VectorXd x0 = steady_state(T_hat, center(g, {0, 0})).x_bar;
  ExecParams ep;
  const ExecutionTrace trace = execute_single(model, plan.path, T_hat, x0, ep);

  REQUIRE(trace.finished_step.has_value());
  CHECK(trace.violations.empty());
  CHECK_FALSE(trace.aborted);
  CHECK_FALSE(trace.timed_out);
  const size_t steps = trace.states.size();
  REQUIRE(steps > 0);
  REQUIRE(trace.outputs.size() == steps);
  REQUIRE(trace.inputs.size() == steps);
  REQUIRE(trace.active_segment.size() == steps);
  REQUIRE(trace.membership.size() == steps);

  // The goal tolerance is met at the finish.
  const Eigen::Vector2d goal = plan.path.goal_cert.center_output;
  CHECK((Eigen::Vector2d(model.C * trace.final_state) - goal).norm() <=
        ep.r_f + 1e-12);

  SECTION("logged outputs are exactly the output map of the logged states") {
    for (size_t t = 0; t < steps; ++t)
      CHECK((trace.outputs[t] - Eigen::Vector2d(model.C * trace.states[t]))
                .norm() == 0.0);
  }

  SECTION("logged inputs are exactly the active segment's feedback law") {
    double max_norm = 0.0;
    for (size_t t = 0; t < steps; ++t) {
      const Segment& seg = segs[size_t(trace.active_segment[t])];
      const Eigen::VectorXd u =
          seg.cert.K * (trace.states[t] - seg.eq.x_bar) + seg.eq.u_bar;
      CHECK((u - trace.inputs[t]).norm() == 0.0);
      max_norm = std::max(max_norm, u.norm());
    }
    CHECK(trace.max_input_norm == max_norm);
  }

  SECTION("membership is measured against the active certified set") {
    for (size_t t = 0; t < steps; ++t) {
      const Segment& seg = segs[size_t(trace.active_segment[t])];
      CHECK(trace.membership[t] ==
            Catch::Approx(membership(seg.proj, trace.outputs[t]))
                .margin(1e-12));
      CHECK(trace.membership[t] <= 1.0);  // clean run
    }
  }

  SECTION("handoff advances one segment at a time, inside both sets") {
    int switches = 0;
    for (size_t t = 1; t < steps; ++t) {
      const int prev = trace.active_segment[t - 1];
      const int cur = trace.active_segment[t];
      CHECK(cur >= prev);
      CHECK(cur - prev <= 1);
      if (cur == prev + 1) {
        ++switches;
        // The switching step's output lies in the new set (that is the
        // event) and still in the old one (no gap to jump).
        CHECK(contains(segs[size_t(cur)].proj, trace.outputs[t]));
        CHECK(membership(segs[size_t(prev)].proj, trace.outputs[t]) <= 1.0);
      }
    }
    CHECK(switches >= 1);
    CHECK(trace.active_segment.front() <= 1);
  }

  SECTION("identical runs produce identical traces") {
    const ExecutionTrace again =
        execute_single(model, plan.path, T_hat, x0, ep);
    REQUIRE(again.states.size() == steps);
    for (size_t t = 0; t < steps; ++t) {
      CHECK((again.states[t] - trace.states[t]).norm() == 0.0);
      CHECK((again.inputs[t] - trace.inputs[t]).norm() == 0.0);
    }
    CHECK(again.finished_step == trace.finished_step);
  }
}

TEST_CASE("regulator synthesis matches independent oracles") {
  SECTION("the scalar fixed point and gain are reproduced") {
    Eigen::MatrixXd A(1, 1), B(1, 1), Q(1, 1), R(1, 1);
    A << 0.5;
    B << 1.0;
    Q << 1.0;
    R << 1.0;
    const Eigen::MatrixXd P = dare_solve(A, B, Q, R);
    CHECK(P(0, 0) == Catch::Approx(oracles::kScalarRiccatiP).margin(1e-9));
    const Eigen::MatrixXd K = lqr_gain(A, B, Q, R);
    CHECK(K(0, 0) == Catch::Approx(oracles::kScalarRiccatiGain).margin(1e-9));
    // The iteration oracle and the closed-form root agree with each other.
    CHECK(oracles::scalar_riccati_fixed_point(0.5, 1.0, 1.0, 1.0) ==
          Catch::Approx(oracles::kScalarRiccatiP).margin(1e-12));
  }

  SECTION("zero state weight with full-rank input costs nothing") {
    Eigen::MatrixXd A(1, 1), B(1, 1);
    A << 0.5;
    B << 1.0;
    const Eigen::MatrixXd P =
        dare_solve(A, B, Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Ones(1, 1));
    CHECK(P(0, 0) == 0.0);
  }

  SECTION("the spacecraft solution is stationary and stabilizing") {
    const DataRecord rec = reference_record();
    const auto [Ad, Bd] = reconstruct_dynamics(rec);
    const Eigen::MatrixXd Q = Eigen::Vector4d(1, 1, 0.1, 0.1).asDiagonal();
    const Eigen::MatrixXd R = 10.0 * Eigen::Matrix2d::Identity();

    const Eigen::MatrixXd P = dare_solve(Ad, Bd, Q, R);
    const Eigen::MatrixXd BtP = Bd.transpose() * P;
    const Eigen::MatrixXd residual =
        Q +
        Ad.transpose() * (P - BtP.transpose() * (R + BtP * Bd).ldlt().solve(BtP)) *
            Ad -
        P;
    CHECK(residual.norm() <= 1e-8 * P.norm());
    CHECK((P - P.transpose()).norm() <= 1e-12 * P.norm());

    const Eigen::MatrixXd K = lqr_gain(Ad, Bd, LqrWeights{Q, R});
    const double rho = spectral_radius(Ad + Bd * K);
    CHECK(rho < 1.0);
    CHECK(rho == Catch::Approx(0.9281).margin(1e-2));

    // Stability holds across weight scalings even though the radius is not
    // monotone in them.
    for (const double scale : {10.0, 100.0}) {
      const Eigen::MatrixXd Ks = lqr_gain(Ad, Bd, scale * Q, R);
      CHECK(spectral_radius(Ad + Bd * Ks) < 1.0);
    }
  }
}

TEST_CASE("two-agent lockstep execution: certified clean, baseline not") {
  const GridWorld g = build_grid(kBounds, 10.0, debris_field());
  const LtiModel model = reference_spacecraft();
  const DataRecord rec_a = reference_record(7);
  const DataRecord rec_b = reference_record(8);
  const Eigen::MatrixXd T_a = steady_state_map(rec_a);
  const Eigen::MatrixXd T_b = steady_state_map(rec_b);

  PlannerParams params;
  params.seed = 1;
  params.extra = state_interval_caps(4, {2, 3}, 2.0);
  const MultiPlan plan = plan_multi(g, {{0, 0}, {9, 0}}, {{9, 9}, {0, 9}},
                                    {rec_a, rec_b}, {T_a, T_b}, params);
  REQUIRE(plan.paths.size() == 2);

  const std::vector<Eigen::VectorXd> x0s = {
      steady_state(T_a, center(g, {0, 0})).x_bar,
      steady_state(T_b, center(g, {9, 0})).x_bar};
  ExecParams ep;

  const MultiExecution cert = execute_multi({model, model}, plan.paths,
                                            {T_a, T_b}, x0s, ep);
  REQUIRE(cert.traces.size() == 2);
  for (int i = 0; i < 2; ++i) {
    CHECK(cert.traces[size_t(i)].finished_step.has_value());
    CHECK(cert.traces[size_t(i)].violations.empty());
    CHECK(cert.stats[size_t(i)].percent == 0.0);
  }

  // Separation is logged every shared step and stays comfortably positive.
  REQUIRE_FALSE(cert.min_pairwise_distance.empty());
  double min_sep = cert.min_pairwise_distance.front();
  for (const double d : cert.min_pairwise_distance)
    min_sep = std::min(min_sep, d);
  CHECK(min_sep > 5.0);

  SECTION("the regulator baseline violates at least one certified set") {
    const Eigen::MatrixXd Q = Eigen::Vector4d(1, 1, 0.1, 0.1).asDiagonal();
    const Eigen::MatrixXd R = 10.0 * Eigen::Matrix2d::Identity();
    const MultiExecution base =
        execute_lqr_baseline({model, model}, plan.paths, {rec_a, rec_b},
                             {T_a, T_b}, x0s, ep, LqrWeights{Q, R}, 4.0);
    CHECK(base.traces[0].finished_step.has_value());
    CHECK(base.traces[1].finished_step.has_value());
    CHECK(base.stats[0].percent + base.stats[1].percent > 0.0);

    // Violation entries agree with the logged membership and exceed one.
    for (const auto& trace : base.traces)
      for (const auto& [step, value] : trace.violations) {
        CHECK(value > 1.0);
        CHECK(trace.membership[size_t(step)] == value);
      }

    // The baseline applies the one regulator gain around the shared
    // per-segment equilibria: its inputs are exactly reconstructible.
    const auto [Ad, Bd] = reconstruct_dynamics(rec_a);
    const Eigen::MatrixXd K_lqr = lqr_gain(Ad, Bd, LqrWeights{Q, R});
    const std::vector<Segment> segs =
        build_segments(plan.paths[0], T_a, model.C);
    const ExecutionTrace& t0 = base.traces[0];
    for (size_t t = 0; t < t0.states.size(); ++t) {
      const Segment& seg = segs[size_t(t0.active_segment[t])];
      const Eigen::VectorXd u =
          K_lqr * (t0.states[t] - seg.eq.x_bar) + seg.eq.u_bar;
      CHECK((u - t0.inputs[t]).norm() == 0.0);
    }
  }

  SECTION("per-agent step budgets apply independently") {
    std::vector<ExecParams> eps(2);
    eps[0].max_steps = 0;
    const MultiExecution mixed =
        execute_multi({model, model}, plan.paths, {T_a, T_b}, x0s, eps);
    CHECK(mixed.traces[0].timed_out);
    CHECK_FALSE(mixed.traces[0].finished_step.has_value());
    CHECK(mixed.traces[1].finished_step.has_value());
  }
}
