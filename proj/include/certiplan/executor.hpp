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
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "certiplan/certificate.hpp"
#include "certiplan/data.hpp"
#include "certiplan/error.hpp"
#include "certiplan/lqr.hpp"
#include "certiplan/lti.hpp"
#include "certiplan/planner.hpp"

namespace certiplan {

struct ExecParams {
  double r_f = 1.0;      // goal tolerance on the output, meters
  int max_steps = 5000;  // control steps before timing out
  bool abort_on_violation = false;
};

struct ExecutionTrace {
  std::vector<Eigen::VectorXd> states;   // state at each control step
  std::vector<Eigen::Vector2d> outputs;  // C * state, same indexing
  std::vector<Eigen::VectorXd> inputs;   // applied input, same indexing
  std::vector<int> active_segment;       // segment index per step
  std::vector<double> membership;        // quadratic form vs active ellipsoid
  std::vector<std::pair<int, double>> violations;  // (step, value > 1)
  Eigen::VectorXd final_state;
  std::optional<int> finished_step;
  bool aborted = false;
  bool timed_out = false;
  double max_input_norm = 0.0;
};

struct ViolationStats {
  int violating_segments = 0;
  int total_segments = 0;
  double percent = 0.0;  // 100 * violating / total, rounded to one decimal
};

/// One leg of an execution: settle toward the certificate's center under a
/// feedback law, monitored against the certificate's projected ellipsoid.
struct Segment {
  Certificate cert;
  OutputEllipsoid proj;
  SteadyStatePair eq;
};

/// An edge whose certificate settles short of the arrival cell's center
/// (the attractor was pulled back because the straight-ahead continuation
/// is blocked or out of bounds).
inline bool edge_is_clipped(const CertifiedPath& path, size_t edge) {
  require(edge < path.edge_certs.size(), ErrorCode::Precondition,
          "edge index outside path");
  const Eigen::Vector2d arrival = path.waypoints[edge + 1];
  return (path.edge_certs[edge].center_output - arrival).norm() > 1e-6;
}

/// Segments an execution of the path runs through: hold-at-start, one
/// segment per edge, then hold-at-goal, where the goal hold doubles as the
/// finish region and a zero-edge path is a single hold. A clipped edge
/// leaves the agent laterally offset from the next corridor's axis, so a
/// settle hold at the junction cell follows every clipped edge except the
/// last (whose junction hold is the goal hold itself).
inline int segment_count(const CertifiedPath& path) {
  if (path.edge_certs.empty()) return 1;
  int count = int(path.edge_certs.size()) + 2;
  for (size_t k = 0; k + 1 < path.edge_certs.size(); ++k)
    if (edge_is_clipped(path, k)) ++count;
  return count;
}

/// Expand the path into its executable segment schedule. Junction holds
/// reuse the goal hold's certificate recentered on the junction cell, which
/// is exact because hold geometry is identical everywhere on the grid.
inline std::vector<Segment> build_segments(const CertifiedPath& path,
                                           const Eigen::MatrixXd& T_hat,
                                           const Eigen::MatrixXd& C) {
  require(!path.cells.empty(), ErrorCode::Precondition, "path has no cells");
  require(path.edge_certs.size() + 1 == path.cells.size(),
          ErrorCode::Precondition, "path edges and cells disagree");
  require(path.waypoints.size() == path.cells.size(), ErrorCode::Precondition,
          "path waypoints and cells disagree");
  std::vector<Segment> segs;
  auto push = [&](const Certificate& cert) {
    Segment s;
    s.cert = cert;
    s.proj = project_ellipsoid(cert, C);
    s.eq = steady_state(T_hat, cert.center_output);
    segs.push_back(std::move(s));
  };
  push(path.root_cert);
  for (size_t k = 0; k < path.edge_certs.size(); ++k) {
    push(path.edge_certs[k]);
    if (k + 1 < path.edge_certs.size() && edge_is_clipped(path, k)) {
      Certificate hold = path.goal_cert;
      hold.center_output = path.waypoints[k + 1];
      hold.center_state = steady_state(T_hat, hold.center_output).x_bar;
      push(hold);
    }
  }
  if (path.edge_certs.empty()) return segs;  // zero-edge path: one hold
  push(path.goal_cert);
  require(int(segs.size()) == segment_count(path), ErrorCode::Internal,
          "segment schedule does not match its predicted count");
  return segs;
}

namespace detail {

/// Per-step state machine shared by single, multi, and baseline execution.
/// Order within a step: hand off to the next segment once the output has
/// entered its ellipsoid (one increment per step), finish when on the last
/// segment within tolerance of the goal, otherwise monitor membership and
/// apply the active segment's affine law. Recorded step indices coincide
/// with global step indices because an agent records every step until it
/// finishes.
class SegmentRunner {
 public:
  SegmentRunner(const LtiModel& model, std::vector<Segment> segments,
                const Eigen::VectorXd& x0, const ExecParams& params,
                std::optional<Eigen::MatrixXd> gain_override = std::nullopt)
      : model_(model),
        segments_(std::move(segments)),
        params_(params),
        gain_override_(std::move(gain_override)),
        x_(x0) {
    require(!segments_.empty(), ErrorCode::Precondition, "no segments");
    const Eigen::Vector2d y0 = model_.C * x_;
    require(contains(segments_.front().proj, y0), ErrorCode::Precondition,
            "initial output lies outside the first certified ellipsoid");
    goal_ = segments_.back().cert.center_output;
  }

  bool done() const {
    return trace_.finished_step.has_value() || trace_.aborted ||
           trace_.timed_out;
  }

  /// Run one control step with event-based handoff: advance to the next
  /// segment once the output has entered its ellipsoid. Returns false once
  /// finished, aborted, or timed out (the finishing call applies no input).
  bool advance(int global_step) {
    if (done()) return false;
    size_t target = ell_;
    const Eigen::Vector2d y = model_.C * x_;
    if (ell_ + 1 < segments_.size() && contains(segments_[ell_ + 1].proj, y))
      target = ell_ + 1;
    return step_toward(target, global_step);
  }

  /// Run one control step with waypoint-style switching: advance to the
  /// next segment once the output comes within `radius` of the active
  /// attractor. This is how a tracker that knows only the waypoint list
  /// is deployed; the certificates play no part in its control flow and
  /// serve purely as the measurement yardstick.
  bool advance_proximity(double radius, int global_step) {
    if (done()) return false;
    size_t target = ell_;
    const Eigen::Vector2d y = model_.C * x_;
    if (ell_ + 1 < segments_.size() &&
        (y - segments_[ell_].cert.center_output).norm() <= radius)
      target = ell_ + 1;
    return step_toward(target, global_step);
  }

  /// After finishing, keep station on the last segment so other agents'
  /// separation monitoring sees a live position; nothing is recorded.
  void station_keep() {
    const Segment& seg = segments_.back();
    const Eigen::MatrixXd& K = gain_override_ ? *gain_override_ : seg.cert.K;
    const Eigen::VectorXd u = K * (x_ - seg.eq.x_bar) + seg.eq.u_bar;
    x_ = step(model_, x_, u);
  }

  Eigen::Vector2d output() const { return model_.C * x_; }

  ExecutionTrace take_trace() {
    if (!done()) finalize();
    return std::move(trace_);
  }

 private:
  bool step_toward(size_t target, int global_step) {
    if (steps_taken_ >= params_.max_steps) {
      trace_.timed_out = true;
      finalize();
      return false;
    }
    ell_ = target;
    const Eigen::Vector2d y = model_.C * x_;
    if (ell_ + 1 == segments_.size() && (y - goal_).norm() <= params_.r_f) {
      trace_.finished_step = global_step;
      finalize();
      return false;
    }

    const Segment& seg = segments_[ell_];
    const double value = membership(seg.proj, y);
    if (value > 1.0) {
      trace_.violations.emplace_back(global_step, value);
      if (params_.abort_on_violation) {
        trace_.aborted = true;
        finalize();
        return false;
      }
    }

    const Eigen::MatrixXd& K = gain_override_ ? *gain_override_ : seg.cert.K;
    const Eigen::VectorXd u = K * (x_ - seg.eq.x_bar) + seg.eq.u_bar;
    trace_.states.push_back(x_);
    trace_.outputs.push_back(y);
    trace_.inputs.push_back(u);
    trace_.active_segment.push_back(int(ell_));
    trace_.membership.push_back(value);
    trace_.max_input_norm = std::max(trace_.max_input_norm, u.norm());
    x_ = step(model_, x_, u);
    ++steps_taken_;
    return true;
  }

  void finalize() { trace_.final_state = x_; }

  const LtiModel& model_;
  std::vector<Segment> segments_;
  ExecParams params_;
  std::optional<Eigen::MatrixXd> gain_override_;
  Eigen::VectorXd x_;
  size_t ell_ = 0;
  int steps_taken_ = 0;
  Eigen::Vector2d goal_;
  ExecutionTrace trace_;
};

}  // namespace detail

/// Violation tally over a trace: a segment counts as violating if any step
/// spent in it failed the membership test. The segment total is the path's
/// executable segment count (holds included), so an execution cut short by
/// timeout still reports against the full plan.
inline ViolationStats violation_stats(const ExecutionTrace& trace,
                                      const CertifiedPath& path) {
  ViolationStats s;
  s.total_segments = segment_count(path);
  std::vector<bool> bad(size_t(s.total_segments), false);
  for (const auto& [step, value] : trace.violations) {
    require(step >= 0 && size_t(step) < trace.active_segment.size(),
            ErrorCode::Precondition, "violation step outside trace");
    (void)value;
    const int seg = trace.active_segment[size_t(step)];
    require(seg >= 0 && seg < s.total_segments, ErrorCode::Precondition,
            "violation segment outside path");
    bad[size_t(seg)] = true;
  }
  for (bool b : bad)
    if (b) ++s.violating_segments;
  s.percent = std::round(1000.0 * s.violating_segments /
                         std::max(1, s.total_segments)) /
              10.0;
  return s;
}

inline ExecutionTrace execute_single(const LtiModel& model,
                                     const CertifiedPath& path,
                                     const Eigen::MatrixXd& T_hat,
                                     const Eigen::VectorXd& x0,
                                     const ExecParams& params) {
  detail::SegmentRunner runner(model, build_segments(path, T_hat, model.C),
                               x0, params);
  int step_idx = 0;
  while (runner.advance(step_idx)) ++step_idx;
  return runner.take_trace();
}

struct MultiExecution {
  std::vector<ExecutionTrace> traces;
  std::vector<ViolationStats> stats;
  std::vector<double> min_pairwise_distance;  // per global step
};

namespace detail {

/// Shared clock over several runners: every global step advances each
/// unfinished agent once and station-keeps the finished ones, then logs the
/// smallest pairwise output separation. Stops when every agent is done.
inline MultiExecution run_lockstep(std::vector<SegmentRunner>& runners,
                                   const std::vector<CertifiedPath>& paths) {
  MultiExecution result;
  int global_step = 0;
  while (true) {
    bool all_done = true;
    for (SegmentRunner& r : runners)
      if (!r.done()) all_done = false;
    if (all_done) break;
    for (SegmentRunner& r : runners) {
      if (r.done())
        r.station_keep();
      else
        r.advance(global_step);
    }
    double min_dist = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < runners.size(); ++i)
      for (size_t j = i + 1; j < runners.size(); ++j)
        min_dist = std::min(
            min_dist, (runners[i].output() - runners[j].output()).norm());
    if (runners.size() > 1) result.min_pairwise_distance.push_back(min_dist);
    ++global_step;
  }
  for (size_t i = 0; i < runners.size(); ++i) {
    result.traces.push_back(runners[i].take_trace());
    result.stats.push_back(violation_stats(result.traces.back(), paths[i]));
  }
  return result;
}

}  // namespace detail

/// Execute several certified paths against one shared step counter. Agents
/// advance in index order each step; an agent that reaches its goal keeps
/// station there while the rest continue.
inline MultiExecution execute_multi(const std::vector<LtiModel>& models,
                                    const std::vector<CertifiedPath>& paths,
                                    const std::vector<Eigen::MatrixXd>& T_hats,
                                    const std::vector<Eigen::VectorXd>& x0s,
                                    const std::vector<ExecParams>& params) {
  const size_t k = models.size();
  require(k > 0, ErrorCode::Precondition, "no agents");
  require(paths.size() == k && T_hats.size() == k && x0s.size() == k &&
              params.size() == k,
          ErrorCode::Precondition, "agent argument counts disagree");
  std::vector<detail::SegmentRunner> runners;
  runners.reserve(k);
  for (size_t i = 0; i < k; ++i)
    runners.emplace_back(models[i],
                         build_segments(paths[i], T_hats[i], models[i].C),
                         x0s[i], params[i]);
  return detail::run_lockstep(runners, paths);
}

inline MultiExecution execute_multi(const std::vector<LtiModel>& models,
                                    const std::vector<CertifiedPath>& paths,
                                    const std::vector<Eigen::MatrixXd>& T_hats,
                                    const std::vector<Eigen::VectorXd>& x0s,
                                    const ExecParams& params) {
  return execute_multi(models, paths, T_hats, x0s,
                       std::vector<ExecParams>(models.size(), params));
}

/// Run the planned missions under a single LQR gain per agent instead of
/// the per-segment certified gains. Paths, attractor sequences, steady
/// states, and membership sets are identical to the certified execution;
/// what changes is the controller and its natural switching rule. A plain
/// waypoint tracker advances once it comes within switch_radius of the
/// attractor it is chasing, without consulting any set membership, so its
/// transients at turns and settle points are free to leave the certified
/// ellipsoids. Memberships are still recorded against each segment's
/// certified ellipsoid, which is what the violation statistics measure.
inline MultiExecution execute_lqr_baseline(
    const std::vector<LtiModel>& models,
    const std::vector<CertifiedPath>& paths,
    const std::vector<DataRecord>& records,
    const std::vector<Eigen::MatrixXd>& T_hats,
    const std::vector<Eigen::VectorXd>& x0s, const ExecParams& params,
    const LqrWeights& weights, double switch_radius = 4.0) {
  const size_t k = models.size();
  require(k > 0, ErrorCode::Precondition, "no agents");
  require(paths.size() == k && records.size() == k && T_hats.size() == k &&
              x0s.size() == k,
          ErrorCode::Precondition, "agent argument counts disagree");
  require(switch_radius > 0, ErrorCode::Precondition,
          "switch radius must be positive");
  std::vector<detail::SegmentRunner> runners;
  runners.reserve(k);
  for (size_t i = 0; i < k; ++i) {
    const auto [Ad, Bd] = reconstruct_dynamics(records[i]);
    const Eigen::MatrixXd K = lqr_gain(Ad, Bd, weights);
    runners.emplace_back(models[i],
                         build_segments(paths[i], T_hats[i], models[i].C),
                         x0s[i], params, K);
  }

  MultiExecution result;
  int global_step = 0;
  while (true) {
    bool all_done = true;
    for (auto& r : runners)
      if (!r.done()) all_done = false;
    if (all_done) break;
    for (auto& r : runners) {
      if (r.done())
        r.station_keep();
      else
        r.advance_proximity(switch_radius, global_step);
    }
    double min_dist = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < k; ++i)
      for (size_t j = i + 1; j < k; ++j)
        min_dist = std::min(
            min_dist, (runners[i].output() - runners[j].output()).norm());
    if (k > 1) result.min_pairwise_distance.push_back(min_dist);
    ++global_step;
  }
  for (size_t i = 0; i < k; ++i) {
    result.traces.push_back(runners[i].take_trace());
    result.stats.push_back(violation_stats(result.traces.back(), paths[i]));
  }
  return result;
}

}  // namespace certiplan
