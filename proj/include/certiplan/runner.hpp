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
#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "certiplan/artifact.hpp"
#include "certiplan/data.hpp"
#include "certiplan/error.hpp"
#include "certiplan/executor.hpp"
#include "certiplan/planner.hpp"
#include "certiplan/rng.hpp"
#include "certiplan/scenario.hpp"
#include "certiplan/svg.hpp"

namespace certiplan {

namespace detail {

class PhaseClock {
 public:
  double lap_ms() {
    const auto now = std::chrono::steady_clock::now();
    const double ms =
        std::chrono::duration<double, std::milli>(now - mark_).count();
    mark_ = now;
    return ms;
  }

 private:
  std::chrono::steady_clock::time_point mark_ =
      std::chrono::steady_clock::now();
};

template <typename Fn>
auto with_context(const std::string& phase, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.code(), phase + ": " + e.what());
  }
}

}  // namespace detail

/// Resolve the plan path from either a run directory or a direct file path.
inline std::string locate_plan(const std::string& artifact) {
  namespace fs = std::filesystem;
  if (fs::is_directory(artifact)) {
    const std::string candidate = plan_file(artifact);
    require(fs::exists(candidate), ErrorCode::Io,
            "no plan.json inside " + artifact);
    return candidate;
  }
  require(fs::exists(artifact), ErrorCode::Io, "no such artifact: " + artifact);
  return artifact;
}

/// Execute the full pipeline: excitation experiments, certified planning,
/// certified execution, and the optional baseline, then write every
/// artifact into out_dir. All randomness flows from the scenario's seeds,
/// so the plan, summary, and trace files are byte-stable across runs.
inline RunArtifact run_scenario(const Scenario& s, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  detail::PhaseClock clock;
  nlohmann::ordered_json timing;

  const LtiModel model = make_model(s);
  const GridWorld grid = make_grid(s);
  const int n = model.n();
  const size_t k = s.agents.size();

  std::vector<DataRecord> records;
  std::vector<Eigen::MatrixXd> T_hats;
  detail::with_context("data collection", [&] {
    for (size_t i = 0; i < k; ++i) {
      Rng rng(s.agents[i].data_seed);
      records.push_back(collect_trajectory(model, Eigen::VectorXd::Zero(n),
                                           s.agents[i].data_samples, rng,
                                           s.agents[i].excitation));
      const auto [rank, exciting] = excitation_rank(records.back());
      require(exciting, ErrorCode::RankDeficient,
              "agent " + std::to_string(i) + " experiment reached rank " +
                  std::to_string(rank) + " of " +
                  std::to_string(model.m() + n) +
                  "; raise data_samples or excitation");
      T_hats.push_back(steady_state_map(records.back()));
    }
    return 0;
  });
  timing["collect_ms"] = clock.lap_ms();

  RunArtifact art;
  art.config = scenario_to_json(s);
  art.agents.resize(k);
  for (size_t i = 0; i < k; ++i) {
    art.agents[i].record = records[i];
    art.agents[i].T_hat = T_hats[i];
  }

  const PlannerParams params = scenario_planner_params(s, n);
  std::vector<Cell> starts, goals;
  for (const AgentSpec& a : s.agents) {
    starts.push_back(snap(grid, a.start));
    goals.push_back(snap(grid, a.goal));
  }

  std::vector<CertifiedPath> paths;
  detail::with_context("planning", [&] {
    if (k == 1) {
      SinglePlan plan = plan_single(grid, starts[0], goals[0], records[0],
                                    T_hats[0], params);
      art.agents[0].path = plan.path;
      art.agents[0].tree = std::move(plan.tree);
      art.iterations = plan.iterations;
      art.sdp_solves = plan.sdp_solves;
      paths.push_back(art.agents[0].path);
    } else {
      MultiPlan plan =
          plan_multi(grid, starts, goals, records, T_hats, params);
      for (size_t i = 0; i < k; ++i) {
        art.agents[i].path = plan.paths[i];
        art.agents[i].tree = std::move(plan.trees[i]);
      }
      art.table = std::move(plan.table);
      art.layers = plan.layers;
      art.sdp_solves = plan.sdp_solves;
      paths = std::move(plan.paths);
    }
    return 0;
  });
  timing["plan_ms"] = clock.lap_ms();

  // Every run starts each agent at rest on its root attractor, the
  // equilibrium state whose output is the start cell's center.
  std::vector<Eigen::VectorXd> x0s;
  for (size_t i = 0; i < k; ++i)
    x0s.push_back(steady_state(T_hats[i], center(grid, starts[i])).x_bar);
  const std::vector<LtiModel> models(k, model);

  detail::with_context("execution", [&] {
    if (k == 1) {
      art.agents[0].trace =
          execute_single(model, paths[0], T_hats[0], x0s[0], s.exec);
      art.agents[0].stats = violation_stats(art.agents[0].trace, paths[0]);
    } else {
      MultiExecution exec = execute_multi(models, paths, T_hats, x0s, s.exec);
      for (size_t i = 0; i < k; ++i) {
        art.agents[i].trace = std::move(exec.traces[i]);
        art.agents[i].stats = exec.stats[i];
      }
      art.min_pairwise = std::move(exec.min_pairwise_distance);
    }
    return 0;
  });
  timing["execute_ms"] = clock.lap_ms();

  if (s.baseline.enabled) {
    detail::with_context("baseline", [&] {
      MultiExecution base = execute_lqr_baseline(
          models, paths, records, T_hats, x0s, s.exec, s.baseline.weights,
          s.baseline.switch_radius);
      for (size_t i = 0; i < k; ++i) {
        art.agents[i].baseline_trace = std::move(base.traces[i]);
        art.agents[i].baseline_stats = base.stats[i];
      }
      art.baseline_min_pairwise = std::move(base.min_pairwise_distance);
      return 0;
    });
    timing["baseline_ms"] = clock.lap_ms();
  }

  write_artifacts(art, out_dir);

  // Figures are rendered from the files just written, never from live
  // state, so anything on disk can be re-rendered later the same way.
  const LoadedPlan loaded = load_plan(plan_file(out_dir));
  const GridWorld lg = make_grid(loaded.scenario);
  std::vector<TraceTable> certified;
  std::vector<std::optional<TraceTable>> baseline;
  for (size_t i = 0; i < k; ++i) {
    certified.push_back(read_trace_csv(trace_file(out_dir, i, false)));
    const std::string bpath = trace_file(out_dir, i, true);
    if (fs::exists(bpath))
      baseline.push_back(read_trace_csv(bpath));
    else
      baseline.push_back(std::nullopt);
  }
  detail::write_text_file(out_dir + "/trees.svg", render_trees(lg, loaded));
  detail::write_text_file(out_dir + "/ellipses.svg",
                          render_ellipses(lg, loaded));
  detail::write_text_file(out_dir + "/paths.svg", render_paths(lg, loaded));
  detail::write_text_file(out_dir + "/executed.svg",
                          render_executed(lg, loaded, certified, baseline));
  timing["render_ms"] = clock.lap_ms();

  detail::write_text_file(meta_file(out_dir), timing.dump(2) + "\n");
  return art;
}

/// One certificate's verification outcome, labeled by where it sits.
struct VerifyLine {
  std::string label;
  VerificationReport report;
};

struct VerifyResult {
  std::vector<VerifyLine> lines;
  int failures = 0;
};

/// Re-verify every certificate stored in a plan against its agent's own
/// trajectory data: the contraction matrix inequality, the facet bounds,
/// and the data-consistency equalities.
inline VerifyResult verify_plan(const LoadedPlan& plan) {
  VerifyResult result;
  for (size_t i = 0; i < plan.agents.size(); ++i) {
    const LoadedAgent& a = plan.agents[i];
    const std::string who = "agent " + std::to_string(i) + " ";
    const auto check = [&](const std::string& label, const Certificate& cert) {
      VerifyLine line{who + label, verify_certificate(cert, a.record)};
      if (!line.report.pass) ++result.failures;
      result.lines.push_back(std::move(line));
    };
    check("root hold", a.path.root_cert);
    for (size_t e = 0; e < a.path.edge_certs.size(); ++e)
      check("edge " + std::to_string(e), a.path.edge_certs[e]);
    check("goal hold", a.path.goal_cert);
  }
  return result;
}

/// Render one figure kind from an artifact directory (or a plan path) and
/// write <kind>.svg next to the plan. Returns the written path.
inline std::string render_artifact(const std::string& artifact,
                                   const std::string& kind) {
  namespace fs = std::filesystem;
  const std::string plan_path = locate_plan(artifact);
  const std::string dir = fs::path(plan_path).parent_path().string();
  const LoadedPlan plan = load_plan(plan_path);
  const GridWorld grid = make_grid(plan.scenario);

  std::string svg;
  if (kind == "trees") {
    svg = render_trees(grid, plan);
  } else if (kind == "ellipses") {
    svg = render_ellipses(grid, plan);
  } else if (kind == "paths") {
    svg = render_paths(grid, plan);
  } else if (kind == "executed") {
    std::vector<TraceTable> certified;
    std::vector<std::optional<TraceTable>> baseline;
    for (size_t i = 0; i < plan.agents.size(); ++i) {
      const std::string cpath = trace_file(dir, i, false);
      require(fs::exists(cpath), ErrorCode::Io,
              "executed figure needs " + cpath);
      certified.push_back(read_trace_csv(cpath));
      const std::string bpath = trace_file(dir, i, true);
      if (fs::exists(bpath))
        baseline.push_back(read_trace_csv(bpath));
      else
        baseline.push_back(std::nullopt);
    }
    svg = render_executed(grid, plan, certified, baseline);
  } else {
    throw Error(ErrorCode::Precondition,
                "unknown figure kind: " + kind +
                    " (expected trees, ellipses, paths, or executed)");
  }
  const std::string out = (fs::path(dir) / (kind + ".svg")).string();
  detail::write_text_file(out, svg);
  return out;
}

}  // namespace certiplan
