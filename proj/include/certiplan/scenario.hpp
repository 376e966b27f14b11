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
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "certiplan/error.hpp"
#include "certiplan/executor.hpp"
#include "certiplan/grid.hpp"
#include "certiplan/lqr.hpp"
#include "certiplan/lti.hpp"
#include "certiplan/planner.hpp"

namespace certiplan {

/// One agent's mission and excitation experiment. Start and goal are output
/// positions in meters; the experiment seed drives the input sequence used
/// to collect that agent's trajectory data.
struct AgentSpec {
  Eigen::Vector2d start = Eigen::Vector2d::Zero();
  Eigen::Vector2d goal = Eigen::Vector2d::Zero();
  std::uint64_t data_seed = 0;
  int data_samples = 20;
  double excitation = 0.01;
};

/// Comparison controller configuration. Q and R are resolved to full
/// matrices at parse time; switch_radius is the waypoint-tracking advance
/// distance in meters.
struct BaselineSpec {
  bool enabled = false;
  LqrWeights weights;
  double switch_radius = 4.0;
};

/// A fully resolved scenario: dynamics, workspace, missions, and parameters
/// with all defaults applied. Every random draw in a run flows from the
/// seeds recorded here.
struct Scenario {
  std::string name;

  std::string model_kind;  // "cw_inplane", "double_integrator", "explicit"
  double mean_motion = 0.11;
  double Ts = 30.0;
  Eigen::MatrixXd A, B, C;  // used only by kind "explicit"

  Rect bounds{};
  double cell = 10.0;
  std::vector<Rect> obstacles;

  std::vector<AgentSpec> agents;

  double beta = 0.2;
  double lambda = 0.94;
  int max_iters = 10000;
  int layer_budget = 500;
  std::uint64_t planner_seed = 1;
  double velocity_limit = 2.0;       // symmetric cap on velocity errors; <= 0 disables
  std::vector<int> capped_states;    // state indices the cap applies to

  ExecParams exec;
  BaselineSpec baseline;
};

namespace detail {

inline const nlohmann::json& expect_field(const nlohmann::json& j,
                                          const std::string& path,
                                          const char* key) {
  require(j.is_object(), ErrorCode::Schema, path + ": expected an object");
  const auto it = j.find(key);
  require(it != j.end(), ErrorCode::Schema,
          path + "." + key + ": missing required field");
  return *it;
}

inline double as_number(const nlohmann::json& j, const std::string& path) {
  require(j.is_number(), ErrorCode::Schema, path + ": expected a number");
  return j.get<double>();
}

inline double number_field(const nlohmann::json& j, const std::string& path,
                           const char* key) {
  return as_number(expect_field(j, path, key), path + "." + key);
}

inline double number_or(const nlohmann::json& j, const std::string& path,
                        const char* key, double fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return as_number(j.at(key), path + "." + key);
}

inline int int_or(const nlohmann::json& j, const std::string& path,
                  const char* key, int fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  const auto& v = j.at(key);
  require(v.is_number_integer(), ErrorCode::Schema,
          path + "." + key + ": expected an integer");
  return v.get<int>();
}

inline bool bool_or(const nlohmann::json& j, const std::string& path,
                    const char* key, bool fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  const auto& v = j.at(key);
  require(v.is_boolean(), ErrorCode::Schema,
          path + "." + key + ": expected a boolean");
  return v.get<bool>();
}

inline Eigen::Vector2d as_vec2(const nlohmann::json& j,
                               const std::string& path) {
  require(j.is_array() && j.size() == 2, ErrorCode::Schema,
          path + ": expected an array of 2 numbers");
  return {as_number(j[0], path + "[0]"), as_number(j[1], path + "[1]")};
}

inline Eigen::MatrixXd as_matrix(const nlohmann::json& j,
                                 const std::string& path) {
  require(j.is_array() && !j.empty(), ErrorCode::Schema,
          path + ": expected a non-empty array of rows");
  const size_t cols = j[0].is_array() ? j[0].size() : 0;
  require(cols > 0, ErrorCode::Schema,
          path + ": expected rows to be arrays of numbers");
  Eigen::MatrixXd m(j.size(), cols);
  for (size_t r = 0; r < j.size(); ++r) {
    const std::string rp = path + "[" + std::to_string(r) + "]";
    require(j[r].is_array() && j[r].size() == cols, ErrorCode::Schema,
            rp + ": ragged matrix rows");
    for (size_t c = 0; c < cols; ++c)
      m(Eigen::Index(r), Eigen::Index(c)) =
          as_number(j[r][c], rp + "[" + std::to_string(c) + "]");
  }
  return m;
}

/// Weight entries accept a scalar (multiple of identity), a vector (diagonal),
/// or a full matrix.
inline Eigen::MatrixXd as_weight(const nlohmann::json& j,
                                 const std::string& path, int dim) {
  if (j.is_number())
    return j.get<double>() *
           Eigen::MatrixXd::Identity(dim, dim);
  require(j.is_array() && !j.empty(), ErrorCode::Schema,
          path + ": expected a scalar, vector, or matrix");
  if (j[0].is_array()) {
    const Eigen::MatrixXd m = as_matrix(j, path);
    require(m.rows() == dim && m.cols() == dim, ErrorCode::Schema,
            path + ": expected a " + std::to_string(dim) + "x" +
                std::to_string(dim) + " matrix");
    return m;
  }
  require(int(j.size()) == dim, ErrorCode::Schema,
          path + ": expected " + std::to_string(dim) + " diagonal entries");
  Eigen::VectorXd d(dim);
  for (int i = 0; i < dim; ++i)
    d(i) = as_number(j[size_t(i)], path + "[" + std::to_string(i) + "]");
  return d.asDiagonal();
}

}  // namespace detail

/// Ground-truth simulator for the scenario's dynamics. Planning and
/// certification never touch the returned matrices; they see trajectory
/// data only.
inline LtiModel make_model(const Scenario& s) {
  if (s.model_kind == "cw_inplane")
    return discretize_zoh(cw_inplane_model(s.mean_motion), s.Ts);
  if (s.model_kind == "double_integrator")
    return discretize_zoh(double_integrator_2d(), s.Ts);
  ContinuousModel cm;
  cm.Ac = s.A;
  cm.Bc = s.B;
  cm.C = s.C;
  return discretize_zoh(cm, s.Ts);
}

/// Build the workspace grid and check every mission endpoint lands in a
/// free cell.
inline GridWorld make_grid(const Scenario& s) {
  GridWorld g = build_grid(s.bounds, s.cell, s.obstacles);
  for (size_t i = 0; i < s.agents.size(); ++i) {
    const std::string who = "agents[" + std::to_string(i) + "]";
    const auto check = [&](const Eigen::Vector2d& p, const char* what) {
      require(p.x() >= g.xmin && p.x() <= g.xmax && p.y() >= g.ymin &&
                  p.y() <= g.ymax,
              ErrorCode::Schema, who + "." + what + ": outside workspace bounds");
      require(g.is_free(cell_of_point(g, p)), ErrorCode::Schema,
              who + "." + what + ": lies in a blocked cell");
    };
    check(s.agents[i].start, "start");
    check(s.agents[i].goal, "goal");
  }
  return g;
}

/// State facets lifted into every certificate, from the scenario's velocity
/// cap. Disabled caps yield empty constraints.
inline StateConstraints scenario_state_caps(const Scenario& s, int n) {
  if (s.velocity_limit <= 0.0 || s.capped_states.empty())
    return StateConstraints{};
  return state_interval_caps(n, s.capped_states, s.velocity_limit);
}

inline PlannerParams scenario_planner_params(const Scenario& s, int n) {
  PlannerParams p;
  p.beta = s.beta;
  p.lambda = s.lambda;
  p.max_iters = s.max_iters;
  p.layer_budget = s.layer_budget;
  p.seed = s.planner_seed;
  p.extra = scenario_state_caps(s, n);
  return p;
}

/// Parse and validate a scenario document, filling defaults. Errors carry
/// the JSON path of the offending field.
inline Scenario parse_scenario(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::Schema,
                std::string("scenario is not valid JSON: ") + e.what());
  }
  require(j.is_object(), ErrorCode::Schema,
          "$: expected a JSON object");

  Scenario s;
  s.name = j.contains("name") && j.at("name").is_string()
               ? j.at("name").get<std::string>()
               : "unnamed";

  const auto& dyn = detail::expect_field(j, "$", "dynamics");
  const auto& kind = detail::expect_field(dyn, "$.dynamics", "kind");
  require(kind.is_string(), ErrorCode::Schema,
          "$.dynamics.kind: expected a string");
  s.model_kind = kind.get<std::string>();
  require(s.model_kind == "cw_inplane" || s.model_kind == "double_integrator" ||
              s.model_kind == "explicit",
          ErrorCode::Schema,
          "$.dynamics.kind: expected cw_inplane, double_integrator, or explicit");
  s.Ts = detail::number_or(dyn, "$.dynamics", "Ts", 30.0);
  require(s.Ts > 0.0, ErrorCode::Schema, "$.dynamics.Ts: must be positive");
  if (s.model_kind == "cw_inplane") {
    s.mean_motion = detail::number_or(dyn, "$.dynamics", "mean_motion", 0.11);
    require(s.mean_motion > 0.0, ErrorCode::Schema,
            "$.dynamics.mean_motion: must be positive");
  } else if (s.model_kind == "explicit") {
    s.A = detail::as_matrix(detail::expect_field(dyn, "$.dynamics", "A"),
                            "$.dynamics.A");
    s.B = detail::as_matrix(detail::expect_field(dyn, "$.dynamics", "B"),
                            "$.dynamics.B");
    s.C = detail::as_matrix(detail::expect_field(dyn, "$.dynamics", "C"),
                            "$.dynamics.C");
    require(s.A.rows() == s.A.cols() && s.B.rows() == s.A.rows() &&
                s.C.cols() == s.A.rows() && s.C.rows() == 2,
            ErrorCode::Schema,
            "$.dynamics: A must be square, B conformable, C must be 2 x n");
  }

  const auto& ws = detail::expect_field(j, "$", "workspace");
  const auto& bounds = detail::expect_field(ws, "$.workspace", "bounds");
  require(bounds.is_array() && bounds.size() == 4, ErrorCode::Schema,
          "$.workspace.bounds: expected [xmin, xmax, ymin, ymax]");
  s.bounds = {detail::as_number(bounds[0], "$.workspace.bounds[0]"),
              detail::as_number(bounds[1], "$.workspace.bounds[1]"),
              detail::as_number(bounds[2], "$.workspace.bounds[2]"),
              detail::as_number(bounds[3], "$.workspace.bounds[3]")};
  s.cell = detail::number_field(ws, "$.workspace", "cell");
  require(s.cell > 0.0, ErrorCode::Schema,
          "$.workspace.cell: must be positive");
  if (ws.contains("obstacles")) {
    const auto& obs = ws.at("obstacles");
    require(obs.is_array(), ErrorCode::Schema,
            "$.workspace.obstacles: expected an array");
    for (size_t i = 0; i < obs.size(); ++i) {
      const std::string path = "$.workspace.obstacles[" + std::to_string(i) + "]";
      const Eigen::Vector2d c =
          detail::as_vec2(detail::expect_field(obs[i], path, "center"),
                          path + ".center");
      const double hw = detail::number_field(obs[i], path, "half_width");
      require(hw > 0.0, ErrorCode::Schema,
              path + ".half_width: must be positive");
      s.obstacles.push_back({c.x() - hw, c.x() + hw, c.y() - hw, c.y() + hw});
    }
  }

  const auto& agents = detail::expect_field(j, "$", "agents");
  require(agents.is_array() && !agents.empty(), ErrorCode::Schema,
          "$.agents: expected a non-empty array");
  for (size_t i = 0; i < agents.size(); ++i) {
    const std::string path = "$.agents[" + std::to_string(i) + "]";
    AgentSpec a;
    a.start = detail::as_vec2(detail::expect_field(agents[i], path, "start"),
                              path + ".start");
    a.goal = detail::as_vec2(detail::expect_field(agents[i], path, "goal"),
                             path + ".goal");
    // Distinct per-agent experiment seeds unless the file says otherwise.
    a.data_seed = std::uint64_t(
        detail::int_or(agents[i], path, "data_seed", int(1000 + i)));
    a.data_samples = detail::int_or(agents[i], path, "data_samples", 20);
    require(a.data_samples > 0, ErrorCode::Schema,
            path + ".data_samples: must be positive");
    a.excitation = detail::number_or(agents[i], path, "excitation", 0.01);
    require(a.excitation > 0.0, ErrorCode::Schema,
            path + ".excitation: must be positive");
    s.agents.push_back(a);
  }

  const nlohmann::json planner =
      j.contains("planner") ? j.at("planner") : nlohmann::json::object();
  s.beta = detail::number_or(planner, "$.planner", "beta", 0.2);
  require(s.beta >= 0.0 && s.beta <= 1.0, ErrorCode::Schema,
          "$.planner.beta: must lie in [0, 1]");
  s.lambda = detail::number_or(planner, "$.planner", "lambda", 0.94);
  require(s.lambda > 0.0 && s.lambda < 1.0, ErrorCode::Schema,
          "$.planner.lambda: must lie in (0, 1)");
  s.max_iters = detail::int_or(planner, "$.planner", "max_iters", 10000);
  s.layer_budget = detail::int_or(planner, "$.planner", "layer_budget", 500);
  require(s.max_iters > 0 && s.layer_budget > 0, ErrorCode::Schema,
          "$.planner: iteration and layer budgets must be positive");
  s.planner_seed =
      std::uint64_t(detail::int_or(planner, "$.planner", "seed", 1));
  s.velocity_limit =
      detail::number_or(planner, "$.planner", "velocity_limit", 2.0);
  if (planner.contains("capped_states")) {
    const auto& cs = planner.at("capped_states");
    require(cs.is_array(), ErrorCode::Schema,
            "$.planner.capped_states: expected an array of state indices");
    for (size_t i = 0; i < cs.size(); ++i) {
      require(cs[i].is_number_integer(), ErrorCode::Schema,
              "$.planner.capped_states[" + std::to_string(i) +
                  "]: expected an integer");
      s.capped_states.push_back(cs[i].get<int>());
    }
  } else {
    s.capped_states = {2, 3};
  }

  const nlohmann::json exec =
      j.contains("exec") ? j.at("exec") : nlohmann::json::object();
  s.exec.r_f = detail::number_or(exec, "$.exec", "r_f", 1.0);
  require(s.exec.r_f > 0.0, ErrorCode::Schema,
          "$.exec.r_f: must be positive");
  s.exec.max_steps = detail::int_or(exec, "$.exec", "max_steps", 5000);
  require(s.exec.max_steps >= 0, ErrorCode::Schema,
          "$.exec.max_steps: must be non-negative");
  s.exec.abort_on_violation =
      detail::bool_or(exec, "$.exec", "abort_on_violation", false);

  const LtiModel model = make_model(s);
  const nlohmann::json base =
      j.contains("baseline") ? j.at("baseline") : nlohmann::json::object();
  s.baseline.enabled = detail::bool_or(base, "$.baseline", "enabled", false);
  s.baseline.weights.Q =
      base.contains("Q")
          ? detail::as_weight(base.at("Q"), "$.baseline.Q", model.n())
          : Eigen::MatrixXd(Eigen::MatrixXd::Identity(model.n(), model.n()));
  s.baseline.weights.R =
      base.contains("R")
          ? detail::as_weight(base.at("R"), "$.baseline.R", model.m())
          : Eigen::MatrixXd(Eigen::MatrixXd::Identity(model.m(), model.m()));
  s.baseline.switch_radius =
      detail::number_or(base, "$.baseline", "switch_radius", 4.0);
  require(s.baseline.switch_radius > 0.0, ErrorCode::Schema,
          "$.baseline.switch_radius: must be positive");

  for (int idx : s.capped_states)
    require(idx >= 0 && idx < model.n(), ErrorCode::Schema,
            "$.planner.capped_states: index out of range for the model");

  make_grid(s);  // validates divisibility and mission endpoints
  return s;
}

namespace detail {

inline nlohmann::ordered_json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace detail

/// Resolved-configuration echo: the scenario as parsed, defaults included,
/// sufficient to replay the run.
inline nlohmann::ordered_json scenario_to_json(const Scenario& s) {
  nlohmann::ordered_json j;
  j["name"] = s.name;
  nlohmann::ordered_json dyn;
  dyn["kind"] = s.model_kind;
  dyn["Ts"] = s.Ts;
  if (s.model_kind == "cw_inplane") dyn["mean_motion"] = s.mean_motion;
  if (s.model_kind == "explicit") {
    dyn["A"] = detail::matrix_json(s.A);
    dyn["B"] = detail::matrix_json(s.B);
    dyn["C"] = detail::matrix_json(s.C);
  }
  j["dynamics"] = std::move(dyn);

  nlohmann::ordered_json ws;
  ws["bounds"] = {s.bounds.xlo, s.bounds.xhi, s.bounds.ylo, s.bounds.yhi};
  ws["cell"] = s.cell;
  nlohmann::ordered_json obs = nlohmann::ordered_json::array();
  for (const Rect& r : s.obstacles) {
    nlohmann::ordered_json o;
    o["center"] = {0.5 * (r.xlo + r.xhi), 0.5 * (r.ylo + r.yhi)};
    o["half_width"] = 0.5 * (r.xhi - r.xlo);
    obs.push_back(std::move(o));
  }
  ws["obstacles"] = std::move(obs);
  j["workspace"] = std::move(ws);

  nlohmann::ordered_json agents = nlohmann::ordered_json::array();
  for (const AgentSpec& a : s.agents) {
    nlohmann::ordered_json aj;
    aj["start"] = {a.start.x(), a.start.y()};
    aj["goal"] = {a.goal.x(), a.goal.y()};
    aj["data_seed"] = a.data_seed;
    aj["data_samples"] = a.data_samples;
    aj["excitation"] = a.excitation;
    agents.push_back(std::move(aj));
  }
  j["agents"] = std::move(agents);

  nlohmann::ordered_json planner;
  planner["beta"] = s.beta;
  planner["lambda"] = s.lambda;
  planner["max_iters"] = s.max_iters;
  planner["layer_budget"] = s.layer_budget;
  planner["seed"] = s.planner_seed;
  planner["velocity_limit"] = s.velocity_limit;
  planner["capped_states"] = s.capped_states;
  j["planner"] = std::move(planner);

  nlohmann::ordered_json exec;
  exec["r_f"] = s.exec.r_f;
  exec["max_steps"] = s.exec.max_steps;
  exec["abort_on_violation"] = s.exec.abort_on_violation;
  j["exec"] = std::move(exec);

  nlohmann::ordered_json base;
  base["enabled"] = s.baseline.enabled;
  base["Q"] = detail::matrix_json(s.baseline.weights.Q);
  base["R"] = detail::matrix_json(s.baseline.weights.R);
  base["switch_radius"] = s.baseline.switch_radius;
  j["baseline"] = std::move(base);
  return j;
}

}  // namespace certiplan
