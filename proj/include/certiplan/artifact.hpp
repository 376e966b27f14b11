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
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "certiplan/csv.hpp"
#include "certiplan/data.hpp"
#include "certiplan/error.hpp"
#include "certiplan/executor.hpp"
#include "certiplan/planner.hpp"
#include "certiplan/scenario.hpp"

namespace certiplan {

inline constexpr int kArtifactSchemaVersion = 1;

/// Everything produced for one agent by a run: the trajectory data behind
/// its certificates, the certified path and search tree, and the executed
/// traces (certified always, baseline when enabled).
struct AgentArtifact {
  DataRecord record;
  Eigen::MatrixXd T_hat;
  CertifiedPath path;
  std::vector<TreeNode> tree;
  ExecutionTrace trace;
  ViolationStats stats;
  std::optional<ExecutionTrace> baseline_trace;
  std::optional<ViolationStats> baseline_stats;
};

/// Complete run output. The config echo plus the per-agent records are
/// sufficient to replay the run; the reservation table and counters document
/// how the plan was found.
struct RunArtifact {
  nlohmann::ordered_json config;
  std::vector<AgentArtifact> agents;
  ReservationTable table;             // empty when a single agent planned alone
  std::vector<double> min_pairwise;   // per global step, multi-agent only
  std::vector<double> baseline_min_pairwise;
  int sdp_solves = 0;
  int iterations = 0;                 // single-agent sampling iterations
  int layers = 0;                     // multi-agent synchronized rounds
};

namespace detail {

inline nlohmann::ordered_json vector_json(const Eigen::VectorXd& v) {
  nlohmann::ordered_json a = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline nlohmann::ordered_json cell_json(const Cell& c) {
  return nlohmann::ordered_json::array({c.row, c.col});
}

inline Eigen::VectorXd as_vector(const nlohmann::json& j,
                                 const std::string& path) {
  require(j.is_array(), ErrorCode::Schema, path + ": expected an array");
  Eigen::VectorXd v(j.size());
  for (size_t i = 0; i < j.size(); ++i)
    v(Eigen::Index(i)) = as_number(j[i], path + "[" + std::to_string(i) + "]");
  return v;
}

inline Cell as_cell(const nlohmann::json& j, const std::string& path) {
  require(j.is_array() && j.size() == 2 && j[0].is_number_integer() &&
              j[1].is_number_integer(),
          ErrorCode::Schema, path + ": expected [row, col]");
  return {j[0].get<int>(), j[1].get<int>()};
}

inline nlohmann::ordered_json certificate_json(const Certificate& c) {
  nlohmann::ordered_json j;
  j["P"] = matrix_json(c.P);
  j["S"] = matrix_json(c.S);
  j["K"] = matrix_json(c.K);
  j["G2"] = matrix_json(c.G2);
  j["lambda"] = c.lambda;
  j["center_state"] = vector_json(c.center_state);
  j["center_output"] = {c.center_output.x(), c.center_output.y()};
  j["F"] = matrix_json(c.polytope.F);
  j["g"] = vector_json(c.polytope.g);
  return j;
}

inline Certificate certificate_from_json(const nlohmann::json& j,
                                         const std::string& path) {
  Certificate c;
  c.P = as_matrix(expect_field(j, path, "P"), path + ".P");
  c.S = as_matrix(expect_field(j, path, "S"), path + ".S");
  c.K = as_matrix(expect_field(j, path, "K"), path + ".K");
  c.G2 = as_matrix(expect_field(j, path, "G2"), path + ".G2");
  c.lambda = number_field(j, path, "lambda");
  c.center_state = as_vector(expect_field(j, path, "center_state"),
                             path + ".center_state");
  c.center_output = as_vec2(expect_field(j, path, "center_output"),
                            path + ".center_output");
  c.polytope.F = as_matrix(expect_field(j, path, "F"), path + ".F");
  c.polytope.g = as_vector(expect_field(j, path, "g"), path + ".g");
  return c;
}

inline nlohmann::ordered_json path_json(const CertifiedPath& p) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json cells = nlohmann::ordered_json::array();
  for (const Cell& c : p.cells) cells.push_back(cell_json(c));
  j["cells"] = std::move(cells);
  nlohmann::ordered_json wps = nlohmann::ordered_json::array();
  for (const Eigen::Vector2d& w : p.waypoints)
    wps.push_back(nlohmann::ordered_json::array({w.x(), w.y()}));
  j["waypoints"] = std::move(wps);
  j["root_cert"] = certificate_json(p.root_cert);
  nlohmann::ordered_json edges = nlohmann::ordered_json::array();
  for (const Certificate& c : p.edge_certs) edges.push_back(certificate_json(c));
  j["edge_certs"] = std::move(edges);
  j["goal_cert"] = certificate_json(p.goal_cert);
  return j;
}

inline CertifiedPath path_from_json(const nlohmann::json& j,
                                    const std::string& path) {
  CertifiedPath p;
  const auto& cells = expect_field(j, path, "cells");
  require(cells.is_array() && !cells.empty(), ErrorCode::Schema,
          path + ".cells: expected a non-empty array");
  for (size_t i = 0; i < cells.size(); ++i)
    p.cells.push_back(
        as_cell(cells[i], path + ".cells[" + std::to_string(i) + "]"));
  const auto& wps = expect_field(j, path, "waypoints");
  require(wps.is_array() && wps.size() == cells.size(), ErrorCode::Schema,
          path + ".waypoints: expected one waypoint per cell");
  for (size_t i = 0; i < wps.size(); ++i)
    p.waypoints.push_back(
        as_vec2(wps[i], path + ".waypoints[" + std::to_string(i) + "]"));
  p.root_cert = certificate_from_json(expect_field(j, path, "root_cert"),
                                      path + ".root_cert");
  const auto& edges = expect_field(j, path, "edge_certs");
  require(edges.is_array() && edges.size() + 1 == cells.size(),
          ErrorCode::Schema, path + ".edge_certs: expected one per edge");
  for (size_t i = 0; i < edges.size(); ++i)
    p.edge_certs.push_back(certificate_from_json(
        edges[i], path + ".edge_certs[" + std::to_string(i) + "]"));
  p.goal_cert = certificate_from_json(expect_field(j, path, "goal_cert"),
                                      path + ".goal_cert");
  return p;
}

inline nlohmann::ordered_json record_json(const DataRecord& r) {
  nlohmann::ordered_json j;
  j["U0"] = matrix_json(r.U0);
  j["X0"] = matrix_json(r.X0);
  j["X1"] = matrix_json(r.X1);
  j["Y0"] = matrix_json(r.Y0);
  return j;
}

inline DataRecord record_from_json(const nlohmann::json& j,
                                   const std::string& path) {
  DataRecord r;
  r.U0 = as_matrix(expect_field(j, path, "U0"), path + ".U0");
  r.X0 = as_matrix(expect_field(j, path, "X0"), path + ".X0");
  r.X1 = as_matrix(expect_field(j, path, "X1"), path + ".X1");
  r.Y0 = as_matrix(expect_field(j, path, "Y0"), path + ".Y0");
  r.n = int(r.X0.rows());
  r.m = int(r.U0.rows());
  r.N = int(r.U0.cols());
  require(r.X1.rows() == r.n && r.X1.cols() == r.N && r.X0.cols() == r.N &&
              r.Y0.cols() == r.N,
          ErrorCode::Schema, path + ": data record matrices disagree");
  return r;
}

inline Reservation::Kind reservation_kind_from_string(const std::string& s,
                                                      const std::string& path) {
  if (s == "start") return Reservation::Kind::Start;
  if (s == "commit") return Reservation::Kind::Commit;
  if (s == "wait") return Reservation::Kind::Wait;
  throw Error(ErrorCode::Schema, path + ": unknown reservation kind " + s);
}

inline nlohmann::ordered_json table_json(const ReservationTable& t) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json layers = nlohmann::ordered_json::array();
  for (const auto& [layer, entries] : t.layers) {
    nlohmann::ordered_json lj;
    lj["layer"] = layer;
    nlohmann::ordered_json ej = nlohmann::ordered_json::array();
    for (const Reservation& r : entries) {
      nlohmann::ordered_json rj;
      rj["cell"] = cell_json(r.cell);
      rj["agent"] = r.agent;
      rj["kind"] = to_string(r.kind);
      ej.push_back(std::move(rj));
    }
    lj["entries"] = std::move(ej);
    layers.push_back(std::move(lj));
  }
  j["layers"] = std::move(layers);
  nlohmann::ordered_json holds = nlohmann::ordered_json::array();
  for (const auto& h : t.goal_holds) {
    nlohmann::ordered_json hj;
    hj["agent"] = h.agent;
    hj["cell"] = cell_json(h.cell);
    hj["from_layer"] = h.from_layer;
    holds.push_back(std::move(hj));
  }
  j["goal_holds"] = std::move(holds);
  nlohmann::ordered_json edges = nlohmann::ordered_json::array();
  for (const auto& e : t.edges) {
    nlohmann::ordered_json ej;
    ej["layer_to"] = e.layer_to;
    ej["from"] = cell_json(e.from);
    ej["to"] = cell_json(e.to);
    edges.push_back(std::move(ej));
  }
  j["edges"] = std::move(edges);
  return j;
}

inline ReservationTable table_from_json(const nlohmann::json& j,
                                        const std::string& path) {
  ReservationTable t;
  const auto& layers = expect_field(j, path, "layers");
  require(layers.is_array(), ErrorCode::Schema,
          path + ".layers: expected an array");
  for (size_t i = 0; i < layers.size(); ++i) {
    const std::string lp = path + ".layers[" + std::to_string(i) + "]";
    const int layer = int_or(layers[i], lp, "layer", 0);
    const auto& entries = expect_field(layers[i], lp, "entries");
    for (size_t k = 0; k < entries.size(); ++k) {
      const std::string ep = lp + ".entries[" + std::to_string(k) + "]";
      Reservation r;
      r.cell = as_cell(expect_field(entries[k], ep, "cell"), ep + ".cell");
      r.agent = int_or(entries[k], ep, "agent", 0);
      const auto& kind = expect_field(entries[k], ep, "kind");
      require(kind.is_string(), ErrorCode::Schema, ep + ".kind: expected a string");
      r.kind = reservation_kind_from_string(kind.get<std::string>(), ep + ".kind");
      t.layers[layer].push_back(r);
    }
  }
  const auto& holds = expect_field(j, path, "goal_holds");
  for (size_t i = 0; i < holds.size(); ++i) {
    const std::string hp = path + ".goal_holds[" + std::to_string(i) + "]";
    ReservationTable::GoalHold h;
    h.agent = int_or(holds[i], hp, "agent", 0);
    h.cell = as_cell(expect_field(holds[i], hp, "cell"), hp + ".cell");
    h.from_layer = int_or(holds[i], hp, "from_layer", 0);
    t.goal_holds.push_back(h);
  }
  const auto& edges = expect_field(j, path, "edges");
  for (size_t i = 0; i < edges.size(); ++i) {
    const std::string ep = path + ".edges[" + std::to_string(i) + "]";
    ReservationTable::CommittedEdge e;
    e.layer_to = int_or(edges[i], ep, "layer_to", 0);
    e.from = as_cell(expect_field(edges[i], ep, "from"), ep + ".from");
    e.to = as_cell(expect_field(edges[i], ep, "to"), ep + ".to");
    t.edges.push_back(e);
  }
  return t;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::Io, "cannot open for writing: " + path);
  out << text;
  require(out.good(), ErrorCode::Io, "write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::Io, "cannot open for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

/// The plan document: config echo, per-agent data record, certified path,
/// and search tree, plus the reservation table and planner counters. Runs
/// with the same scenario produce byte-identical documents.
inline nlohmann::ordered_json plan_to_json(const RunArtifact& art) {
  nlohmann::ordered_json j;
  j["schema_version"] = kArtifactSchemaVersion;
  j["config"] = art.config;
  nlohmann::ordered_json agents = nlohmann::ordered_json::array();
  for (const AgentArtifact& a : art.agents) {
    nlohmann::ordered_json aj;
    aj["record"] = detail::record_json(a.record);
    aj["T_hat"] = detail::matrix_json(a.T_hat);
    aj["path"] = detail::path_json(a.path);
    nlohmann::ordered_json tj = nlohmann::ordered_json::array();
    for (const TreeNode& t : a.tree) {
      nlohmann::ordered_json nj;
      nj["cell"] = detail::cell_json(t.cell);
      nj["parent"] = t.parent;
      nj["depth"] = t.depth;
      tj.push_back(std::move(nj));
    }
    aj["tree"] = std::move(tj);
    agents.push_back(std::move(aj));
  }
  j["agents"] = std::move(agents);
  j["reservations"] = detail::table_json(art.table);
  nlohmann::ordered_json counters;
  counters["sdp_solves"] = art.sdp_solves;
  counters["iterations"] = art.iterations;
  counters["layers"] = art.layers;
  j["counters"] = std::move(counters);
  return j;
}

/// The summary document: per-agent execution outcomes for the certified
/// controller and, when enabled, the baseline, plus pairwise separation.
/// Timing never appears here; it lives in the run metadata file.
inline nlohmann::ordered_json summary_to_json(const RunArtifact& art) {
  const auto outcome = [](const ExecutionTrace& tr, const ViolationStats& st) {
    nlohmann::ordered_json o;
    o["steps"] = tr.states.size();
    if (tr.finished_step)
      o["finished_step"] = *tr.finished_step;
    else
      o["finished_step"] = nullptr;
    o["aborted"] = tr.aborted;
    o["timed_out"] = tr.timed_out;
    o["violating_segments"] = st.violating_segments;
    o["total_segments"] = st.total_segments;
    o["violation_percent"] = st.percent;
    o["max_input_norm"] = tr.max_input_norm;
    nlohmann::ordered_json fin = nlohmann::ordered_json::array();
    if (tr.final_state.size() > 0)
      for (Eigen::Index i = 0; i < tr.final_state.size(); ++i)
        fin.push_back(tr.final_state(i));
    o["final_state"] = std::move(fin);
    return o;
  };

  nlohmann::ordered_json j;
  j["schema_version"] = kArtifactSchemaVersion;
  j["scenario"] = art.config.contains("name") ? art.config.at("name")
                                              : nlohmann::ordered_json("unnamed");
  nlohmann::ordered_json agents = nlohmann::ordered_json::array();
  for (const AgentArtifact& a : art.agents) {
    nlohmann::ordered_json aj;
    aj["certified"] = outcome(a.trace, a.stats);
    if (a.baseline_trace && a.baseline_stats)
      aj["baseline"] = outcome(*a.baseline_trace, *a.baseline_stats);
    else
      aj["baseline"] = nullptr;
    agents.push_back(std::move(aj));
  }
  j["agents"] = std::move(agents);
  const auto series_min = [](const std::vector<double>& v) {
    nlohmann::ordered_json out = nullptr;
    for (double d : v)
      if (out.is_null() || d < out.get<double>()) out = d;
    return out;
  };
  j["min_pairwise_distance"] = series_min(art.min_pairwise);
  j["baseline_min_pairwise_distance"] = series_min(art.baseline_min_pairwise);
  return j;
}

/// One row per control step: the state, its output, the applied input, the
/// active segment, and the membership value against that segment's
/// ellipsoid.
inline std::string trace_to_csv(const ExecutionTrace& tr) {
  std::ostringstream out;
  const int n = tr.states.empty() ? 0 : int(tr.states.front().size());
  const int m = tr.inputs.empty() ? 0 : int(tr.inputs.front().size());
  out << "step";
  for (int i = 0; i < n; ++i) out << ",x" << i;
  out << ",y0,y1";
  for (int i = 0; i < m; ++i) out << ",u" << i;
  out << ",segment,membership\n";
  for (size_t k = 0; k < tr.states.size(); ++k) {
    out << k;
    for (int i = 0; i < n; ++i) out << ',' << format_double(tr.states[k](i));
    out << ',' << format_double(tr.outputs[k].x()) << ','
        << format_double(tr.outputs[k].y());
    for (int i = 0; i < m; ++i) out << ',' << format_double(tr.inputs[k](i));
    out << ',' << tr.active_segment[k] << ','
        << format_double(tr.membership[k]) << '\n';
  }
  return out.str();
}

/// A trace read back from disk: named columns over a numeric table.
struct TraceTable {
  std::vector<std::string> columns;
  Eigen::MatrixXd data;

  Eigen::Index column(const std::string& name) const {
    for (size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return Eigen::Index(i);
    throw Error(ErrorCode::Schema, "trace has no column " + name);
  }
};

inline TraceTable read_trace_csv(const std::string& path) {
  const std::string text = detail::read_text_file(path);
  std::istringstream in(text);
  std::string header;
  require(bool(std::getline(in, header)), ErrorCode::Io,
          "empty trace file: " + path);
  TraceTable t;
  {
    std::stringstream hs(header);
    std::string name;
    while (std::getline(hs, name, ',')) t.columns.push_back(name);
  }
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) row.push_back(std::stod(field));
    require(row.size() == t.columns.size(), ErrorCode::Io,
            "ragged trace row in " + path);
    rows.push_back(std::move(row));
  }
  t.data.resize(Eigen::Index(rows.size()), Eigen::Index(t.columns.size()));
  for (Eigen::Index r = 0; r < t.data.rows(); ++r)
    for (Eigen::Index c = 0; c < t.data.cols(); ++c)
      t.data(r, c) = rows[size_t(r)][size_t(c)];
  return t;
}

/// File names inside a run directory.
inline std::string plan_file(const std::string& dir) { return dir + "/plan.json"; }
inline std::string summary_file(const std::string& dir) {
  return dir + "/summary.json";
}
inline std::string trace_file(const std::string& dir, size_t agent,
                              bool baseline) {
  return dir + "/trace_" + (baseline ? "baseline_" : "") + "agent" +
         std::to_string(agent) + ".csv";
}
inline std::string meta_file(const std::string& dir) {
  return dir + "/run_meta.json";
}

/// Write the replayable artifacts: plan, summary, and per-agent traces.
/// Everything written here is a pure function of the scenario.
inline void write_artifacts(const RunArtifact& art, const std::string& dir) {
  detail::write_text_file(plan_file(dir), plan_to_json(art).dump(2) + "\n");
  detail::write_text_file(summary_file(dir), summary_to_json(art).dump(2) + "\n");
  for (size_t i = 0; i < art.agents.size(); ++i) {
    detail::write_text_file(trace_file(dir, i, false),
                            trace_to_csv(art.agents[i].trace));
    if (art.agents[i].baseline_trace)
      detail::write_text_file(trace_file(dir, i, true),
                              trace_to_csv(*art.agents[i].baseline_trace));
  }
}

/// A plan document read back for verification or rendering. Traces are
/// loaded separately from their CSV files.
struct LoadedAgent {
  DataRecord record;
  Eigen::MatrixXd T_hat;
  CertifiedPath path;
  std::vector<TreeNode> tree;
};

struct LoadedPlan {
  nlohmann::ordered_json config;
  Scenario scenario;
  std::vector<LoadedAgent> agents;
  ReservationTable table;
};

inline LoadedPlan load_plan(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::Schema,
                std::string("plan is not valid JSON: ") + e.what());
  }
  require(j.is_object(), ErrorCode::Schema, "$: expected a JSON object");
  const int version = detail::int_or(j, "$", "schema_version", -1);
  require(version == kArtifactSchemaVersion, ErrorCode::Schema,
          "$.schema_version: unsupported version " + std::to_string(version));

  LoadedPlan plan;
  plan.config = detail::expect_field(j, "$", "config");
  plan.scenario = parse_scenario(plan.config.dump());

  const auto& agents = detail::expect_field(j, "$", "agents");
  require(agents.is_array() && !agents.empty(), ErrorCode::Schema,
          "$.agents: expected a non-empty array");
  for (size_t i = 0; i < agents.size(); ++i) {
    const std::string ap = "$.agents[" + std::to_string(i) + "]";
    LoadedAgent a;
    a.record = detail::record_from_json(
        detail::expect_field(agents[i], ap, "record"), ap + ".record");
    a.T_hat = detail::as_matrix(detail::expect_field(agents[i], ap, "T_hat"),
                                ap + ".T_hat");
    a.path = detail::path_from_json(detail::expect_field(agents[i], ap, "path"),
                                    ap + ".path");
    const auto& tree = detail::expect_field(agents[i], ap, "tree");
    require(tree.is_array(), ErrorCode::Schema, ap + ".tree: expected an array");
    for (size_t k = 0; k < tree.size(); ++k) {
      const std::string tp = ap + ".tree[" + std::to_string(k) + "]";
      TreeNode node;
      node.cell = detail::as_cell(detail::expect_field(tree[k], tp, "cell"),
                                  tp + ".cell");
      node.parent = detail::int_or(tree[k], tp, "parent", -1);
      node.depth = detail::int_or(tree[k], tp, "depth", 0);
      a.tree.push_back(std::move(node));
    }
    plan.agents.push_back(std::move(a));
  }
  plan.table = detail::table_from_json(
      detail::expect_field(j, "$", "reservations"), "$.reservations");
  return plan;
}

/// Output map recovered from an agent's stored data, for projecting
/// certificates when rendering a loaded plan.
inline Eigen::MatrixXd recover_output_map(const DataRecord& rec) {
  const Eigen::MatrixXd pinv = detail::stacked_pseudoinverse(rec);
  return rec.Y0 * pinv.rightCols(rec.n);
}

}  // namespace certiplan
