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
#include <map>
#include <optional>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "certiplan/certificate.hpp"
#include "certiplan/data.hpp"
#include "certiplan/error.hpp"
#include "certiplan/grid.hpp"
#include "certiplan/polytope.hpp"
#include "certiplan/rng.hpp"
#include "certiplan/sdp.hpp"

namespace certiplan {

struct TreeNode {
  Cell cell;
  int parent = -1;  // index into the tree, -1 at the root
  int depth = 0;    // time layer: one-cell moves from the start
  std::optional<Certificate> cert;  // edge certificate into this cell;
                                    // the root carries its hold certificate
  std::optional<OutputEllipsoid> proj;
};

struct PlannerParams {
  double beta = 0.2;      // goal bias
  double lambda = 0.94;   // contraction factor
  int max_iters = 10000;  // sampling iterations per agent
  int layer_budget = 500; // synchronized rounds before giving up (multi)
  uint64_t seed = 0;
  double pullback = kClippedPullback;
  double interior_axial = kInteriorAxial;
  StateConstraints extra;  // optional state facets, e.g. velocity caps
};

struct CertifiedPath {
  std::vector<Cell> cells;                 // c_0 .. c_Nw, start to goal
  std::vector<Eigen::Vector2d> waypoints;  // cell centers
  std::vector<Certificate> edge_certs;     // one per edge, size cells-1
  Certificate root_cert;                   // hold certificate at the start
  Certificate goal_cert;                   // hold certificate at the goal
};

/// One reservation of a cell at a time layer. Start entries pin every start
/// cell at layer 0; Commit entries come from accepted proposals; Wait entries
/// keep a stalled agent's frontier cell booked for the next layer.
struct Reservation {
  Cell cell;
  int agent = 0;
  enum class Kind { Start, Commit, Wait } kind = Kind::Commit;
};

inline const char* to_string(Reservation::Kind k) {
  switch (k) {
    case Reservation::Kind::Start: return "start";
    case Reservation::Kind::Commit: return "commit";
    case Reservation::Kind::Wait: return "wait";
  }
  return "unknown";
}

/// Space-time bookkeeping for synchronized multi-agent growth: per-layer
/// reserved cells, goal cells held from their arrival layer onward, and the
/// committed edges used to reject head-on exchanges against earlier commits.
struct ReservationTable {
  std::map<int, std::vector<Reservation>> layers;

  struct GoalHold {
    int agent = 0;
    Cell cell;
    int from_layer = 0;
  };
  std::vector<GoalHold> goal_holds;

  struct CommittedEdge {
    int layer_to = 0;  // layer at which the head cell is reached
    Cell from;
    Cell to;
  };
  std::vector<CommittedEdge> edges;

  bool reserved(int layer, const Cell& c) const {
    const auto it = layers.find(layer);
    if (it != layers.end())
      for (const Reservation& r : it->second)
        if (r.cell == c) return true;
    for (const GoalHold& gh : goal_holds)
      if (gh.cell == c && layer >= gh.from_layer) return true;
    return false;
  }

  bool edge_committed(int layer_to, const Cell& from, const Cell& to) const {
    for (const CommittedEdge& e : edges)
      if (e.layer_to == layer_to && e.from == from && e.to == to) return true;
    return false;
  }

  void reserve(int layer, const Cell& c, int agent, Reservation::Kind kind) {
    require(!reserved(layer, c), ErrorCode::Internal,
            "double reservation of a cell at a layer");
    layers[layer].push_back({c, agent, kind});
  }
};

/// An edge that passed certification and overlap and now awaits space-time
/// conflict resolution.
struct Proposal {
  int agent = 0;
  Cell c_near;
  Cell c_new;
  int layer = 0;  // depth(c_near) + 1
  Certificate cert;
  int goal_l1 = 0;      // l1 cell distance from c_new to this agent's goal
  int parent_index = 0; // tree index of c_near, for the commit
};

namespace detail {

/// Solves hold and edge certificates against one agent's data, reusing
/// solutions across edges. In error coordinates an envelope's polytope
/// depends only on its facet bounds (the facet normals are fixed), so the
/// cache is keyed by the bound vector; a straight corridor costs one solve
/// however many edges it has.
class CertificateFactory {
 public:
  CertificateFactory(const DataRecord& rec, const Eigen::MatrixXd& T_hat,
                     const Eigen::MatrixXd& C, const PlannerParams& params)
      : rec_(rec), T_hat_(T_hat), C_(C), params_(params) {}

  /// Certificate for the envelope, centered on its attractor's equilibrium.
  /// Empty when the program is infeasible or the solver fails.
  std::optional<Certificate> certify(const MotionEnvelope& env) {
    const SteadyStatePair eq = steady_state(T_hat_, env.attractor);
    Eigen::MatrixXd Fxy;
    Eigen::VectorXd gxy;
    rect_halfspace(env.rect, Fxy, gxy);
    const StateConstraints* extra =
        params_.extra.F.rows() > 0 ? &params_.extra : nullptr;
    const Polytope poly = lift_to_state(Fxy, gxy, eq.x_bar, C_, extra);

    // Equilibrium recovery perturbs the recentered bounds by solver roundoff
    // only, so envelope classes are separated by whole fractions of a cell
    // while cache hits differ at the 1e-13 level.
    for (const CacheEntry& e : cache_)
      if (e.g.size() == poly.g.size() &&
          (e.g - poly.g).cwiseAbs().maxCoeff() <= 1e-9) {
        Certificate cert = e.cert;
        cert.center_state = eq.x_bar;
        cert.center_output = env.attractor;
        return cert;
      }

    const CertificateSolve sol =
        solve_certificate(rec_, poly, params_.lambda, eq.x_bar, env.attractor);
    ++solves_;
    if (sol.status != SolveStatus::Feasible) return std::nullopt;
    cache_.push_back({poly.g, sol.cert});
    return sol.cert;
  }

  int solves() const { return solves_; }

 private:
  struct CacheEntry {
    Eigen::VectorXd g;
    Certificate cert;
  };
  const DataRecord& rec_;
  Eigen::MatrixXd T_hat_;
  Eigen::MatrixXd C_;
  PlannerParams params_;
  std::vector<CacheEntry> cache_;
  int solves_ = 0;
};

/// Goal-biased sample: the goal cell center with probability beta, otherwise
/// a uniform point over the free cells of the workspace.
inline Eigen::Vector2d sample_point(const GridWorld& g, const Cell& goal,
                                    double beta, Rng& rng) {
  if (rng.bernoulli(beta)) return center(g, goal);
  for (int tries = 0; tries < 1000; ++tries) {
    const Eigen::Vector2d p(rng.uniform(g.xmin, g.xmax),
                            rng.uniform(g.ymin, g.ymax));
    if (!g.is_blocked(cell_of_point(g, p))) return p;
  }
  return center(g, goal);  // workspace almost fully blocked
}

inline int nearest_vertex(const std::vector<TreeNode>& tree,
                          const Cell& c_rand) {
  int best = 0;
  int best_d = l1_distance(tree[0].cell, c_rand);
  for (size_t i = 1; i < tree.size(); ++i) {
    const int d = l1_distance(tree[i].cell, c_rand);
    if (d < best_d) {
      best = int(i);
      best_d = d;
    }
  }
  return best;
}

/// Both projected ellipsoids must contain the center of the cell shared by
/// the parent edge's box and the candidate edge's box; skipped when the
/// parent is the tree root.
inline bool overlap_ok(const std::vector<TreeNode>& tree, int parent_index,
                       const OutputEllipsoid& new_proj,
                       const Eigen::Vector2d& c_mid) {
  if (tree[parent_index].parent < 0) return true;
  if (!tree[parent_index].proj || !contains(*tree[parent_index].proj, c_mid))
    return false;
  return contains(new_proj, c_mid);
}

/// One sample-snap-nearest-extend-certify pass. Returns a proposal-shaped
/// candidate or nothing; shared by the single- and multi-agent planners.
inline std::optional<Proposal> grow_candidate(
    const GridWorld& g, const std::vector<TreeNode>& tree,
    const std::unordered_set<Cell, CellHash>& visited, const Cell& goal,
    const PlannerParams& params, CertificateFactory& factory,
    const Eigen::MatrixXd& C, Rng& rng) {
  const Eigen::Vector2d q_rand = sample_point(g, goal, params.beta, rng);
  const Cell c_rand = snap(g, q_rand);
  const int near_index = nearest_vertex(tree, c_rand);
  const Cell c_near = tree[near_index].cell;
  const std::optional<Cell> c_new = best_neighbour(g, c_near, c_rand);
  if (!c_new || visited.count(*c_new)) return std::nullopt;

  const MotionEnvelope env = edge_envelope(g, c_near, *c_new, params.pullback,
                                           params.interior_axial);
  const std::optional<Certificate> cert = factory.certify(env);
  if (!cert) return std::nullopt;

  const OutputEllipsoid proj = project_ellipsoid(*cert, C);
  const Eigen::Vector2d c_mid = center(g, shared_cell(c_near, *c_new));
  if (!overlap_ok(tree, near_index, proj, c_mid)) return std::nullopt;

  Proposal p;
  p.c_near = c_near;
  p.c_new = *c_new;
  p.layer = tree[near_index].depth + 1;
  p.cert = *cert;
  p.goal_l1 = l1_distance(*c_new, goal);
  p.parent_index = near_index;
  return p;
}

inline void commit_node(std::vector<TreeNode>& tree,
                        std::unordered_set<Cell, CellHash>& visited,
                        const Proposal& p, const Eigen::MatrixXd& C) {
  TreeNode node;
  node.cell = p.c_new;
  node.parent = p.parent_index;
  node.depth = p.layer;
  node.cert = p.cert;
  node.proj = project_ellipsoid(p.cert, C);
  tree.push_back(std::move(node));
  visited.insert(p.c_new);
}

inline int find_cell(const std::vector<TreeNode>& tree, const Cell& c) {
  for (size_t i = 0; i < tree.size(); ++i)
    if (tree[i].cell == c) return int(i);
  return -1;
}

inline Certificate certify_hold_or_throw(const GridWorld& g,
                                         CertificateFactory& factory,
                                         const Cell& cell, const char* what) {
  const std::optional<Certificate> cert = factory.certify(hold_envelope(g, cell));
  require(bool(cert), ErrorCode::Numerical,
          std::string("cannot certify the ") + what + " cell");
  return *cert;
}

}  // namespace detail

/// Parent-chain reversal from a goal node: cells, center waypoints, and the
/// edge certificates in root-to-goal order. Hold certificates are attached
/// by the planners.
inline CertifiedPath backtrack(const std::vector<TreeNode>& tree,
                               int goal_index) {
  require(goal_index >= 0 && goal_index < int(tree.size()),
          ErrorCode::Internal, "goal node outside the tree");
  CertifiedPath path;
  int idx = goal_index;
  int guard = 0;
  while (idx >= 0) {
    require(idx < int(tree.size()) && guard++ <= int(tree.size()),
            ErrorCode::Internal, "broken parent chain");
    path.cells.push_back(tree[idx].cell);
    if (tree[idx].parent >= 0) {
      require(bool(tree[idx].cert), ErrorCode::Internal,
              "committed edge is missing its certificate");
      path.edge_certs.push_back(*tree[idx].cert);
    }
    idx = tree[idx].parent;
  }
  std::reverse(path.cells.begin(), path.cells.end());
  std::reverse(path.edge_certs.begin(), path.edge_certs.end());
  return path;
}

inline void attach_waypoints(CertifiedPath& path, const GridWorld& g) {
  path.waypoints.clear();
  for (const Cell& c : path.cells) path.waypoints.push_back(center(g, c));
}

struct SinglePlan {
  CertifiedPath path;
  std::vector<TreeNode> tree;
  int iterations = 0;  // sampling iterations consumed
  int sdp_solves = 0;  // distinct certificate programs solved
};

/// Grow one certified tree until the goal cell joins it. Every accepted edge
/// carries a verified contractive certificate, and consecutive certificates
/// overlap at the shared cell center so execution can hand off safely.
inline SinglePlan plan_single(const GridWorld& g, const Cell& start,
                              const Cell& goal, const DataRecord& rec,
                              const Eigen::MatrixXd& T_hat,
                              const PlannerParams& params) {
  require(g.is_free(start), ErrorCode::Precondition, "start cell is blocked");
  require(g.is_free(goal), ErrorCode::Precondition, "goal cell is blocked");
  require(params.beta >= 0.0 && params.beta <= 1.0, ErrorCode::Precondition,
          "goal bias must lie in [0, 1]");

  // The output map is carried by the record's Y0 = C X0 relation; recover
  // it the same way the steady-state map does.
  const Eigen::MatrixXd pinv = detail::stacked_pseudoinverse(rec);
  const Eigen::MatrixXd C = rec.Y0 * pinv.rightCols(rec.n);

  detail::CertificateFactory factory(rec, T_hat, C, params);
  std::vector<TreeNode> tree;
  std::unordered_set<Cell, CellHash> visited;

  TreeNode root;
  root.cell = start;
  root.parent = -1;
  root.depth = 0;
  root.cert = detail::certify_hold_or_throw(g, factory, start, "start");
  root.proj = project_ellipsoid(*root.cert, C);
  tree.push_back(root);
  visited.insert(start);

  Rng rng(params.seed);
  SinglePlan out;
  int goal_index = (start == goal) ? 0 : -1;
  while (goal_index < 0 && out.iterations < params.max_iters) {
    ++out.iterations;
    const std::optional<Proposal> cand = detail::grow_candidate(
        g, tree, visited, goal, params, factory, C, rng);
    if (!cand) continue;
    detail::commit_node(tree, visited, *cand, C);
    if (cand->c_new == goal) goal_index = int(tree.size()) - 1;
  }
  require(goal_index >= 0, ErrorCode::NoPath,
          "no certified path after " + std::to_string(params.max_iters) +
              " iterations");

  out.path = backtrack(tree, goal_index);
  attach_waypoints(out.path, g);
  out.path.root_cert = *tree[0].cert;
  out.path.goal_cert =
      (start == goal) ? *tree[0].cert
                      : detail::certify_hold_or_throw(g, factory, goal, "goal");
  out.tree = std::move(tree);
  out.sdp_solves = factory.solves();
  return out;
}

/// Prune same-layer proposals against the reservation table and each other:
/// reserved targets are dropped, head-on reversals of already-committed
/// edges are dropped, same-cell duplicates keep the proposal closest to its
/// goal (random tie-break), and head-on swap pairs are resolved by the same
/// rule. Proposals at different layers never conflict.
inline std::vector<Proposal> resolve_conflicts(
    const std::vector<Proposal>& proposals, const ReservationTable& table,
    Rng& rng) {
  std::map<int, std::vector<Proposal>> by_layer;
  for (const Proposal& p : proposals) by_layer[p.layer].push_back(p);

  std::vector<Proposal> accepted;
  for (auto& [layer, group] : by_layer) {
    std::vector<Proposal> alive;
    for (const Proposal& p : group) {
      if (table.reserved(layer, p.c_new)) continue;
      if (table.edge_committed(layer, p.c_new, p.c_near)) continue;
      alive.push_back(p);
    }

    // Same-cell duplicates: keep one per target cell.
    std::vector<bool> dead(alive.size(), false);
    auto keep_of = [&](const std::vector<size_t>& idx) {
      int best_l1 = alive[idx[0]].goal_l1;
      for (size_t i : idx) best_l1 = std::min(best_l1, alive[i].goal_l1);
      std::vector<size_t> tied;
      for (size_t i : idx)
        if (alive[i].goal_l1 == best_l1) tied.push_back(i);
      size_t pick = 0;
      if (tied.size() > 1)
        pick = std::min(tied.size() - 1,
                        size_t(rng.uniform01() * double(tied.size())));
      return tied[pick];
    };
    std::map<std::pair<int, int>, std::vector<size_t>> targets;
    for (size_t i = 0; i < alive.size(); ++i)
      targets[{alive[i].c_new.row, alive[i].c_new.col}].push_back(i);
    for (auto& [cell, idx] : targets) {
      if (idx.size() < 2) continue;
      const size_t keep = keep_of(idx);
      for (size_t i : idx)
        if (i != keep) dead[i] = true;
    }

    // Head-on swaps among the survivors.
    for (size_t i = 0; i < alive.size(); ++i) {
      if (dead[i]) continue;
      for (size_t j = i + 1; j < alive.size(); ++j) {
        if (dead[j]) continue;
        if (alive[i].c_near == alive[j].c_new &&
            alive[i].c_new == alive[j].c_near) {
          const size_t drop = keep_of({i, j}) == i ? j : i;
          dead[drop] = true;
        }
      }
    }

    for (size_t i = 0; i < alive.size(); ++i)
      if (!dead[i]) accepted.push_back(alive[i]);
  }
  return accepted;
}

struct MultiPlan {
  std::vector<CertifiedPath> paths;
  std::vector<std::vector<TreeNode>> trees;
  ReservationTable table;
  int layers = 0;      // synchronized rounds consumed
  int sdp_solves = 0;  // across all agents
};

/// Grow all agents' trees in synchronized rounds against one space-time
/// reservation table. Each round every unfinished agent offers at most one
/// certified edge; survivors of conflict resolution commit atomically, goal
/// arrivals hold their cell from that layer onward, and stalled agents keep
/// their frontier cell booked for the next layer.
inline MultiPlan plan_multi(const GridWorld& g, const std::vector<Cell>& starts,
                            const std::vector<Cell>& goals,
                            const std::vector<DataRecord>& recs,
                            const std::vector<Eigen::MatrixXd>& T_hats,
                            const PlannerParams& params) {
  const size_t na = starts.size();
  require(na >= 1, ErrorCode::Precondition, "need at least one agent");
  require(goals.size() == na && recs.size() == na && T_hats.size() == na,
          ErrorCode::DimensionMismatch,
          "starts, goals, data records, and steady-state maps must align");
  for (size_t i = 0; i < na; ++i) {
    require(g.is_free(starts[i]), ErrorCode::Precondition,
            "agent " + std::to_string(i) + " start cell is blocked");
    require(g.is_free(goals[i]), ErrorCode::Precondition,
            "agent " + std::to_string(i) + " goal cell is blocked");
    for (size_t j = i + 1; j < na; ++j)
      require(!(starts[i] == starts[j]), ErrorCode::Precondition,
              "start cells must be pairwise distinct");
  }

  std::vector<Eigen::MatrixXd> Cs;
  std::vector<detail::CertificateFactory> factories;
  factories.reserve(na);
  for (size_t i = 0; i < na; ++i) {
    const Eigen::MatrixXd pinv = detail::stacked_pseudoinverse(recs[i]);
    Cs.push_back(recs[i].Y0 * pinv.rightCols(recs[i].n));
    factories.emplace_back(recs[i], T_hats[i], Cs[i], params);
  }

  MultiPlan out;
  out.trees.resize(na);
  std::vector<std::unordered_set<Cell, CellHash>> visited(na);
  std::vector<Rng> agent_rngs;
  std::vector<bool> finished(na, false);
  std::vector<Certificate> root_certs(na), goal_certs(na);

  for (size_t i = 0; i < na; ++i) {
    TreeNode root;
    root.cell = starts[i];
    root.parent = -1;
    root.depth = 0;
    root.cert =
        detail::certify_hold_or_throw(g, factories[i], starts[i], "start");
    root.proj = project_ellipsoid(*root.cert, Cs[i]);
    root_certs[i] = *root.cert;
    out.trees[i].push_back(root);
    visited[i].insert(starts[i]);
    agent_rngs.emplace_back(mix_seed(params.seed, uint64_t(i) + 1));
    out.table.reserve(0, starts[i], int(i), Reservation::Kind::Start);
    if (starts[i] == goals[i]) {
      finished[i] = true;
      out.table.goal_holds.push_back({int(i), goals[i], 0});
    }
  }
  Rng conflict_rng(mix_seed(params.seed, 0x7265736f6c766572ull));

  auto all_finished = [&] {
    return std::all_of(finished.begin(), finished.end(),
                       [](bool b) { return b; });
  };

  int round = 0;
  for (; round < params.layer_budget && !all_finished(); ++round) {
    std::vector<Proposal> proposals;
    for (size_t i = 0; i < na; ++i) {
      if (finished[i]) continue;
      std::optional<Proposal> cand = detail::grow_candidate(
          g, out.trees[i], visited[i], goals[i], params, factories[i], Cs[i],
          agent_rngs[i]);
      if (!cand) continue;
      cand->agent = int(i);
      proposals.push_back(std::move(*cand));
    }

    const std::vector<Proposal> accepted =
        resolve_conflicts(proposals, out.table, conflict_rng);

    std::vector<bool> committed(na, false);
    for (const Proposal& p : accepted) {
      detail::commit_node(out.trees[p.agent], visited[p.agent], p,
                          Cs[p.agent]);
      out.table.reserve(p.layer, p.c_new, p.agent, Reservation::Kind::Commit);
      out.table.edges.push_back({p.layer, p.c_near, p.c_new});
      committed[p.agent] = true;
      if (p.c_new == goals[p.agent]) {
        finished[p.agent] = true;
        out.table.goal_holds.push_back({p.agent, p.c_new, p.layer});
      }
    }

    for (size_t i = 0; i < na; ++i) {
      if (finished[i] || committed[i]) continue;
      const Cell frontier = out.trees[i].back().cell;
      if (!out.table.reserved(round + 1, frontier))
        out.table.reserve(round + 1, frontier, int(i),
                          Reservation::Kind::Wait);
    }
  }
  out.layers = round;

  if (!all_finished()) {
    std::string who;
    for (size_t i = 0; i < na; ++i)
      if (!finished[i]) who += (who.empty() ? "" : ", ") + std::to_string(i);
    throw Error(ErrorCode::PartialFailure,
                "agents " + who + " unfinished after " +
                    std::to_string(params.layer_budget) + " layers");
  }

  for (size_t i = 0; i < na; ++i) {
    const int goal_index = detail::find_cell(out.trees[i], goals[i]);
    CertifiedPath path = backtrack(out.trees[i], goal_index);
    attach_waypoints(path, g);
    path.root_cert = root_certs[i];
    path.goal_cert = (starts[i] == goals[i])
                         ? root_certs[i]
                         : detail::certify_hold_or_throw(g, factories[i],
                                                         goals[i], "goal");
    out.paths.push_back(std::move(path));
    out.sdp_solves += factories[i].solves();
  }
  return out;
}

}  // namespace certiplan
