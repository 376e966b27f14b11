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

// Workspace geometry and certified planning: grid construction and snapping
// against exhaustive oracles, motion envelope shapes, tree growth, and the
// space-time conflict rules.

#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include "certiplan/data.hpp"
#include "certiplan/executor.hpp"
#include "certiplan/grid.hpp"
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
  // Seven square fragments, half-width 8 m.
  const double hw = 8.0;
  const std::vector<std::pair<double, double>> centers = {
      {-30, 40}, {-40, -30}, {30, 30}, {40, -20}, {-30, 10}, {10, -30}, {0, 0}};
  std::vector<Rect> out;
  for (const auto& [cx, cy] : centers)
    out.push_back({cx - hw, cx + hw, cy - hw, cy + hw});
  return out;
}

int blocked_count(const GridWorld& g) {
  int n = 0;
  for (const auto v : g.blocked) n += v;
  return n;
}

Certificate dummy_cert() {
  Certificate c;
  c.P = Eigen::Matrix4d::Identity();
  c.S = Eigen::MatrixXd::Zero(20, 4);
  c.K = Eigen::MatrixXd::Zero(2, 4);
  c.G2 = Eigen::MatrixXd::Zero(20, 2);
  c.lambda = 0.94;
  c.center_state = Eigen::Vector4d::Zero();
  c.center_output = Eigen::Vector2d::Zero();
  return c;
}

}  // namespace

TEST_CASE("grid construction partitions the workspace") {
  const GridWorld g = build_grid(kBounds, 10.0, {});
  CHECK(g.rows == 10);
  CHECK(g.cols == 10);
  CHECK(blocked_count(g) == 0);
  CHECK(g.h == 10.0);

  // A workspace that is not a whole number of cells is rejected.
  CHECK_THROWS_AS(build_grid({0.0, 25.0, 0.0, 25.0}, 10.0, {}), Error);
  CHECK_THROWS_AS(build_grid(kBounds, 0.0, {}), Error);
  CHECK_THROWS_AS(build_grid({1.0, 1.0, 0.0, 10.0}, 1.0, {}), Error);
}

TEST_CASE("obstacles block exactly the cells their closed rectangle meets") {
  SECTION("a 16 m square at the origin straddles four cells") {
    const GridWorld g = build_grid(kBounds, 10.0, {{-8, 8, -8, 8}});
    CHECK(blocked_count(g) == 4);
    for (int r = 4; r <= 5; ++r)
      for (int c = 4; c <= 5; ++c) CHECK(g.is_blocked({r, c}));
    CHECK_FALSE(g.is_blocked({3, 4}));
    CHECK_FALSE(g.is_blocked({6, 5}));
  }

  SECTION("an obstacle coinciding with one cell also blocks edge-touching neighbours") {
    // Closed-rectangle contact: touching a boundary already counts, because
    // envelopes are built from whole cells.
    const GridWorld g = build_grid(kBounds, 10.0, {{-10, 0, -10, 0}});
    CHECK(blocked_count(g) == 9);
    for (int r = 3; r <= 5; ++r)
      for (int c = 3; c <= 5; ++c) CHECK(g.is_blocked({r, c}));
  }
}

TEST_CASE("cell centers and rectangles tile the workspace") {
  const GridWorld g = build_grid(kBounds, 10.0, {});
  CHECK((center(g, {0, 0}) - Eigen::Vector2d(-45, -45)).norm() == 0.0);
  CHECK((center(g, {9, 9}) - Eigen::Vector2d(45, 45)).norm() == 0.0);
  CHECK((center(g, {4, 7}) - Eigen::Vector2d(25, -5)).norm() == 0.0);

  // Point symmetry about the origin.
  for (int r = 0; r < 10; ++r)
    for (int c = 0; c < 10; ++c)
      CHECK((center(g, {r, c}) + center(g, {9 - r, 9 - c})).norm() <= 1e-12);

  const Rect cr = cell_rect(g, {0, 0});
  CHECK(cr.xlo == -50.0);
  CHECK(cr.xhi == -40.0);
  CHECK(cr.ylo == -50.0);
  CHECK(cr.yhi == -40.0);
}

TEST_CASE("point-to-cell lookup clamps, snapping finds the nearest free cell") {
  const GridWorld g = build_grid(kBounds, 10.0, debris_field());

  CHECK(cell_of_point(g, {1000, 1000}) == Cell{9, 9});
  CHECK(cell_of_point(g, {-1000, 0}) == Cell{5, 0});
  CHECK(cell_of_point(g, {-45, -45}) == Cell{0, 0});

  SECTION("snapping a free cell center returns its own cell") {
    for (int r = 0; r < 10; ++r)
      for (int c = 0; c < 10; ++c) {
        const Cell cell{r, c};
        if (g.is_blocked(cell)) continue;
        CHECK(snap(g, center(g, cell)) == cell);
      }
  }

  SECTION("snapping agrees with an exhaustive scan everywhere") {
    Rng rng(21);
    for (int trial = 0; trial < 200; ++trial) {
      const Eigen::Vector2d p(rng.uniform(-60, 60), rng.uniform(-60, 60));
      const Cell got = snap(g, p);
      const Cell want = oracles::snap_exhaustive(g, p);
      // Both must name a free cell at the same distance; ties may only be
      // broken toward the earlier row-major cell, which both sides promise.
      CHECK(got == want);
    }
  }

  SECTION("points outside the workspace still snap to a free cell") {
    const Cell s = snap(g, {1000, 1000});
    CHECK(g.is_free(s));
    CHECK(s == oracles::snap_exhaustive(g, {1000, 1000}));
  }
}

TEST_CASE("neighbour enumeration is ordered and boundary-aware") {
  const GridWorld g = build_grid(kBounds, 10.0, {});

  const auto mid = neighbors4(g, {5, 5});
  REQUIRE(mid.size() == 4);
  CHECK(mid[0] == Cell{6, 5});  // north (+row)
  CHECK(mid[1] == Cell{5, 6});  // east (+col)
  CHECK(mid[2] == Cell{4, 5});  // south
  CHECK(mid[3] == Cell{5, 4});  // west

  CHECK(neighbors4(g, {0, 0}).size() == 2);
  CHECK(neighbors4(g, {0, 5}).size() == 3);
  CHECK(neighbors4(g, {9, 9}).size() == 2);
}

TEST_CASE("extension picks the free neighbour nearest the sample") {
  const GridWorld g = build_grid(kBounds, 10.0, {});

  SECTION("clear preference moves toward the target") {
    const auto n = best_neighbour(g, {5, 5}, {9, 5});
    REQUIRE(n.has_value());
    CHECK(*n == Cell{6, 5});
  }

  SECTION("ties keep the earliest direction in fixed order") {
    // Every neighbour of the target cell itself is equally close.
    const auto self_tie = best_neighbour(g, {5, 5}, {5, 5});
    REQUIRE(self_tie.has_value());
    CHECK(*self_tie == Cell{6, 5});  // north wins ties

    // A diagonal target ties north with east; north is enumerated first.
    const auto diag = best_neighbour(g, {5, 5}, {7, 7});
    REQUIRE(diag.has_value());
    CHECK(*diag == Cell{6, 5});
  }

  SECTION("a fully enclosed cell has no extension") {
    // Four small obstacles strictly inside the neighbours of (5, 5).
    const GridWorld walled = build_grid(
        kBounds, 10.0,
        {{3, 7, 13, 17}, {3, 7, -7, -3}, {13, 17, 3, 7}, {-7, -3, 3, 7}});
    REQUIRE(walled.is_free({5, 5}));
    CHECK_FALSE(best_neighbour(walled, {5, 5}, {9, 9}).has_value());
  }
}

TEST_CASE("edge anchoring and the corridor box") {
  CHECK(shared_cell({2, 2}, {2, 3}) == Cell{2, 2});
  CHECK(shared_cell({7, 4}, {6, 4}) == Cell{7, 4});
  CHECK_THROWS_AS(shared_cell({2, 2}, {4, 2}), Error);

  const GridWorld g = build_grid(kBounds, 10.0, {});
  const EdgeBox box = box_halfspace(g, {0, 0}, {0, 1});
  CHECK(box.rect.xlo == -50.0);
  CHECK(box.rect.xhi == -30.0);
  CHECK(box.rect.ylo == -50.0);
  CHECK(box.rect.yhi == -40.0);
  REQUIRE(box.Fxy.rows() == 4);
  for (int r = 0; r < 4; ++r) CHECK(box.Fxy.row(r).norm() == 1.0);
  // Both cell centers satisfy every half-space with margin.
  for (const Cell c : {Cell{0, 0}, Cell{0, 1}}) {
    const Eigen::VectorXd slack = box.g - box.Fxy * center(g, c);
    CHECK(slack.minCoeff() >= 5.0 - 1e-12);
  }
  CHECK_THROWS_AS(box_halfspace(g, {0, 0}, {2, 0}), Error);
}

TEST_CASE("workspace boxes lift to state-error facets around an equilibrium") {
  const GridWorld g = build_grid(kBounds, 10.0, {});
  const EdgeBox box = box_halfspace(g, {0, 0}, {0, 1});
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(2, 4);
  C(0, 0) = 1.0;
  C(1, 1) = 1.0;

  // Hold-style equilibrium at the head cell center (-35, -45).
  Eigen::Vector4d x_bar(-35.0, -45.0, 0.0, 0.0);

  SECTION("bounds are the distances from the equilibrium to the box walls") {
    const Polytope p = lift_to_state(box.Fxy, box.g, x_bar, C);
    REQUIRE(p.q() == 4);
    REQUIRE(p.d() == 4);
    CHECK(p.g(0) == Catch::Approx(5.0));   // +x wall
    CHECK(p.g(1) == Catch::Approx(15.0));  // -x wall, one cell further
    CHECK(p.g(2) == Catch::Approx(5.0));   // +y wall
    CHECK(p.g(3) == Catch::Approx(5.0));   // -y wall
    CHECK(p.g.minCoeff() > 0.0);
  }

  SECTION("velocity caps append recentered state facets") {
    const StateConstraints caps = state_interval_caps(4, {2, 3}, 2.0);
    const Polytope p = lift_to_state(box.Fxy, box.g, x_bar, C, &caps);
    REQUIRE(p.q() == 8);
    for (int r = 4; r < 8; ++r) CHECK(p.g(r) == Catch::Approx(2.0));
  }

  SECTION("an equilibrium outside the box cannot be lifted") {
    CHECK_THROWS_AS(
        lift_to_state(box.Fxy, box.g, Eigen::Vector4d::Zero(), C), Error);
  }

  CHECK_THROWS_AS(state_interval_caps(4, {2, 3}, 0.0), Error);
  CHECK_THROWS_AS(state_interval_caps(4, {7}, 1.0), Error);
}

TEST_CASE("motion envelopes have the documented shapes") {
  const GridWorld g = build_grid(kBounds, 10.0, {{-10, 0, -10, 0}});

  SECTION("hold envelopes cover exactly their cell") {
    const MotionEnvelope e = hold_envelope(g, {0, 0});
    CHECK(e.kind == EnvelopeKind::Hold);
    CHECK((e.attractor - center(g, {0, 0})).norm() == 0.0);
    CHECK(e.rect.xlo == -50.0);
    CHECK(e.rect.xhi == -40.0);
    CHECK_THROWS_AS(hold_envelope(g, {4, 4}), Error);  // blocked cell
  }

  SECTION("a free continuation gives a child-centered interior envelope") {
    const MotionEnvelope e = edge_envelope(g, {0, 0}, {0, 1});
    CHECK(e.kind == EnvelopeKind::Interior);
    CHECK(e.axis_is_x);
    CHECK((e.attractor - center(g, {0, 1})).norm() == 0.0);
    CHECK(e.rect.xlo == Catch::Approx(-35.0 - 15.0));
    CHECK(e.rect.xhi == Catch::Approx(-35.0 + 15.0));
    CHECK(e.rect.ylo == Catch::Approx(-50.0));
    CHECK(e.rect.yhi == Catch::Approx(-40.0));
  }

  SECTION("a blocked continuation pulls the attractor back") {
    // The obstacle blocks rows/cols 3..5. Moving north along column 4, the
    // edge (1, 4) -> (2, 4) would continue into the blocked (3, 4).
    REQUIRE(g.is_free({1, 4}));
    REQUIRE(g.is_free({2, 4}));
    REQUIRE(g.is_blocked({3, 4}));
    const MotionEnvelope e = edge_envelope(g, {1, 4}, {2, 4});
    CHECK(e.kind == EnvelopeKind::Clipped);
    CHECK_FALSE(e.axis_is_x);
    const Eigen::Vector2d expect =
        center(g, {1, 4}) + Eigen::Vector2d(0.0, 6.0);  // 0.6 h forward
    CHECK((e.attractor - expect).norm() <= 1e-12);
    // Axial reach (1.5 - 0.6) h = 9 m each way; lateral half cell.
    CHECK(e.rect.yhi - e.rect.ylo == Catch::Approx(18.0));
    CHECK(e.rect.xhi - e.rect.xlo == Catch::Approx(10.0));
    // The envelope stays inside the two cells of the edge.
    CHECK(e.rect.ylo >= cell_rect(g, {1, 4}).ylo - 1e-12);
    CHECK(e.rect.yhi <= cell_rect(g, {2, 4}).yhi + 1e-12);
  }

  SECTION("an edge leaving the workspace is clipped the same way") {
    const GridWorld free_g = build_grid(kBounds, 10.0, {});
    const MotionEnvelope e = edge_envelope(free_g, {0, 8}, {0, 9});
    CHECK(e.kind == EnvelopeKind::Clipped);
    CHECK(e.rect.xhi <= 50.0 + 1e-12);
  }

  SECTION("shape parameters are validated") {
    const GridWorld free_g = build_grid(kBounds, 10.0, {});
    CHECK_THROWS_AS(edge_envelope(free_g, {0, 0}, {0, 1}, 0.0), Error);
    CHECK_THROWS_AS(edge_envelope(free_g, {0, 0}, {0, 1}, 0.75), Error);
    CHECK_THROWS_AS(edge_envelope(free_g, {0, 0}, {0, 1}, 0.6, 1.0), Error);
    CHECK_THROWS_AS(edge_envelope(free_g, {0, 0}, {0, 1}, 0.6, 1.51), Error);
    CHECK_NOTHROW(edge_envelope(free_g, {0, 0}, {0, 1}, 0.7, 1.4));
    CHECK_THROWS_AS(edge_envelope(free_g, {0, 0}, {2, 0}), Error);
    CHECK_THROWS_AS(edge_envelope(g, {4, 2}, {4, 3}), Error);  // blocked head
  }
}

TEST_CASE("path reconstruction walks the parent chain") {
  std::vector<TreeNode> tree(3);
  tree[0].cell = {0, 0};
  tree[0].parent = -1;
  tree[0].depth = 0;
  tree[1].cell = {0, 1};
  tree[1].parent = 0;
  tree[1].depth = 1;
  tree[1].cert = dummy_cert();
  tree[2].cell = {1, 1};
  tree[2].parent = 1;
  tree[2].depth = 2;
  tree[2].cert = dummy_cert();

  const CertifiedPath chain = backtrack(tree, 2);
  REQUIRE(chain.cells.size() == 3);
  CHECK(chain.cells[0] == Cell{0, 0});
  CHECK(chain.cells[1] == Cell{0, 1});
  CHECK(chain.cells[2] == Cell{1, 1});
  CHECK(chain.edge_certs.size() == 2);

  const CertifiedPath root_only = backtrack(tree, 0);
  CHECK(root_only.cells.size() == 1);
  CHECK(root_only.edge_certs.empty());

  CHECK_THROWS_AS(backtrack(tree, 7), Error);
}

TEST_CASE("single-agent planning on a trivial workspace") {
  const GridWorld g = build_grid({0, 30, 0, 30}, 10.0, {});
  const DataRecord rec = reference_record();
  const Eigen::MatrixXd T_hat = steady_state_map(rec);
  PlannerParams params;
  params.seed = 2;

  SECTION("an adjacent goal is reached with a single certified edge") {
    const SinglePlan plan = plan_single(g, {0, 0}, {0, 1}, rec, T_hat, params);
    REQUIRE(plan.path.cells.size() == 2);
    CHECK(plan.path.cells.front() == Cell{0, 0});
    CHECK(plan.path.cells.back() == Cell{0, 1});
    REQUIRE(plan.path.edge_certs.size() == 1);
    REQUIRE(plan.path.waypoints.size() == 2);
    CHECK((plan.path.waypoints[0] - center(g, {0, 0})).norm() == 0.0);
    CHECK(verify_certificate(plan.path.root_cert, rec).pass);
    CHECK(verify_certificate(plan.path.edge_certs[0], rec).pass);
    CHECK(verify_certificate(plan.path.goal_cert, rec).pass);
    CHECK(plan.sdp_solves >= 1);
    CHECK(plan.iterations >= 1);
  }

  SECTION("planning to the start cell needs no edges") {
    const SinglePlan plan = plan_single(g, {1, 1}, {1, 1}, rec, T_hat, params);
    CHECK(plan.path.cells.size() == 1);
    CHECK(plan.path.edge_certs.empty());
    CHECK(verify_certificate(plan.path.root_cert, rec).pass);
  }

  SECTION("blocked endpoints are rejected up front") {
    const GridWorld blocked =
        build_grid({0, 30, 0, 30}, 10.0, {{22, 28, 22, 28}});
    REQUIRE(blocked.is_blocked({2, 2}));
    CHECK_THROWS_AS(plan_single(blocked, {0, 0}, {2, 2}, rec, T_hat, params),
                    Error);
    CHECK_THROWS_AS(plan_single(blocked, {2, 2}, {0, 0}, rec, T_hat, params),
                    Error);
  }
}

TEST_CASE("planning through the debris field yields a coherent certified path") {
  const GridWorld g = build_grid(kBounds, 10.0, debris_field());
  const DataRecord rec = reference_record();
  const Eigen::MatrixXd T_hat = steady_state_map(rec);
  const Eigen::MatrixXd pinv = detail::stacked_pseudoinverse(rec);
  const Eigen::MatrixXd C = rec.Y0 * pinv.rightCols(4);

  PlannerParams params;
  params.seed = 1;
  params.extra = state_interval_caps(4, {2, 3}, 2.0);

  const SinglePlan plan = plan_single(g, {0, 0}, {9, 9}, rec, T_hat, params);
  REQUIRE(plan.path.cells.size() >= 2);
  CHECK(plan.path.cells.front() == Cell{0, 0});
  CHECK(plan.path.cells.back() == Cell{9, 9});

  // Consecutive cells are edge-adjacent and free.
  for (size_t k = 0; k + 1 < plan.path.cells.size(); ++k) {
    CHECK(l1_distance(plan.path.cells[k], plan.path.cells[k + 1]) == 1);
    CHECK(g.is_free(plan.path.cells[k]));
  }

  // Every certificate on the path re-verifies against the data, and every
  // admissible polytope kept strictly positive bounds.
  CHECK(verify_certificate(plan.path.root_cert, rec).pass);
  CHECK(verify_certificate(plan.path.goal_cert, rec).pass);
  CHECK(plan.path.root_cert.polytope.g.minCoeff() > 0.0);
  CHECK(plan.path.goal_cert.polytope.g.minCoeff() > 0.0);
  for (const Certificate& cert : plan.path.edge_certs) {
    CHECK(verify_certificate(cert, rec).pass);
    CHECK(cert.polytope.g.minCoeff() > 0.0);
  }

  // Consecutive edge ellipsoids overlap at the junction cell center, the
  // committed handoff point; the root hold covers the first waypoint.
  const OutputEllipsoid root_proj = project_ellipsoid(plan.path.root_cert, C);
  CHECK(contains(root_proj, plan.path.waypoints[0]));
  for (size_t k = 1; k < plan.path.edge_certs.size(); ++k) {
    const Eigen::Vector2d junction = plan.path.waypoints[k];
    CHECK(contains(project_ellipsoid(plan.path.edge_certs[k - 1], C),
                   junction));
    CHECK(contains(project_ellipsoid(plan.path.edge_certs[k], C), junction));
  }

  // Tree bookkeeping: depths count edges from the root, parents precede
  // children.
  for (size_t i = 1; i < plan.tree.size(); ++i) {
    const TreeNode& node = plan.tree[i];
    REQUIRE(node.parent >= 0);
    CHECK(node.parent < int(i));
    CHECK(node.depth == plan.tree[size_t(node.parent)].depth + 1);
  }

  // Identical seeds reproduce the identical plan.
  const SinglePlan again = plan_single(g, {0, 0}, {9, 9}, rec, T_hat, params);
  CHECK(again.path.cells == plan.path.cells);
  CHECK(again.iterations == plan.iterations);
}

TEST_CASE("conflict resolution enforces the space-time rules") {
  ReservationTable table;
  Rng rng(5);

  auto proposal = [](int agent, Cell from, Cell to, int layer, int goal_l1) {
    Proposal p;
    p.agent = agent;
    p.c_near = from;
    p.c_new = to;
    p.layer = layer;
    p.cert = dummy_cert();
    p.goal_l1 = goal_l1;
    p.parent_index = 0;
    return p;
  };

  SECTION("disjoint targets all survive") {
    const auto kept = resolve_conflicts({proposal(0, {1, 1}, {1, 2}, 3, 4),
                                         proposal(1, {5, 5}, {5, 6}, 3, 2)},
                                        table, rng);
    CHECK(kept.size() == 2);
  }

  SECTION("a contested cell goes to the agent closer to its goal") {
    const auto kept = resolve_conflicts({proposal(0, {1, 1}, {1, 2}, 3, 5),
                                         proposal(1, {2, 2}, {1, 2}, 3, 3)},
                                        table, rng);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].agent == 1);
  }

  SECTION("head-on swaps leave exactly one survivor") {
    const auto kept = resolve_conflicts({proposal(0, {1, 1}, {1, 2}, 3, 2),
                                         proposal(1, {1, 2}, {1, 1}, 3, 7)},
                                        table, rng);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].agent == 0);  // closer to its goal
  }

  SECTION("reserved cells and reversals of committed edges are off limits") {
    table.reserve(3, {1, 2}, 7, Reservation::Kind::Commit);
    table.edges.push_back({4, {2, 2}, {2, 3}});
    const auto kept =
        resolve_conflicts({proposal(0, {1, 1}, {1, 2}, 3, 2),   // reserved
                           proposal(1, {2, 3}, {2, 2}, 4, 2)},  // reversal
                          table, rng);
    CHECK(kept.empty());
  }

  SECTION("the same cell at different layers is no conflict") {
    const auto kept = resolve_conflicts({proposal(0, {1, 1}, {1, 2}, 3, 4),
                                         proposal(1, {1, 3}, {1, 2}, 4, 4)},
                                        table, rng);
    CHECK(kept.size() == 2);
  }

  SECTION("double-booking a layer cell is an internal fault") {
    ReservationTable t2;
    t2.reserve(1, {0, 0}, 0, Reservation::Kind::Commit);
    try {
      t2.reserve(1, {0, 0}, 1, Reservation::Kind::Commit);
      FAIL("duplicate reservation must throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::Internal);
    }
  }
}

TEST_CASE("synchronized multi-agent planning books space-time exclusively") {
  const GridWorld g = build_grid(kBounds, 10.0, {});
  const DataRecord rec_a = reference_record(7);
  const DataRecord rec_b = reference_record(8);
  const Eigen::MatrixXd T_a = steady_state_map(rec_a);
  const Eigen::MatrixXd T_b = steady_state_map(rec_b);

  PlannerParams params;
  params.seed = 3;
  params.extra = state_interval_caps(4, {2, 3}, 2.0);

  const std::vector<Cell> starts = {{0, 0}, {9, 0}};
  const std::vector<Cell> goals = {{0, 5}, {9, 5}};
  const MultiPlan plan =
      plan_multi(g, starts, goals, {rec_a, rec_b}, {T_a, T_b}, params);

  REQUIRE(plan.paths.size() == 2);
  for (size_t i = 0; i < 2; ++i) {
    CHECK(plan.paths[i].cells.front() == starts[i]);
    CHECK(plan.paths[i].cells.back() == goals[i]);
    for (size_t k = 0; k + 1 < plan.paths[i].cells.size(); ++k)
      CHECK(l1_distance(plan.paths[i].cells[k], plan.paths[i].cells[k + 1]) ==
            1);
  }

  // No layer carries the same cell twice.
  for (const auto& [layer, entries] : plan.table.layers)
    for (size_t i = 0; i < entries.size(); ++i)
      for (size_t j = i + 1; j < entries.size(); ++j)
        CHECK_FALSE(entries[i].cell == entries[j].cell);

  // Both goals are held from their arrival layers.
  CHECK(plan.table.goal_holds.size() == 2);
  CHECK(plan.layers >= 1);
  CHECK(plan.layers <= params.layer_budget);

  // Identical inputs reproduce the identical outcome.
  const MultiPlan again =
      plan_multi(g, starts, goals, {rec_a, rec_b}, {T_a, T_b}, params);
  CHECK(again.paths[0].cells == plan.paths[0].cells);
  CHECK(again.paths[1].cells == plan.paths[1].cells);
  CHECK(again.layers == plan.layers);

  // Duplicate start cells are rejected.
  CHECK_THROWS_AS(plan_multi(g, {{0, 0}, {0, 0}}, goals, {rec_a, rec_b},
                             {T_a, T_b}, params),
                  Error);
}
