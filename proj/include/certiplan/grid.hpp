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
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "certiplan/error.hpp"
#include "certiplan/polytope.hpp"

namespace certiplan {

/// Grid coordinates: col indexes the x axis, row indexes the y axis, both
/// counted from the lower-left corner of the workspace.
struct Cell {
  int row = 0;
  int col = 0;

  bool operator==(const Cell& o) const { return row == o.row && col == o.col; }
  bool operator!=(const Cell& o) const { return !(*this == o); }
};

struct CellHash {
  size_t operator()(const Cell& c) const {
    return std::hash<int64_t>()((int64_t(c.row) << 32) ^ uint32_t(c.col));
  }
};

/// Axis-aligned rectangle in workspace coordinates.
struct Rect {
  double xlo = 0.0, xhi = 0.0, ylo = 0.0, yhi = 0.0;

  bool intersects_closed(const Rect& o) const {
    return xlo <= o.xhi && o.xlo <= xhi && ylo <= o.yhi && o.ylo <= yhi;
  }
};

struct GridWorld {
  double xmin = 0.0, xmax = 0.0, ymin = 0.0, ymax = 0.0;
  double h = 0.0;  // cell edge length
  int rows = 0, cols = 0;
  std::vector<uint8_t> blocked;  // row-major

  bool in_bounds(const Cell& c) const {
    return c.row >= 0 && c.row < rows && c.col >= 0 && c.col < cols;
  }
  bool is_blocked(const Cell& c) const {
    return blocked[size_t(c.row) * cols + c.col] != 0;
  }
  bool is_free(const Cell& c) const { return in_bounds(c) && !is_blocked(c); }
};

inline Eigen::Vector2d center(const GridWorld& g, const Cell& c) {
  return {g.xmin + (c.col + 0.5) * g.h, g.ymin + (c.row + 0.5) * g.h};
}

inline Rect cell_rect(const GridWorld& g, const Cell& c) {
  return {g.xmin + c.col * g.h, g.xmin + (c.col + 1) * g.h,
          g.ymin + c.row * g.h, g.ymin + (c.row + 1) * g.h};
}

/// Partition the workspace into h-cells and mark every cell whose closed
/// rectangle meets a closed obstacle rectangle as blocked. An obstacle
/// touching only a cell edge still blocks the cell; planned motion envelopes
/// are built from whole cells, so boundary contact already means contact.
inline GridWorld build_grid(const Rect& bounds, double h,
                            const std::vector<Rect>& obstacles) {
  require(h > 0.0, ErrorCode::Precondition, "cell size must be positive");
  require(bounds.xhi > bounds.xlo && bounds.yhi > bounds.ylo,
          ErrorCode::Precondition, "workspace bounds are empty");
  const double wx = bounds.xhi - bounds.xlo;
  const double wy = bounds.yhi - bounds.ylo;
  const int cols = int(std::round(wx / h));
  const int rows = int(std::round(wy / h));
  require(cols >= 1 && rows >= 1 && std::abs(cols * h - wx) < 1e-9 * wx &&
              std::abs(rows * h - wy) < 1e-9 * wy,
          ErrorCode::Precondition, "workspace must be a whole number of cells");

  GridWorld g;
  g.xmin = bounds.xlo;
  g.xmax = bounds.xhi;
  g.ymin = bounds.ylo;
  g.ymax = bounds.yhi;
  g.h = h;
  g.rows = rows;
  g.cols = cols;
  g.blocked.assign(size_t(rows) * cols, 0);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const Rect cr = cell_rect(g, {r, c});
      for (const Rect& ob : obstacles)
        if (cr.intersects_closed(ob)) {
          g.blocked[size_t(r) * cols + c] = 1;
          break;
        }
    }
  return g;
}

/// Cell containing a point, clamped to the grid; no freeness requirement.
inline Cell cell_of_point(const GridWorld& g, const Eigen::Vector2d& p) {
  int col = int(std::floor((p.x() - g.xmin) / g.h));
  int row = int(std::floor((p.y() - g.ymin) / g.h));
  col = std::max(0, std::min(g.cols - 1, col));
  row = std::max(0, std::min(g.rows - 1, row));
  return {row, col};
}

/// Nearest free cell to a point, by distance to cell centers; ties keep the
/// first cell in row-major order.
inline Cell snap(const GridWorld& g, const Eigen::Vector2d& p) {
  Cell best{-1, -1};
  double best_d2 = 0.0;
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c < g.cols; ++c) {
      const Cell cand{r, c};
      if (g.is_blocked(cand)) continue;
      const double d2 = (center(g, cand) - p).squaredNorm();
      if (best.row < 0 || d2 < best_d2) {
        best = cand;
        best_d2 = d2;
      }
    }
  require(best.row >= 0, ErrorCode::NoPath, "grid has no free cell");
  return best;
}

/// The four edge-adjacent neighbours in fixed north, east, south, west order
/// (+row, +col, -row, -col); out-of-bounds neighbours are omitted.
inline std::vector<Cell> neighbors4(const GridWorld& g, const Cell& c) {
  const std::array<Cell, 4> cand{Cell{c.row + 1, c.col}, Cell{c.row, c.col + 1},
                                 Cell{c.row - 1, c.col}, Cell{c.row, c.col - 1}};
  std::vector<Cell> out;
  for (const Cell& x : cand)
    if (g.in_bounds(x)) out.push_back(x);
  return out;
}

inline int l1_distance(const Cell& a, const Cell& b) {
  return std::abs(a.row - b.row) + std::abs(a.col - b.col);
}

/// Free neighbour of c_near closest to c_rand in the l1 cell metric; ties
/// keep the earliest in north, east, south, west order; empty when every
/// neighbour is blocked or out of bounds.
inline std::optional<Cell> best_neighbour(const GridWorld& g,
                                          const Cell& c_near,
                                          const Cell& c_rand) {
  std::optional<Cell> best;
  int best_d = 0;
  for (const Cell& c : neighbors4(g, c_near)) {
    if (g.is_blocked(c)) continue;
    const int d = l1_distance(c, c_rand);
    if (!best || d < best_d) {
      best = c;
      best_d = d;
    }
  }
  return best;
}

/// The cell both motion envelopes of an edge a -> b are anchored to when
/// testing reservation overlap; for an adjacent pair that is the tail cell a.
inline Cell shared_cell(const Cell& a, const Cell& b) {
  require(l1_distance(a, b) == 1, ErrorCode::Precondition,
          "cells are not edge-adjacent");
  return a;
}

/// Axis-aligned rectangle as four output-space half-spaces
/// (+x, -x, +y, -y rows).
inline void rect_halfspace(const Rect& r, Eigen::MatrixXd& Fxy,
                           Eigen::VectorXd& g) {
  Fxy = Eigen::MatrixXd::Zero(4, 2);
  g.resize(4);
  Fxy(0, 0) = 1.0;
  g(0) = r.xhi;
  Fxy(1, 0) = -1.0;
  g(1) = -r.xlo;
  Fxy(2, 1) = 1.0;
  g(2) = r.yhi;
  Fxy(3, 1) = -1.0;
  g(3) = -r.ylo;
}

struct EdgeBox {
  Eigen::MatrixXd Fxy;  // 4 x 2, rows +x, -x, +y, -y
  Eigen::VectorXd g;    // rectangle bounds in workspace coordinates
  Rect rect;
};

/// Smallest axis-aligned rectangle covering the two cells of an edge, in
/// half-space form.
inline EdgeBox box_halfspace(const GridWorld& g, const Cell& a,
                             const Cell& b) {
  require(l1_distance(a, b) == 1, ErrorCode::Precondition,
          "cells are not edge-adjacent");
  const Rect ra = cell_rect(g, a);
  const Rect rb = cell_rect(g, b);
  EdgeBox box;
  box.rect = {std::min(ra.xlo, rb.xlo), std::max(ra.xhi, rb.xhi),
              std::min(ra.ylo, rb.ylo), std::max(ra.yhi, rb.yhi)};
  rect_halfspace(box.rect, box.Fxy, box.g);
  return box;
}

/// Extra facets stated directly on the state error, appended verbatim when
/// lifting an output-space box. Used to cap velocity coordinates, which the
/// output map does not see.
struct StateConstraints {
  Eigen::MatrixXd F;  // q_extra x n
  Eigen::VectorXd g;  // q_extra
};

/// Symmetric bounds |e_i| <= cap for each listed state index.
inline StateConstraints state_interval_caps(int n,
                                            const std::vector<int>& indices,
                                            double cap) {
  require(cap > 0.0, ErrorCode::Precondition, "cap must be positive");
  StateConstraints sc;
  sc.F = Eigen::MatrixXd::Zero(2 * Eigen::Index(indices.size()), n);
  sc.g = Eigen::VectorXd::Constant(2 * Eigen::Index(indices.size()), cap);
  for (size_t i = 0; i < indices.size(); ++i) {
    require(indices[i] >= 0 && indices[i] < n, ErrorCode::Precondition,
            "state index out of range");
    sc.F(2 * i, indices[i]) = 1.0;
    sc.F(2 * i + 1, indices[i]) = -1.0;
  }
  return sc;
}

/// Re-express workspace half-spaces Fxy * y <= g as state-error facets
/// around the equilibrium x_bar: rows become (Fxy C) e <= g - Fxy (C x_bar).
/// The equilibrium output must lie strictly inside the box so that every
/// lifted bound stays positive. Extra state-space facets are recentered the
/// same way, g_extra - F_extra x_bar.
inline Polytope lift_to_state(const Eigen::MatrixXd& Fxy,
                              const Eigen::VectorXd& g,
                              const Eigen::VectorXd& x_bar,
                              const Eigen::MatrixXd& C,
                              const StateConstraints* extra = nullptr) {
  require(Fxy.cols() == 2 && C.rows() == 2, ErrorCode::DimensionMismatch,
          "output half-spaces must be planar");
  require(C.cols() == x_bar.size(), ErrorCode::DimensionMismatch,
          "output map and equilibrium disagree on state dimension");
  const Eigen::Vector2d y_bar = C * x_bar;
  const int q0 = int(Fxy.rows());
  const int qe = extra ? int(extra->F.rows()) : 0;
  Eigen::MatrixXd F(q0 + qe, C.cols());
  Eigen::VectorXd gg(q0 + qe);
  for (int r = 0; r < q0; ++r) {
    F.row(r) = Fxy.row(r) * C;
    gg(r) = g(r) - Fxy.row(r).dot(y_bar);
    require(gg(r) > 0.0, ErrorCode::Precondition,
            "equilibrium output is not strictly inside the box");
  }
  if (extra) {
    require(extra->F.cols() == C.cols(), ErrorCode::DimensionMismatch,
            "extra facets have the wrong state dimension");
    F.bottomRows(qe) = extra->F;
    gg.tail(qe) = extra->g - extra->F * x_bar;
  }
  return make_polytope(F, gg);
}

/// How an edge's motion envelope was shaped: Interior edges extend half a
/// cell past the head cell into a free continuation cell; Clipped edges pull
/// the attractor back toward the tail so the envelope stays inside the two
/// cells of the edge. Hold envelopes cover a single cell.
enum class EnvelopeKind { Hold, Interior, Clipped };

inline const char* to_string(EnvelopeKind k) {
  switch (k) {
    case EnvelopeKind::Hold: return "hold";
    case EnvelopeKind::Interior: return "interior";
    case EnvelopeKind::Clipped: return "clipped";
  }
  return "unknown";
}

struct MotionEnvelope {
  EnvelopeKind kind = EnvelopeKind::Hold;
  bool axis_is_x = false;          // meaningful for edges
  Eigen::Vector2d attractor;       // intended settling output, box center
  Rect rect;                       // certified output-space region
};

/// Fraction of a cell the attractor of a clipped edge advances past the tail
/// center. Must stay below ~0.74 so the envelope keeps the tail center
/// strictly inside, and high enough that the remaining gap to the head
/// center is covered by the hold envelope that follows.
inline constexpr double kClippedPullback = 0.6;

/// Axial half-length of an interior edge envelope, in cells. Must exceed
/// 1.0 so the certified region reaches back over the tail center (the
/// handoff into the edge starts there) and must not exceed 1.5 so the
/// envelope stays inside the free tail, head, and continuation cells. The
/// slack above 1.0 is deliberately small: the certified sets should wrap
/// the transit corridor tightly, so that straying controllers register as
/// violations instead of being absorbed by slack.
inline constexpr double kInteriorAxial = 1.5;

inline MotionEnvelope hold_envelope(const GridWorld& g, const Cell& c) {
  require(g.is_free(c), ErrorCode::Precondition, "hold cell must be free");
  MotionEnvelope e;
  e.kind = EnvelopeKind::Hold;
  e.attractor = center(g, c);
  e.rect = cell_rect(g, c);
  return e;
}

/// Motion envelope for the edge c_near -> c_new. When the continuation cell
/// one step past c_new is free the envelope spans all three cells and the
/// attractor sits at the head center; otherwise the envelope is confined to
/// the edge's own two cells with the attractor pulled back, which keeps the
/// certified region away from whatever blocks the continuation.
inline MotionEnvelope edge_envelope(const GridWorld& g, const Cell& c_near,
                                    const Cell& c_new,
                                    double pullback = kClippedPullback,
                                    double interior_axial = kInteriorAxial) {
  require(l1_distance(c_near, c_new) == 1, ErrorCode::Precondition,
          "edge cells must be adjacent");
  require(g.is_free(c_near) && g.is_free(c_new), ErrorCode::Precondition,
          "edge cells must be free");
  require(pullback > 0.0 && pullback < 0.75, ErrorCode::Precondition,
          "pullback fraction out of range");
  require(interior_axial > 1.0 && interior_axial <= 1.5,
          ErrorCode::Precondition, "interior axial extent out of range");
  const int drow = c_new.row - c_near.row;
  const int dcol = c_new.col - c_near.col;
  const Cell continuation{c_new.row + drow, c_new.col + dcol};

  MotionEnvelope e;
  e.axis_is_x = (dcol != 0);
  const Eigen::Vector2d dir{double(dcol), double(drow)};
  double axial;
  if (g.is_free(continuation)) {
    e.kind = EnvelopeKind::Interior;
    e.attractor = center(g, c_new);
    axial = interior_axial * g.h;
  } else {
    e.kind = EnvelopeKind::Clipped;
    e.attractor = center(g, c_near) + pullback * g.h * dir;
    axial = (1.5 - pullback) * g.h;
  }
  const double lateral = 0.5 * g.h;
  const double ex = e.axis_is_x ? axial : lateral;
  const double ey = e.axis_is_x ? lateral : axial;
  e.rect = {e.attractor.x() - ex, e.attractor.x() + ex, e.attractor.y() - ey,
            e.attractor.y() + ey};
  return e;
}

}  // namespace certiplan
