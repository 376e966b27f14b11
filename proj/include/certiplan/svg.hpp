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
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "certiplan/artifact.hpp"
#include "certiplan/certificate.hpp"
#include "certiplan/error.hpp"
#include "certiplan/grid.hpp"

namespace certiplan {

namespace detail {

inline std::string svg_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  // Avoid the signed zero so equal geometry always prints the same text.
  if (std::string(buf) == "-0.00") return "0.00";
  return buf;
}

}  // namespace detail

/// Fixed qualitative palette, one color per agent.
inline const char* agent_color(size_t agent) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                 "#9467bd", "#ff7f0e", "#8c564b"};
  return colors[agent % (sizeof(colors) / sizeof(colors[0]))];
}

/// Minimal SVG writer over a world-coordinate window. X grows right, Y grows
/// up (flipped from screen coordinates); the scale is uniform.
class SvgCanvas {
 public:
  SvgCanvas(const Rect& world, double px_per_unit = 6.0, double margin_px = 24.0)
      : world_(world), scale_(px_per_unit), margin_(margin_px) {
    require(world.xhi > world.xlo && world.yhi > world.ylo,
            ErrorCode::Precondition, "world window must have positive area");
    require(px_per_unit > 0.0 && margin_px >= 0.0, ErrorCode::Precondition,
            "scale must be positive");
    width_ = 2.0 * margin_ + scale_ * (world.xhi - world.xlo);
    height_ = 2.0 * margin_ + scale_ * (world.yhi - world.ylo);
  }

  double sx(double x) const { return margin_ + scale_ * (x - world_.xlo); }
  double sy(double y) const { return margin_ + scale_ * (world_.yhi - y); }

  void rect(double xlo, double ylo, double xhi, double yhi,
            const std::string& fill, const std::string& stroke = "none",
            double stroke_width = 1.0, const std::string& cls = "") {
    body_ << "<rect";
    if (!cls.empty()) body_ << " class=\"" << cls << "\"";
    body_ << " x=\"" << detail::svg_num(sx(xlo)) << "\" y=\""
          << detail::svg_num(sy(yhi)) << "\" width=\""
          << detail::svg_num(scale_ * (xhi - xlo)) << "\" height=\""
          << detail::svg_num(scale_ * (yhi - ylo)) << "\" fill=\"" << fill
          << "\" stroke=\"" << stroke << "\" stroke-width=\""
          << detail::svg_num(stroke_width) << "\"/>\n";
  }

  void line(double x1, double y1, double x2, double y2,
            const std::string& stroke, double width = 1.0,
            const std::string& dash = "") {
    body_ << "<line x1=\"" << detail::svg_num(sx(x1)) << "\" y1=\""
          << detail::svg_num(sy(y1)) << "\" x2=\"" << detail::svg_num(sx(x2))
          << "\" y2=\"" << detail::svg_num(sy(y2)) << "\" stroke=\"" << stroke
          << "\" stroke-width=\"" << detail::svg_num(width) << "\"";
    if (!dash.empty()) body_ << " stroke-dasharray=\"" << dash << "\"";
    body_ << "/>\n";
  }

  /// Marker dot; the radius is in screen pixels so markers stay readable at
  /// any scale.
  void dot(double x, double y, double radius_px, const std::string& fill,
           const std::string& stroke = "none", double stroke_width = 1.0) {
    body_ << "<circle cx=\"" << detail::svg_num(sx(x)) << "\" cy=\""
          << detail::svg_num(sy(y)) << "\" r=\"" << detail::svg_num(radius_px)
          << "\" fill=\"" << fill << "\" stroke=\"" << stroke
          << "\" stroke-width=\"" << detail::svg_num(stroke_width) << "\"/>\n";
  }

  /// Ellipse { y : (y-c)' Pproj^-1 (y-c) <= 1 }: semi-axes are the square
  /// roots of Pproj's eigenvalues, oriented along its eigenvectors. The
  /// rotation is negated because the screen's y axis points down.
  void ellipse(const OutputEllipsoid& e, const std::string& stroke,
               double width = 1.0, const std::string& fill = "none",
               double opacity = 1.0) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(e.Pproj);
    require(eig.info() == Eigen::Success && eig.eigenvalues().minCoeff() > 0.0,
            ErrorCode::Precondition, "ellipse shape must be positive definite");
    const double a = std::sqrt(eig.eigenvalues()(0));
    const double b = std::sqrt(eig.eigenvalues()(1));
    const Eigen::Vector2d axis = eig.eigenvectors().col(0);
    const double angle = -std::atan2(axis.y(), axis.x()) * 180.0 / M_PI;
    body_ << "<ellipse cx=\"0\" cy=\"0\" rx=\"" << detail::svg_num(a * scale_)
          << "\" ry=\"" << detail::svg_num(b * scale_) << "\" transform=\""
          << "translate(" << detail::svg_num(sx(e.center.x())) << " "
          << detail::svg_num(sy(e.center.y())) << ") rotate("
          << detail::svg_num(angle) << ")\" fill=\"" << fill << "\" stroke=\""
          << stroke << "\" stroke-width=\"" << detail::svg_num(width)
          << "\" opacity=\"" << detail::svg_num(opacity) << "\"/>\n";
  }

  void polyline(const std::vector<Eigen::Vector2d>& pts,
                const std::string& stroke, double width = 1.0,
                const std::string& dash = "") {
    if (pts.size() < 2) return;
    body_ << "<polyline points=\"";
    for (size_t i = 0; i < pts.size(); ++i) {
      if (i) body_ << ' ';
      body_ << detail::svg_num(sx(pts[i].x())) << ','
            << detail::svg_num(sy(pts[i].y()));
    }
    body_ << "\" fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\""
          << detail::svg_num(width) << "\"";
    if (!dash.empty()) body_ << " stroke-dasharray=\"" << dash << "\"";
    body_ << "/>\n";
  }

  void text(double x, double y, const std::string& s, double size_px = 12.0,
            const std::string& fill = "#333333") {
    body_ << "<text x=\"" << detail::svg_num(sx(x)) << "\" y=\""
          << detail::svg_num(sy(y)) << "\" font-size=\""
          << detail::svg_num(size_px)
          << "\" font-family=\"sans-serif\" fill=\"" << fill << "\">" << s
          << "</text>\n";
  }

  /// Screen-space caption line, anchored to the top-left margin.
  void caption(int slot, const std::string& s, const std::string& fill) {
    body_ << "<text x=\"" << detail::svg_num(margin_) << "\" y=\""
          << detail::svg_num(14.0 + 14.0 * slot)
          << "\" font-size=\"12\" font-family=\"sans-serif\" fill=\"" << fill
          << "\">" << s << "</text>\n";
  }

  std::string str() const {
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\""
        << detail::svg_num(width_) << "\" height=\"" << detail::svg_num(height_)
        << "\" viewBox=\"0 0 " << detail::svg_num(width_) << " "
        << detail::svg_num(height_) << "\">\n"
        << "<rect x=\"0\" y=\"0\" width=\"" << detail::svg_num(width_)
        << "\" height=\"" << detail::svg_num(height_)
        << "\" fill=\"#ffffff\"/>\n"
        << body_.str() << "</svg>\n";
    return out.str();
  }

 private:
  Rect world_;
  double scale_;
  double margin_;
  double width_ = 0.0;
  double height_ = 0.0;
  std::ostringstream body_;
};

/// Grid lines plus shading for blocked cells.
inline void draw_workspace(SvgCanvas& canvas, const GridWorld& g) {
  canvas.rect(g.xmin, g.ymin, g.xmax, g.ymax, "#ffffff", "#888888", 1.5);
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c < g.cols; ++c)
      if (g.is_blocked({r, c})) {
        const Rect cell = cell_rect(g, {r, c});
        canvas.rect(cell.xlo, cell.ylo, cell.xhi, cell.yhi, "#bdbdbd", "none",
                    1.0, "blocked");
      }
  for (int r = 1; r < g.rows; ++r) {
    const double y = g.ymin + r * g.h;
    canvas.line(g.xmin, y, g.xmax, y, "#e0e0e0", 0.5);
  }
  for (int c = 1; c < g.cols; ++c) {
    const double x = g.xmin + c * g.h;
    canvas.line(x, g.ymin, x, g.ymax, "#e0e0e0", 0.5);
  }
}

inline void draw_endpoints(SvgCanvas& canvas, const GridWorld& g,
                           const CertifiedPath& path, const char* color) {
  (void)g;
  canvas.dot(path.waypoints.front().x(), path.waypoints.front().y(), 5.0,
             color);
  canvas.dot(path.waypoints.back().x(), path.waypoints.back().y(), 5.0,
             "#ffffff", color, 2.0);
}

/// Search trees: every explored edge, drawn between cell centers, with the
/// accepted path overlaid.
inline std::string render_trees(const GridWorld& g, const LoadedPlan& plan) {
  SvgCanvas canvas({g.xmin, g.xmax, g.ymin, g.ymax});
  draw_workspace(canvas, g);
  for (size_t i = 0; i < plan.agents.size(); ++i) {
    const char* color = agent_color(i);
    const auto& tree = plan.agents[i].tree;
    for (const TreeNode& node : tree) {
      if (node.parent < 0) continue;
      const Eigen::Vector2d a = center(g, tree[size_t(node.parent)].cell);
      const Eigen::Vector2d b = center(g, node.cell);
      canvas.line(a.x(), a.y(), b.x(), b.y(), color, 1.0);
      canvas.dot(b.x(), b.y(), 2.0, color);
    }
    canvas.polyline(plan.agents[i].path.waypoints, color, 2.5);
    draw_endpoints(canvas, g, plan.agents[i].path, color);
    canvas.caption(int(i), "agent " + std::to_string(i), color);
  }
  return canvas.str();
}

/// Certificate slices along each accepted path: the root hold, every edge
/// certificate, and the goal hold, projected to output space.
inline std::string render_ellipses(const GridWorld& g, const LoadedPlan& plan) {
  SvgCanvas canvas({g.xmin, g.xmax, g.ymin, g.ymax});
  draw_workspace(canvas, g);
  for (size_t i = 0; i < plan.agents.size(); ++i) {
    const char* color = agent_color(i);
    const Eigen::MatrixXd C = recover_output_map(plan.agents[i].record);
    const CertifiedPath& path = plan.agents[i].path;
    canvas.polyline(path.waypoints, color, 1.0, "4 3");
    canvas.ellipse(project_ellipsoid(path.root_cert, C), color, 1.2, "none",
                   0.9);
    for (const Certificate& cert : path.edge_certs)
      canvas.ellipse(project_ellipsoid(cert, C), color, 1.2, "none", 0.9);
    canvas.ellipse(project_ellipsoid(path.goal_cert, C), color, 1.2, "none",
                   0.9);
    draw_endpoints(canvas, g, path, color);
    canvas.caption(int(i), "agent " + std::to_string(i), color);
  }
  return canvas.str();
}

/// Accepted waypoint paths only.
inline std::string render_paths(const GridWorld& g, const LoadedPlan& plan) {
  SvgCanvas canvas({g.xmin, g.xmax, g.ymin, g.ymax});
  draw_workspace(canvas, g);
  for (size_t i = 0; i < plan.agents.size(); ++i) {
    const char* color = agent_color(i);
    const CertifiedPath& path = plan.agents[i].path;
    canvas.polyline(path.waypoints, color, 2.5);
    for (const Eigen::Vector2d& w : path.waypoints)
      canvas.dot(w.x(), w.y(), 3.0, color);
    draw_endpoints(canvas, g, path, color);
    canvas.caption(int(i), "agent " + std::to_string(i), color);
  }
  return canvas.str();
}

inline std::vector<Eigen::Vector2d> trace_outputs(const TraceTable& t) {
  const Eigen::Index y0 = t.column("y0");
  const Eigen::Index y1 = t.column("y1");
  std::vector<Eigen::Vector2d> pts;
  pts.reserve(size_t(t.data.rows()));
  for (Eigen::Index r = 0; r < t.data.rows(); ++r)
    pts.push_back({t.data(r, y0), t.data(r, y1)});
  return pts;
}

/// Executed trajectories over the planned paths: certified runs solid,
/// baseline runs dashed, planned waypoints dotted.
inline std::string render_executed(
    const GridWorld& g, const LoadedPlan& plan,
    const std::vector<TraceTable>& certified,
    const std::vector<std::optional<TraceTable>>& baseline) {
  require(certified.size() == plan.agents.size(), ErrorCode::Precondition,
          "one certified trace per agent is required");
  require(baseline.empty() || baseline.size() == plan.agents.size(),
          ErrorCode::Precondition, "baseline traces must match agent count");
  SvgCanvas canvas({g.xmin, g.xmax, g.ymin, g.ymax});
  draw_workspace(canvas, g);
  for (size_t i = 0; i < plan.agents.size(); ++i) {
    const char* color = agent_color(i);
    canvas.polyline(plan.agents[i].path.waypoints, color, 1.0, "2 3");
    canvas.polyline(trace_outputs(certified[i]), color, 2.0);
    if (!baseline.empty() && baseline[i])
      canvas.polyline(trace_outputs(*baseline[i]), color, 1.2, "6 3");
    draw_endpoints(canvas, g, plan.agents[i].path, color);
    canvas.caption(int(i), "agent " + std::to_string(i), color);
  }
  return canvas.str();
}

}  // namespace certiplan
