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

#include "certiplan/error.hpp"

namespace certiplan {

/// Half-space set { e : F e <= g } in error coordinates. Every bound must be
/// strictly positive: the facet constraint below compares against g^2 and is
/// blind to sign, so an origin-centered ellipsoid can only be meaningful when
/// the origin is strictly inside the set.
struct Polytope {
  Eigen::MatrixXd F;  // q x d
  Eigen::VectorXd g;  // q

  int q() const { return static_cast<int>(F.rows()); }
  int d() const { return static_cast<int>(F.cols()); }
};

inline Polytope make_polytope(const Eigen::MatrixXd& F,
                              const Eigen::VectorXd& g) {
  require(F.rows() == g.size(), ErrorCode::DimensionMismatch,
          "facet count mismatch between F and g");
  require(F.rows() > 0, ErrorCode::Precondition, "polytope needs facets");
  for (Eigen::Index r = 0; r < F.rows(); ++r) {
    require(F.row(r).norm() > 0.0, ErrorCode::Precondition,
            "zero facet normal at row " + std::to_string(r));
    require(g(r) > 0.0, ErrorCode::Precondition,
            "facet bound must be strictly positive at row " +
                std::to_string(r));
  }
  return Polytope{F, g};
}

}  // namespace certiplan
