// Copyright 2026 The Compose-Verify Authors.
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

#include "compose/simmap.hpp"

#include <algorithm>
#include <string>

#include "compose/error.hpp"

namespace compose {

SimMap build_sim_map(const TokenMatrix& q, const TokenMatrix& c) {
  if (q.dim() != c.dim()) {
    throw Error(ErrorCode::kDimMismatch, "token widths differ: " + std::to_string(q.dim()) +
                                             " vs " + std::to_string(c.dim()));
  }
  return q.values() * c.values().transpose();
}

SimMap phi(const SimMap& m) {
  return m.unaryExpr([](double x) { return (std::clamp(x, -1.0, 1.0) + 1.0) * 0.5; });
}

Matrix phi_backward(const SimMap& m, const Matrix& grad_out) {
  return m.binaryExpr(grad_out, [](double x, double g) {
    return (x >= -1.0 && x <= 1.0) ? 0.5 * g : 0.0;
  });
}

Matrix pad_or_truncate(const Matrix& m01, std::size_t side) {
  const auto s = static_cast<Eigen::Index>(side);
  Matrix out = Matrix::Zero(s, s);
  const Eigen::Index r = std::min(s, m01.rows());
  const Eigen::Index c = std::min(s, m01.cols());
  out.topLeftCorner(r, c) = m01.topLeftCorner(r, c);
  return out;
}

Matrix pad_or_truncate_backward(const Matrix& grad_out, std::size_t rows, std::size_t cols) {
  const auto m = static_cast<Eigen::Index>(rows);
  const auto n = static_cast<Eigen::Index>(cols);
  Matrix g = Matrix::Zero(m, n);
  const Eigen::Index r = std::min(m, grad_out.rows());
  const Eigen::Index c = std::min(n, grad_out.cols());
  g.topLeftCorner(r, c) = grad_out.topLeftCorner(r, c);
  return g;
}

void check_patch_size(std::size_t side, std::size_t patch) {
  if (patch == 0 || side == 0 || side % patch != 0) {
    throw Error(ErrorCode::kBadPatchSize, "patch " + std::to_string(patch) +
                                              " does not divide side " + std::to_string(side));
  }
}

PatchGrid psi(const Matrix& m01, std::size_t side, std::size_t patch) {
  check_patch_size(side, patch);
  const Matrix full = pad_or_truncate(m01, side);
  const auto p = static_cast<Eigen::Index>(patch);
  const Eigen::Index per_side = static_cast<Eigen::Index>(side / patch);
  PatchGrid grid;
  grid.side = side;
  grid.patch = patch;
  grid.patches.resize(per_side * per_side, p * p);
  for (Eigen::Index br = 0; br < per_side; ++br) {
    for (Eigen::Index bc = 0; bc < per_side; ++bc) {
      auto row = grid.patches.row(br * per_side + bc);
      for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) row(i * p + j) = full(br * p + i, bc * p + j);
      }
    }
  }
  return grid;
}

Matrix unpatch(const Matrix& patches, std::size_t side, std::size_t patch) {
  check_patch_size(side, patch);
  const auto p = static_cast<Eigen::Index>(patch);
  const Eigen::Index per_side = static_cast<Eigen::Index>(side / patch);
  if (patches.rows() != per_side * per_side || patches.cols() != p * p) {
    throw Error(ErrorCode::kShapeMismatch, "patch matrix does not match grid");
  }
  Matrix full(static_cast<Eigen::Index>(side), static_cast<Eigen::Index>(side));
  for (Eigen::Index br = 0; br < per_side; ++br) {
    for (Eigen::Index bc = 0; bc < per_side; ++bc) {
      const auto row = patches.row(br * per_side + bc);
      for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) full(br * p + i, bc * p + j) = row(i * p + j);
      }
    }
  }
  return full;
}

}  // namespace compose
