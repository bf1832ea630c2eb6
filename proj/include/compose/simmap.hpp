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

// Token-token cosine maps and the transforms that prepare them for the
// learned verifiers: phi rescales to [0, 1], pad_or_truncate fixes the side
// length, and psi cuts the result into square patches.

#pragma once

#include <cstddef>

#include "compose/tensor.hpp"

namespace compose {

// m x n matrix of token cosines. Plain matrix so gradients can flow into it.
using SimMap = Matrix;

// M(i, j) = dot(Q_i, C_j). Throws DimMismatch when the widths differ.
SimMap build_sim_map(const TokenMatrix& q, const TokenMatrix& c);

// (clip(x, -1, 1) + 1) / 2, elementwise.
SimMap phi(const SimMap& m);
// Chain rule through phi: 0.5 inside [-1, 1], 0 where the clip is active.
Matrix phi_backward(const SimMap& m, const Matrix& grad_out);

// Keeps the leading min(m, S) rows and min(n, S) columns and fills the rest
// with 0.
Matrix pad_or_truncate(const Matrix& m01, std::size_t side);
// Gradient of pad_or_truncate with respect to its m x n input.
Matrix pad_or_truncate_backward(const Matrix& grad_out, std::size_t rows, std::size_t cols);

struct PatchGrid {
  std::size_t side = 64;   // S
  std::size_t patch = 8;   // P
  // (S/P)^2 x P^2; row k is patch k in row-major patch order, itself
  // flattened row-major.
  Matrix patches;

  std::size_t count() const { return static_cast<std::size_t>(patches.rows()); }
};

// Throws BadPatchSize unless 1 <= P and P divides S.
void check_patch_size(std::size_t side, std::size_t patch);
PatchGrid psi(const Matrix& m01, std::size_t side, std::size_t patch);
// Inverse layout: patches (count x P^2) back to the S x S map.
Matrix unpatch(const Matrix& patches, std::size_t side, std::size_t patch);

}  // namespace compose
