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

#include "compose/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "compose/error.hpp"

namespace compose {

TokenMatrix::TokenMatrix(Matrix values) : values_(std::move(values)) {
  if (values_.rows() < 1 || values_.cols() < 2) {
    throw Error(ErrorCode::kInvalidArgument,
                "token matrix needs rows >= 1 and dim >= 2");
  }
}

TokenMatrix::TokenMatrix(std::size_t rows, std::size_t dim,
                         std::span<const double> values) {
  if (rows < 1 || dim < 2) {
    throw Error(ErrorCode::kInvalidArgument,
                "token matrix needs rows >= 1 and dim >= 2");
  }
  if (values.size() != rows * dim) {
    throw Error(ErrorCode::kDimMismatch, "token matrix value count != rows*dim");
  }
  values_.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim));
  std::copy(values.begin(), values.end(), values_.data());
}

bool TokenMatrix::rows_unit_norm(double tol) const {
  for (Eigen::Index i = 0; i < values_.rows(); ++i) {
    if (std::abs(values_.row(i).norm() - 1.0) > tol) return false;
  }
  return true;
}

PooledKey::PooledKey(Vector values) : values_(std::move(values)) {
  if (values_.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "pooled key needs dim >= 2");
  }
  if (std::abs(values_.norm() - 1.0) > kUnitNormTolerance) {
    throw Error(ErrorCode::kInvalidArgument, "pooled key is not unit norm");
  }
}

PooledKey PooledKey::normalized(const Vector& values) {
  const double n = values.norm();
  if (!(n >= kZeroNormThreshold)) {
    throw Error(ErrorCode::kZeroRow, "vector norm below 1e-12");
  }
  return PooledKey(values / n);
}

double cosine(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kDimMismatch, "cosine of vectors with different dims");
  }
  // Same reduction for all three products so identical inputs give s/s.
  const double denom = std::sqrt(a.dot(a) * b.dot(b));
  if (!(denom > 0.0)) {
    throw Error(ErrorCode::kZeroRow, "cosine of a zero vector");
  }
  return std::clamp(a.dot(b) / denom, -1.0, 1.0);
}

Vector order_free_column_mean(const Matrix& m) {
  Vector mean(m.cols());
  std::vector<double> column(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index k = 0; k < m.cols(); ++k) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) column[static_cast<std::size_t>(i)] = m(i, k);
    std::sort(column.begin(), column.end());
    double s = 0.0;
    for (double x : column) s += x;
    mean(k) = s / static_cast<double>(m.rows());
  }
  return mean;
}

double unit_cosine(const PooledKey& a, const PooledKey& b) {
  if (a.dim() != b.dim()) {
    throw Error(ErrorCode::kDimMismatch, "keys have different dims");
  }
  return std::clamp(sequential_dot(a.values().data(), b.values().data(), a.dim()), -1.0, 1.0);
}

double sequential_dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

}  // namespace compose
