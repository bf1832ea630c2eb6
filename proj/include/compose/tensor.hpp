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

// Dense value types shared by every module: token matrices (one row per
// token), pooled unit keys, and a few vector helpers. All arithmetic is
// double precision; storage formats round to single precision.

#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace compose {

using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline constexpr double kUnitNormTolerance = 1e-5;
inline constexpr double kZeroNormThreshold = 1e-12;

// Sequence of d-dimensional token vectors, row-major.
class TokenMatrix {
 public:
  TokenMatrix() = default;
  // Throws InvalidArgument unless rows >= 1 and dim >= 2.
  explicit TokenMatrix(Matrix values);
  TokenMatrix(std::size_t rows, std::size_t dim, std::span<const double> values);

  std::size_t rows() const { return static_cast<std::size_t>(values_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(values_.cols()); }
  const Matrix& values() const { return values_; }
  double operator()(std::size_t i, std::size_t j) const {
    return values_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }

  bool rows_unit_norm(double tol = kUnitNormTolerance) const;

  friend bool operator==(const TokenMatrix& a, const TokenMatrix& b) {
    return a.values_.rows() == b.values_.rows() &&
           a.values_.cols() == b.values_.cols() && a.values_ == b.values_;
  }

 private:
  Matrix values_;
};

// A point on the unit sphere.
class PooledKey {
 public:
  PooledKey() = default;
  // Throws InvalidArgument if the norm is not within kUnitNormTolerance of 1.
  explicit PooledKey(Vector values);
  // Scales `values` to unit norm; throws ZeroRow when the norm is ~0.
  static PooledKey normalized(const Vector& values);

  std::size_t dim() const { return static_cast<std::size_t>(values_.size()); }
  const Vector& values() const { return values_; }

  friend bool operator==(const PooledKey& a, const PooledKey& b) {
    return a.values_.size() == b.values_.size() && a.values_ == b.values_;
  }

 private:
  Vector values_;
};

// dot(a,b) / sqrt(dot(a,a) * dot(b,b)), clamped to [-1, 1]. Returns exactly
// 1.0 for bitwise-identical non-zero inputs.
double cosine(const Vector& a, const Vector& b);

// Column means of `m`, each summed in sorted order so that any row
// permutation of `m` gives a bitwise-identical result.
Vector order_free_column_mean(const Matrix& m);

// Plain dot product clamped to [-1, 1]; both inputs are assumed unit norm.
double unit_cosine(const PooledKey& a, const PooledKey& b);

// Left-to-right dot product of n doubles. Stage-1 search and unit_cosine
// both use it so their scores agree bitwise.
double sequential_dot(const double* a, const double* b, std::size_t n);

}  // namespace compose
