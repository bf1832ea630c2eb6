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

// Named parameter tensors and their gradients. A tensor of logical shape
// (d0, d1, ..., dk) is stored as a row-major d0 x (d1*...*dk) matrix; vectors
// are stored as 1 x d0.

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "compose/tensor.hpp"

namespace compose {

struct ParamTensor {
  std::string name;
  std::vector<std::size_t> shape;
  Matrix value;
  // Row-sparse tensors (embedding tables) receive gradient on a few rows per
  // step; the optimizer only visits touched rows.
  bool row_sparse = false;
};

class ParamSet {
 public:
  // Adds a zero-initialized tensor; returns its index.
  std::size_t add(std::string name, std::vector<std::size_t> shape,
                  bool row_sparse = false);

  std::size_t size() const { return tensors_.size(); }
  ParamTensor& operator[](std::size_t i) { return tensors_[i]; }
  const ParamTensor& operator[](std::size_t i) const { return tensors_[i]; }
  Matrix& value(std::size_t i) { return tensors_[i].value; }
  const Matrix& value(std::size_t i) const { return tensors_[i].value; }
  std::size_t index_of(const std::string& name) const;

  std::size_t scalar_count() const;
  bool same_shapes(const ParamSet& other) const;
  bool all_finite() const;

  auto begin() { return tensors_.begin(); }
  auto end() { return tensors_.end(); }
  auto begin() const { return tensors_.begin(); }
  auto end() const { return tensors_.end(); }

  friend bool operator==(const ParamSet& a, const ParamSet& b);

 private:
  std::vector<ParamTensor> tensors_;
};

// Gradient buffers shaped like a ParamSet. Row-sparse tensors track which
// rows were written so zeroing and the optimizer stay O(touched rows).
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(const ParamSet& params);

  std::size_t size() const { return grads_.size(); }
  Matrix& operator[](std::size_t i) { return grads_[i]; }
  const Matrix& operator[](std::size_t i) const { return grads_[i]; }

  // Marks `row` of row-sparse tensor `i` as touched and returns it for writing.
  auto row(std::size_t i, std::size_t r) {
    touch(i, r);
    return grads_[i].row(static_cast<Eigen::Index>(r));
  }
  void touch(std::size_t i, std::size_t r);
  bool row_sparse(std::size_t i) const { return sparse_[i]; }
  // Touched rows of tensor i in ascending order.
  std::vector<std::size_t> touched_rows(std::size_t i) const;

  void zero();
  // this += other (same layout); touched rows merge.
  void accumulate(const Gradients& other);
  void scale(double s);
  bool all_zero() const;

 private:
  std::vector<Matrix> grads_;
  std::vector<bool> sparse_;
  std::vector<std::vector<std::uint8_t>> marks_;
  std::vector<std::vector<std::size_t>> touched_;
};

// Normal(0, stddev) fill from a seeded engine.
void fill_normal(Matrix& m, double stddev, std::mt19937_64& rng);

// Unbiased draw from [0, n) by rejection on the raw 64-bit stream, so
// sequences do not depend on the standard library's distributions.
std::size_t uniform_index(std::mt19937_64& rng, std::size_t n);
// Uniform double in [0, 1) from the top 53 bits.
double uniform01(std::mt19937_64& rng);

// Seeded Fisher-Yates shuffle.
template <typename T>
void fisher_yates(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i-- > 1;) std::swap(v[i], v[uniform_index(rng, i + 1)]);
}

// Derives an independent stream seed from a master seed and a label.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label);

}  // namespace compose
