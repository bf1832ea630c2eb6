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

#include "compose/params.hpp"

#include <algorithm>
#include <numeric>

#include "compose/error.hpp"

namespace compose {

std::size_t ParamSet::add(std::string name, std::vector<std::size_t> shape,
                          bool row_sparse) {
  if (shape.empty()) throw Error(ErrorCode::kInvalidArgument, "empty tensor shape");
  std::size_t rows = shape.size() == 1 ? 1 : shape[0];
  std::size_t cols = shape.size() == 1
                         ? shape[0]
                         : std::accumulate(shape.begin() + 1, shape.end(),
                                           std::size_t{1}, std::multiplies<>());
  ParamTensor t;
  t.name = std::move(name);
  t.shape = std::move(shape);
  t.value = Matrix::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  t.row_sparse = row_sparse;
  tensors_.push_back(std::move(t));
  return tensors_.size() - 1;
}

std::size_t ParamSet::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    if (tensors_[i].name == name) return i;
  }
  throw Error(ErrorCode::kInvalidArgument, "no parameter named '" + name + "'");
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += static_cast<std::size_t>(t.value.size());
  return n;
}

bool ParamSet::same_shapes(const ParamSet& other) const {
  if (tensors_.size() != other.tensors_.size()) return false;
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    if (tensors_[i].shape != other.tensors_[i].shape) return false;
  }
  return true;
}

bool ParamSet::all_finite() const {
  for (const auto& t : tensors_) {
    if (!t.value.allFinite()) return false;
  }
  return true;
}

bool operator==(const ParamSet& a, const ParamSet& b) {
  if (!a.same_shapes(b)) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].value != b[i].value) return false;
  }
  return true;
}

Gradients::Gradients(const ParamSet& params) {
  for (const auto& t : params) {
    grads_.push_back(Matrix::Zero(t.value.rows(), t.value.cols()));
    sparse_.push_back(t.row_sparse);
    marks_.emplace_back(t.row_sparse ? static_cast<std::size_t>(t.value.rows()) : 0, 0);
    touched_.emplace_back();
  }
}

void Gradients::touch(std::size_t i, std::size_t r) {
  if (!sparse_[i]) return;
  if (!marks_[i][r]) {
    marks_[i][r] = 1;
    touched_[i].push_back(r);
  }
}

std::vector<std::size_t> Gradients::touched_rows(std::size_t i) const {
  std::vector<std::size_t> rows = touched_[i];
  std::sort(rows.begin(), rows.end());
  return rows;
}

void Gradients::zero() {
  for (std::size_t i = 0; i < grads_.size(); ++i) {
    if (sparse_[i]) {
      for (std::size_t r : touched_[i]) {
        grads_[i].row(static_cast<Eigen::Index>(r)).setZero();
        marks_[i][r] = 0;
      }
      touched_[i].clear();
    } else {
      grads_[i].setZero();
    }
  }
}

void Gradients::accumulate(const Gradients& other) {
  for (std::size_t i = 0; i < grads_.size(); ++i) {
    if (sparse_[i]) {
      for (std::size_t r : other.touched_rows(i)) {
        touch(i, r);
        grads_[i].row(static_cast<Eigen::Index>(r)) +=
            other.grads_[i].row(static_cast<Eigen::Index>(r));
      }
    } else {
      grads_[i] += other.grads_[i];
    }
  }
}

void Gradients::scale(double s) {
  for (std::size_t i = 0; i < grads_.size(); ++i) {
    if (sparse_[i]) {
      for (std::size_t r : touched_[i]) grads_[i].row(static_cast<Eigen::Index>(r)) *= s;
    } else {
      grads_[i] *= s;
    }
  }
}

bool Gradients::all_zero() const {
  for (const auto& g : grads_) {
    if (!g.isZero(0.0)) return false;
  }
  return true;
}

void fill_normal(Matrix& m, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  double* p = m.data();
  for (Eigen::Index k = 0; k < m.size(); ++k) p[k] = dist(rng);
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view label) {
  // FNV-1a over the label, folded into the master seed with splitmix64.
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (h | 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "uniform_index over an empty range");
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return static_cast<std::size_t>(x % bound);
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace compose
