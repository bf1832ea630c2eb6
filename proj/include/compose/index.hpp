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

// Exact top-K cosine search over unit keys (Stage 1) and the cosine
// acceptance rule.

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "compose/tensor.hpp"

namespace compose {

struct SearchConfig {
  std::size_t k = 100;
  // When set, hits with cosine < threshold are dropped after ranking.
  std::optional<double> threshold_tau;
};

struct SearchHit {
  std::string id;
  double score = 0.0;
  std::size_t position = 0;  // insertion order in the index

  friend bool operator==(const SearchHit&, const SearchHit&) = default;
};

class PooledIndex {
 public:
  // Throws EmptyIndex, DimMismatch, DuplicateId.
  static PooledIndex build(const std::vector<std::pair<std::string, PooledKey>>& keys);

  std::size_t size() const { return ids_.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(keys_.cols()); }
  const std::string& id(std::size_t i) const { return ids_[i]; }
  Vector key(std::size_t i) const { return keys_.row(static_cast<Eigen::Index>(i)).transpose(); }

  // Sorted by cosine descending, ties by insertion order. K is clamped to
  // size(); K = 0 throws InvalidArgument.
  std::vector<SearchHit> top_k(const PooledKey& query, const SearchConfig& cfg) const;

 private:
  std::vector<std::string> ids_;
  Matrix keys_;  // N x d, unit rows
};

// true iff cos(q, c) >= tau.
bool accept_threshold(const PooledKey& q, const PooledKey& c, double tau);

}  // namespace compose
