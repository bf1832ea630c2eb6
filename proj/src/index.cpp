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

#include "compose/index.hpp"

#include <algorithm>
#include <queue>
#include <unordered_set>

#include "compose/error.hpp"

namespace compose {

PooledIndex PooledIndex::build(const std::vector<std::pair<std::string, PooledKey>>& keys) {
  if (keys.empty()) throw Error(ErrorCode::kEmptyIndex, "cannot build an index from no keys");
  const std::size_t dim = keys.front().second.dim();
  PooledIndex index;
  index.keys_.resize(static_cast<Eigen::Index>(keys.size()), static_cast<Eigen::Index>(dim));
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const auto& [id, key] = keys[i];
    if (key.dim() != dim) {
      throw Error(ErrorCode::kDimMismatch, "key '" + id + "' has dim " + std::to_string(key.dim()));
    }
    if (!seen.insert(id).second) throw Error(ErrorCode::kDuplicateId, "duplicate id '" + id + "'");
    index.ids_.push_back(id);
    index.keys_.row(static_cast<Eigen::Index>(i)) = key.values().transpose();
  }
  return index;
}

std::vector<SearchHit> PooledIndex::top_k(const PooledKey& query, const SearchConfig& cfg) const {
  if (cfg.k == 0) throw Error(ErrorCode::kInvalidArgument, "K must be >= 1");
  if (query.dim() != dim()) throw Error(ErrorCode::kDimMismatch, "query dim differs from index");
  const std::size_t k = std::min(cfg.k, size());

  // Min-heap on (score, -position): the top is the current worst kept hit.
  struct Entry {
    double score;
    std::size_t pos;
  };
  const auto worse = [](const Entry& a, const Entry& b) {
    return a.score > b.score || (a.score == b.score && a.pos < b.pos);
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(worse)> heap(worse);
  for (std::size_t i = 0; i < size(); ++i) {
    const double dot = sequential_dot(keys_.row(static_cast<Eigen::Index>(i)).data(), query.values().data(), dim());
    const Entry e{std::clamp(dot, -1.0, 1.0), i};
    if (heap.size() < k) {
      heap.push(e);
    } else if (worse(e, heap.top())) {
      heap.pop();
      heap.push(e);
    }
  }
  std::vector<SearchHit> hits;
  hits.reserve(k);
  while (!heap.empty()) {
    const Entry e = heap.top();
    heap.pop();
    hits.push_back({ids_[e.pos], e.score, e.pos});
  }
  std::reverse(hits.begin(), hits.end());
  if (cfg.threshold_tau) {
    const double tau = *cfg.threshold_tau;
    std::erase_if(hits, [tau](const SearchHit& h) { return h.score < tau; });
  }
  return hits;
}

bool accept_threshold(const PooledKey& q, const PooledKey& c, double tau) {
  return unit_cosine(q, c) >= tau;
}

}  // namespace compose
