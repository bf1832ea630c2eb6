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

// Unit-sphere testbed for superposition composition: concept spaces,
// identity-breaking instances, and fixed-threshold sweeps.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "compose/tensor.hpp"

namespace compose {

class ConceptSpace {
 public:
  // n orthonormal concepts in dimension d. Concept 0 is reserved as the
  // negation marker. Throws InvalidArgument unless 5 <= n <= d and
  // noise_angle is in [0, pi/2).
  static ConceptSpace create(std::size_t n, std::size_t d, std::uint64_t seed,
                             double noise_angle = 0.05);

  std::size_t size() const { return static_cast<std::size_t>(concepts_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(concepts_.cols()); }
  std::uint64_t seed() const { return seed_; }
  double noise_angle() const { return noise_angle_; }
  Vector vector_at(std::size_t i) const {
    return concepts_.row(static_cast<Eigen::Index>(i)).transpose();
  }

 private:
  Matrix concepts_;
  std::uint64_t seed_ = 0;
  double noise_angle_ = 0.05;
};

// normalize(sum of vectors). Each coordinate is summed in sorted order, so
// the result is bitwise independent of argument order. Throws
// InvalidArgument on an empty list or mixed dimensions, Cancellation when
// the sum has norm < 1e-9.
Vector superpose(std::span<const Vector> vectors);

enum class GeoFamily : std::uint8_t { kBinding, kOrder, kNegation };

std::string_view to_string(GeoFamily family);
std::optional<GeoFamily> parse_geo_family(std::string_view name);

struct IdentityInstance {
  GeoFamily family = GeoFamily::kOrder;
  Vector anchor;
  Vector paraphrase;
  std::optional<Vector> near_miss;  // absent for paraphrase-only input
};

// `count` instances per requested family. Anchors superpose distinct
// concepts (two for order and negation, attribute/head pairs for binding);
// paraphrases rotate the anchor by the space's noise angle along a random
// tangent direction. Order and binding near-misses permute constituents;
// negation near-misses add the negation concept. Throws InvalidArgument when
// count is 0.
std::vector<IdentityInstance> build_identity_instances(
    const ConceptSpace& space, std::size_t count,
    std::span<const GeoFamily> families = {});

struct SweepPoint {
  double tau = 0.0;
  double false_accept = 0.0;  // near-misses with cos >= tau
  double false_reject = 0.0;  // paraphrases with cos < tau
};

struct FamilyMargin {
  GeoFamily family = GeoFamily::kOrder;
  std::size_t count = 0;
  double min_paraphrase_cos = 0.0;
  double max_near_miss_cos = 0.0;
  double gamma = 0.0;        // min paraphrase cos - max near-miss cos
  double min_error = 0.0;    // min over tau of FA + FR
  double best_tau = 0.0;     // first tau attaining min_error
  std::size_t separating_taus = 0;  // taus with FA = FR = 0
  std::vector<SweepPoint> curve;
};

struct MarginReport {
  double grid_step = 0.001;
  std::vector<FamilyMargin> families;
  std::vector<GeoFamily> absent;  // families with no near-miss instance

  const FamilyMargin* find(GeoFamily family) const;
  std::string to_json() const;
  // family,tau,false_accept,false_reject
  std::string curves_csv() const;
};

// Thresholds tau_k = (k - h) / h for k = 0..2h with h = round(1 / grid_step).
std::vector<double> threshold_grid(double grid_step);

// Sweeps the accept rule cos >= tau over the grid, per family. Throws
// InvalidArgument on empty input or a grid step that does not divide 1.
MarginReport threshold_sweep(std::span<const IdentityInstance> instances,
                             double grid_step = 0.001);

}  // namespace compose
