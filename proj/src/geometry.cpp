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

#include "compose/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

#include "compose/error.hpp"
#include "compose/params.hpp"

namespace compose {

ConceptSpace ConceptSpace::create(std::size_t n, std::size_t d, std::uint64_t seed,
                                  double noise_angle) {
  if (n < 5 || d < n) throw Error(ErrorCode::kInvalidArgument, "need 5 <= n <= d concepts");
  if (!(noise_angle >= 0.0 && noise_angle < std::numbers::pi / 2)) {
    throw Error(ErrorCode::kInvalidArgument, "noise angle must be in [0, pi/2)");
  }
  std::mt19937_64 rng(derive_seed(seed, "concepts"));
  Matrix basis(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  fill_normal(basis, 1.0, rng);
  // Modified Gram-Schmidt, two passes.
  for (Eigen::Index i = 0; i < basis.rows(); ++i) {
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index j = 0; j < i; ++j) {
        basis.row(i) -= basis.row(i).dot(basis.row(j)) * basis.row(j);
      }
    }
    const double norm = basis.row(i).norm();
    if (norm < 1e-9) throw Error(ErrorCode::kCancellation, "degenerate random basis");
    basis.row(i) /= norm;
  }
  ConceptSpace space;
  space.concepts_ = std::move(basis);
  space.seed_ = seed;
  space.noise_angle_ = noise_angle;
  return space;
}

Vector superpose(std::span<const Vector> vectors) {
  if (vectors.empty()) throw Error(ErrorCode::kInvalidArgument, "nothing to superpose");
  const Eigen::Index d = vectors.front().size();
  for (const auto& v : vectors) {
    if (v.size() != d) throw Error(ErrorCode::kInvalidArgument, "mixed dimensions");
  }
  Vector sum(d);
  std::vector<double> column(vectors.size());
  for (Eigen::Index k = 0; k < d; ++k) {
    for (std::size_t i = 0; i < vectors.size(); ++i) column[i] = vectors[i](k);
    std::sort(column.begin(), column.end());
    double s = 0.0;
    for (double x : column) s += x;
    sum(k) = s;
  }
  const double norm = sum.norm();
  if (norm < 1e-9) throw Error(ErrorCode::kCancellation, "superposition cancels to zero");
  return sum / norm;
}

std::string_view to_string(GeoFamily family) {
  switch (family) {
    case GeoFamily::kBinding:
      return "binding";
    case GeoFamily::kOrder:
      return "order";
    case GeoFamily::kNegation:
      return "negation";
  }
  return "unknown";
}

std::optional<GeoFamily> parse_geo_family(std::string_view name) {
  for (GeoFamily f : {GeoFamily::kBinding, GeoFamily::kOrder, GeoFamily::kNegation}) {
    if (name == to_string(f)) return f;
  }
  return std::nullopt;
}

namespace {

constexpr GeoFamily kAllGeoFamilies[] = {GeoFamily::kBinding, GeoFamily::kOrder,
                                         GeoFamily::kNegation};

// Distinct concept indices from 1..n-1.
std::vector<std::size_t> pick_concepts(std::size_t n, std::size_t k, std::mt19937_64& rng) {
  std::vector<std::size_t> out;
  while (out.size() < k) {
    const std::size_t c = 1 + uniform_index(rng, n - 1);
    if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
  }
  return out;
}

Vector rotate(const Vector& anchor, double angle, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector t(anchor.size());
  double norm = 0.0;
  while (norm < 1e-6) {
    for (Eigen::Index k = 0; k < t.size(); ++k) t(k) = normal(rng);
    t -= t.dot(anchor) * anchor;
    norm = t.norm();
  }
  t /= norm;
  return std::cos(angle) * anchor + std::sin(angle) * t;
}

}  // namespace

std::vector<IdentityInstance> build_identity_instances(const ConceptSpace& space,
                                                       std::size_t count,
                                                       std::span<const GeoFamily> families) {
  if (count == 0) throw Error(ErrorCode::kInvalidArgument, "count must be >= 1");
  if (families.empty()) families = kAllGeoFamilies;
  std::vector<IdentityInstance> out;
  for (GeoFamily family : families) {
    std::mt19937_64 rng(derive_seed(space.seed(), "instances-" + std::string(to_string(family))));
    for (std::size_t i = 0; i < count; ++i) {
      IdentityInstance inst;
      inst.family = family;
      switch (family) {
        case GeoFamily::kOrder: {
          const auto c = pick_concepts(space.size(), 2, rng);
          const Vector a = space.vector_at(c[0]), b = space.vector_at(c[1]);
          inst.anchor = superpose(std::vector<Vector>{a, b});
          inst.near_miss = superpose(std::vector<Vector>{b, a});
          break;
        }
        case GeoFamily::kBinding: {
          // (attr0 head0) (attr1 head1) versus (attr1 head0) (attr0 head1).
          const auto c = pick_concepts(space.size(), 4, rng);
          const Vector a0 = space.vector_at(c[0]), h0 = space.vector_at(c[1]);
          const Vector a1 = space.vector_at(c[2]), h1 = space.vector_at(c[3]);
          inst.anchor = superpose(std::vector<Vector>{a0, h0, a1, h1});
          inst.near_miss = superpose(std::vector<Vector>{a1, h0, a0, h1});
          break;
        }
        case GeoFamily::kNegation: {
          const auto c = pick_concepts(space.size(), 2, rng);
          const Vector a = space.vector_at(c[0]), b = space.vector_at(c[1]);
          inst.anchor = superpose(std::vector<Vector>{a, b});
          inst.near_miss = superpose(std::vector<Vector>{a, b, space.vector_at(0)});
          break;
        }
      }
      inst.paraphrase = rotate(inst.anchor, space.noise_angle(), rng);
      out.push_back(std::move(inst));
    }
  }
  return out;
}

const FamilyMargin* MarginReport::find(GeoFamily family) const {
  for (const auto& f : families) {
    if (f.family == family) return &f;
  }
  return nullptr;
}

std::string MarginReport::to_json() const {
  nlohmann::ordered_json j;
  j["grid_step"] = grid_step;
  j["families"] = nlohmann::ordered_json::array();
  for (const auto& f : families) {
    nlohmann::ordered_json e;
    e["family"] = std::string(to_string(f.family));
    e["count"] = f.count;
    e["min_paraphrase_cos"] = f.min_paraphrase_cos;
    e["max_near_miss_cos"] = f.max_near_miss_cos;
    e["gamma"] = f.gamma;
    e["min_error"] = f.min_error;
    e["best_tau"] = f.best_tau;
    e["separating_taus"] = f.separating_taus;
    j["families"].push_back(std::move(e));
  }
  j["absent"] = nlohmann::ordered_json::array();
  for (GeoFamily f : absent) j["absent"].push_back(std::string(to_string(f)));
  return j.dump(2) + "\n";
}

std::string MarginReport::curves_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "family,tau,false_accept,false_reject\n";
  for (const auto& f : families) {
    for (const auto& p : f.curve) {
      out << to_string(f.family) << ',' << p.tau << ',' << p.false_accept << ','
          << p.false_reject << '\n';
    }
  }
  return out.str();
}

std::vector<double> threshold_grid(double grid_step) {
  if (!(grid_step > 0.0 && grid_step <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "grid step must be in (0, 1]");
  }
  const double inv = 1.0 / grid_step;
  const auto h = static_cast<long long>(std::llround(inv));
  if (std::abs(inv - static_cast<double>(h)) > 1e-6 * inv) {
    throw Error(ErrorCode::kInvalidArgument, "grid step must divide 1");
  }
  std::vector<double> grid(static_cast<std::size_t>(2 * h + 1));
  for (long long k = 0; k <= 2 * h; ++k) {
    grid[static_cast<std::size_t>(k)] = static_cast<double>(k - h) / static_cast<double>(h);
  }
  return grid;
}

MarginReport threshold_sweep(std::span<const IdentityInstance> instances, double grid_step) {
  if (instances.empty()) throw Error(ErrorCode::kInvalidArgument, "no instances to sweep");
  const auto grid = threshold_grid(grid_step);
  MarginReport report;
  report.grid_step = grid_step;
  for (GeoFamily family : kAllGeoFamilies) {
    std::vector<double> para, near;
    bool seen = false;
    for (const auto& inst : instances) {
      if (inst.family != family) continue;
      seen = true;
      para.push_back(cosine(inst.anchor, inst.paraphrase));
      if (inst.near_miss) near.push_back(cosine(inst.anchor, *inst.near_miss));
    }
    if (!seen) continue;
    if (near.empty()) {
      report.absent.push_back(family);
      continue;
    }
    std::sort(para.begin(), para.end());
    std::sort(near.begin(), near.end());
    FamilyMargin m;
    m.family = family;
    m.count = para.size();
    m.min_paraphrase_cos = para.front();
    m.max_near_miss_cos = near.back();
    m.gamma = m.min_paraphrase_cos - m.max_near_miss_cos;
    m.min_error = std::numeric_limits<double>::infinity();
    m.curve.reserve(grid.size());
    for (double tau : grid) {
      const auto rejected = std::lower_bound(para.begin(), para.end(), tau) - para.begin();
      const auto accepted = near.end() - std::lower_bound(near.begin(), near.end(), tau);
      SweepPoint p{tau, static_cast<double>(accepted) / static_cast<double>(near.size()),
                   static_cast<double>(rejected) / static_cast<double>(para.size())};
      if (p.false_accept + p.false_reject < m.min_error) {
        m.min_error = p.false_accept + p.false_reject;
        m.best_tau = tau;
      }
      if (accepted == 0 && rejected == 0) ++m.separating_taus;
      m.curve.push_back(p);
    }
    report.families.push_back(std::move(m));
  }
  return report;
}

}  // namespace compose
