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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "compose/geometry.hpp"
#include "test_util.hpp"

using namespace compose;
using compose::testing::random_unit;
using compose::testing::thrown_code;

TEST_SUITE("geometry") {
  TEST_CASE("concept space is orthonormal and seeded") {
    const auto s = ConceptSpace::create(64, 128, 42);
    CHECK(s.size() == 64);
    CHECK(s.dim() == 128);
    double worst = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      CHECK(std::abs(s.vector_at(i).norm() - 1.0) <= 1e-12);
      for (std::size_t j = i + 1; j < s.size(); ++j) {
        worst = std::max(worst, std::abs(s.vector_at(i).dot(s.vector_at(j))));
      }
    }
    CHECK(worst <= 1e-6);
    const auto t = ConceptSpace::create(64, 128, 42);
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(s.vector_at(i) == t.vector_at(i));
    CHECK_FALSE(ConceptSpace::create(64, 128, 43).vector_at(0) == s.vector_at(0));
    CHECK(thrown_code([] { ConceptSpace::create(10, 8, 1); }) == ErrorCode::kInvalidArgument);
    CHECK(thrown_code([] { ConceptSpace::create(8, 8, 1, 2.0); }) == ErrorCode::kInvalidArgument);
  }

  TEST_CASE("superposition of two orthogonal vectors") {
    const auto s = ConceptSpace::create(8, 8, 1);
    const Vector u = s.vector_at(1), v = s.vector_at(2);
    const std::vector<Vector> uv = {u, v};
    const std::vector<Vector> vu = {v, u};
    const Vector p = superpose(uv);
    CHECK(std::abs(p.dot(u) - 1.0 / std::sqrt(2.0)) <= 1e-6);
    CHECK(p == superpose(vu));
    CHECK(std::abs(p.norm() - 1.0) <= 1e-12);
  }

  TEST_CASE("superposition is exactly permutation invariant") {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 100; ++t) {
      std::vector<Vector> vs;
      for (int i = 0; i < 2 + t % 6; ++i) vs.push_back(random_unit(16, rng));
      const Vector base = superpose(vs);
      std::shuffle(vs.begin(), vs.end(), rng);
      CHECK(superpose(vs) == base);
    }
  }

  TEST_CASE("superposition errors") {
    const auto s = ConceptSpace::create(8, 8, 1);
    const std::vector<Vector> cancel = {s.vector_at(3), Vector(-s.vector_at(3))};
    CHECK(thrown_code([&] { superpose(cancel); }) == ErrorCode::kCancellation);
    CHECK(thrown_code([] { superpose(std::vector<Vector>{}); }) == ErrorCode::kInvalidArgument);
    const std::vector<Vector> mixed = {Vector::Ones(3), Vector::Ones(4)};
    CHECK(thrown_code([&] { superpose(mixed); }) == ErrorCode::kInvalidArgument);
  }

  TEST_CASE("identity instances") {
    const auto s = ConceptSpace::create(64, 128, 42, 0.05);
    const auto inst = build_identity_instances(s, 50);
    CHECK(inst.size() == 150);
    for (const auto& x : inst) {
      REQUIRE(x.near_miss.has_value());
      CHECK(std::abs(x.anchor.dot(x.paraphrase) - std::cos(0.05)) <= 1e-6);
      CHECK(std::abs(x.paraphrase.norm() - 1.0) <= 1e-12);
      const double nm = cosine(x.anchor, *x.near_miss);
      if (x.family == GeoFamily::kNegation) {
        CHECK(std::abs(nm - std::sqrt(2.0 / 3.0)) <= 1e-6);
      } else {
        CHECK(nm == 1.0);
      }
    }
    CHECK(thrown_code([&] { build_identity_instances(s, 0); }) == ErrorCode::kInvalidArgument);
  }

  TEST_CASE("negation closed form by direct evaluation") {
    // anchor = (x1 + x2)/sqrt2, near miss = (x1 + x2 + n)/sqrt3 with
    // orthonormal x1, x2, n: cosine = 2 / sqrt(6).
    const auto s = ConceptSpace::create(8, 8, 3);
    const std::vector<Vector> a = {s.vector_at(1), s.vector_at(2)};
    const std::vector<Vector> n = {s.vector_at(1), s.vector_at(2), s.vector_at(0)};
    CHECK(std::abs(superpose(a).dot(superpose(n)) - 2.0 / std::sqrt(6.0)) <= 1e-12);
    CHECK(std::abs(2.0 / std::sqrt(6.0) - std::sqrt(2.0 / 3.0)) <= 1e-15);
  }

  TEST_CASE("family selection") {
    const auto s = ConceptSpace::create(16, 32, 2);
    const GeoFamily only[] = {GeoFamily::kNegation};
    const auto inst = build_identity_instances(s, 7, only);
    CHECK(inst.size() == 7);
    for (const auto& x : inst) CHECK(x.family == GeoFamily::kNegation);
    for (GeoFamily f : {GeoFamily::kBinding, GeoFamily::kOrder, GeoFamily::kNegation}) {
      CHECK(parse_geo_family(to_string(f)) == f);
    }
  }

  TEST_CASE("threshold grid") {
    const auto g = threshold_grid(0.001);
    CHECK(g.size() == 2001);
    CHECK(g.front() == -1.0);
    CHECK(g.back() == 1.0);
    CHECK(g[1000] == 0.0);
    CHECK(std::is_sorted(g.begin(), g.end()));
    CHECK(thrown_code([] { threshold_grid(0.3); }) == ErrorCode::kInvalidArgument);
  }

  TEST_CASE("order swaps cannot be separated at any threshold") {
    const auto s = ConceptSpace::create(64, 128, 42);
    const auto inst = build_identity_instances(s, 200);
    const MarginReport r = threshold_sweep(inst, 0.001);
    for (GeoFamily f : {GeoFamily::kOrder, GeoFamily::kBinding}) {
      const FamilyMargin* m = r.find(f);
      REQUIRE(m != nullptr);
      CHECK(m->gamma <= 0.0);
      CHECK(m->min_error >= 1.0);
      CHECK(m->separating_taus == 0);
      for (const auto& p : m->curve) CHECK(p.false_accept + p.false_reject >= 1.0);
    }
    const FamilyMargin* neg = r.find(GeoFamily::kNegation);
    REQUIRE(neg != nullptr);
    CHECK(neg->gamma > 0.0);
    CHECK(neg->min_error == 0.0);
    CHECK(neg->separating_taus > 0);
  }

  TEST_CASE("sweep curves are monotone and bounded") {
    const auto s = ConceptSpace::create(32, 64, 8, 0.3);
    const auto inst = build_identity_instances(s, 40);
    const MarginReport r = threshold_sweep(inst, 0.01);
    for (const auto& m : r.families) {
      CHECK(m.curve.size() == 201);
      for (std::size_t i = 0; i < m.curve.size(); ++i) {
        CHECK(m.curve[i].false_accept >= 0.0);
        CHECK(m.curve[i].false_accept <= 1.0);
        CHECK(m.curve[i].false_reject >= 0.0);
        CHECK(m.curve[i].false_reject <= 1.0);
        if (i > 0) {
          CHECK(m.curve[i].false_accept <= m.curve[i - 1].false_accept);
          CHECK(m.curve[i].false_reject >= m.curve[i - 1].false_reject);
        }
      }
    }
  }

  TEST_CASE("sweep counts by brute force") {
    const auto s = ConceptSpace::create(16, 32, 4, 0.4);
    const auto inst = build_identity_instances(s, 25);
    const MarginReport r = threshold_sweep(inst, 0.05);
    for (const auto& m : r.families) {
      for (const auto& p : m.curve) {
        std::size_t fa = 0, fr = 0, n = 0;
        for (const auto& x : inst) {
          if (x.family != m.family) continue;
          ++n;
          if (cosine(x.anchor, *x.near_miss) >= p.tau) ++fa;
          if (cosine(x.anchor, x.paraphrase) < p.tau) ++fr;
        }
        CHECK(p.false_accept == static_cast<double>(fa) / static_cast<double>(n));
        CHECK(p.false_reject == static_cast<double>(fr) / static_cast<double>(n));
      }
    }
  }

  TEST_CASE("paraphrase-only input reports the family as absent") {
    const auto s = ConceptSpace::create(8, 16, 1);
    auto inst = build_identity_instances(s, 5);
    for (auto& x : inst) {
      if (x.family == GeoFamily::kOrder) x.near_miss.reset();
    }
    const MarginReport r = threshold_sweep(inst, 0.01);
    CHECK(r.find(GeoFamily::kOrder) == nullptr);
    CHECK(std::find(r.absent.begin(), r.absent.end(), GeoFamily::kOrder) != r.absent.end());
    CHECK(r.find(GeoFamily::kNegation) != nullptr);
    CHECK(thrown_code([] { threshold_sweep(std::vector<IdentityInstance>{}, 0.01); }) ==
          ErrorCode::kInvalidArgument);
  }

  TEST_CASE("margin report is deterministic") {
    const auto run = [] {
      const auto s = ConceptSpace::create(64, 128, 42);
      const auto r = threshold_sweep(build_identity_instances(s, 50), 0.001);
      return r.to_json() + r.curves_csv();
    };
    CHECK(run() == run());
  }
}
