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
#include <numeric>
#include <random>
#include <vector>

#include "compose/train.hpp"
#include "compose/verifiers.hpp"
#include "test_util.hpp"

using namespace compose;
using compose::testing::random_matrix;
using compose::testing::thrown_code;

namespace {

Matrix m22() {
  Matrix m(2, 2);
  m << 0.2, 0.9, 0.5, 0.1;
  return m;
}

Matrix permute_columns(const Matrix& m, const std::vector<int>& perm) {
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index j = 0; j < m.cols(); ++j) out.col(j) = m.col(perm[j]);
  return out;
}

VerifierConfig small_config(VerifierKind kind) {
  VerifierConfig cfg;
  cfg.kind = kind;
  cfg.cnn.side = 8;
  cfg.transformer.side = 16;
  cfg.transformer.patch = 4;
  cfg.transformer.d_model = 16;
  cfg.transformer.heads = 2;
  cfg.transformer.layers = 1;
  cfg.transformer.ffn = 32;
  return cfg;
}

// Direct evaluation of the alignment score from its definition.
double reference_f2(const Matrix& m, double lambda, double tau) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> logits;
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      logits.push_back((m(i, j) - lambda * std::abs(static_cast<double>(i - j))) / tau);
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double l : logits) z += std::exp(l - mx);
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      total += std::exp(logits[static_cast<std::size_t>(j)] - mx) / z * m(i, j);
    }
  }
  return total / static_cast<double>(m.rows());
}

void zero_head(Verifier& v, const char* w, const char* b) {
  v.params().value(v.params().index_of(w)).setZero();
  v.params().value(v.params().index_of(b)).setZero();
}

}  // namespace

TEST_SUITE("verifiers") {
  TEST_CASE("f0 is the global mean") {
    CHECK(f0(Matrix::Ones(2, 3)) == 1.0);
    CHECK(std::abs(f0(m22()) - 0.425) <= 1e-12);
  }

  TEST_CASE("f1 is the mean row maximum") {
    CHECK(std::abs(f1(m22()) - 0.7) <= 1e-12);
    CHECK(f1(Matrix::Identity(5, 5)) == 1.0);
  }

  TEST_CASE("f0 and f1 are invariant under column permutations") {
    std::mt19937_64 rng(1);
    for (int t = 0; t < 1000; ++t) {
      const int rows = 1 + static_cast<int>(rng() % 8);
      const int cols = 1 + static_cast<int>(rng() % 8);
      const Matrix m = random_matrix(rows, cols, rng);
      std::vector<int> perm(cols);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      const Matrix p = permute_columns(m, perm);
      CHECK(f0(p) == f0(m));
      CHECK(f1(p) == f1(m));
    }
  }

  TEST_CASE("soft_align rows") {
    const Matrix a = soft_align(Matrix::Zero(1, 2), {0.0, 1.0});
    CHECK(std::abs(a(0, 0) - 0.5) <= 1e-12);
    CHECK(std::abs(a(0, 1) - 0.5) <= 1e-12);

    const Matrix big = soft_align(Matrix::Constant(4, 4, 0.3), {50.0, 0.1});
    CHECK((big - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() <= 1e-12);

    std::mt19937_64 rng(2);
    for (int t = 0; t < 200; ++t) {
      const Matrix m = random_matrix(1 + t % 6, 1 + t % 9, rng);
      const Matrix s = soft_align(m, {0.05 * (t % 7), 0.01 + 0.1 * (t % 5)});
      CHECK((s.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-6);
      CHECK(s.minCoeff() >= 0.0);
    }
  }

  TEST_CASE("soft_align is stable at tiny temperatures") {
    Matrix m(2, 3);
    m << 1.0, -1.0, 0.99, -0.5, 0.7, 0.6;
    const Matrix s = soft_align(m, {0.0, 1e-6});
    CHECK(s.allFinite());
    CHECK(s(0, 0) == doctest::Approx(1.0));
    CHECK(s(1, 1) == doctest::Approx(1.0));
  }

  TEST_CASE("f2 matches its definition") {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 200; ++t) {
      const Matrix m = random_matrix(1 + t % 7, 1 + t % 5, rng);
      const double lambda = 0.1 * (t % 6);
      const double tau = 0.05 + 0.2 * (t % 4);
      CHECK(std::abs(f2(m, {lambda, tau}) - reference_f2(m, lambda, tau)) <= 1e-12);
    }
    CHECK(std::abs(f2(Matrix::Ones(3, 4), {0.1, 0.1}) - 1.0) <= 1e-12);
  }

  TEST_CASE("f2 with a positional penalty sees a column swap") {
    Matrix m(4, 4);
    m << 0.9, 0.2, 0.1, 0.0,  //
        0.1, 0.8, 0.3, 0.2,   //
        0.0, 0.2, 0.9, 0.1,   //
        0.2, 0.1, 0.3, 0.7;
    const Matrix swapped = permute_columns(m, {1, 0, 2, 3});
    const AlignmentConfig cfg{0.5, 0.1};
    CHECK(f2(m, cfg) != f2(swapped, cfg));
    CHECK(std::abs(f2(m, cfg) - f2(swapped, cfg)) > 1e-3);
    CHECK(f1(m) == f1(swapped));
    CHECK(f0(m) == f0(swapped));
  }

  TEST_CASE("f2 tends to f1 as the temperature vanishes") {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 100; ++t) {
      const Matrix m = random_matrix(2 + t % 5, 2 + t % 6, rng);
      CHECK(std::abs(f2(m, {0.0, 1e-3}) - f1(m)) <= 1e-3);
    }
  }

  TEST_CASE("constant maps score their constant") {
    for (double c : {-1.0, -0.37, 0.0, 0.25, 0.5, 0.8125, 1.0}) {
      const Matrix m = Matrix::Constant(3, 5, c);
      CHECK(f0(m) == c);
      CHECK(f1(m) == c);
      CHECK(f2(m, {0.1, 0.1}) == c);
      CHECK(f2(m, {0.7, 0.03}) == c);
    }
  }

  TEST_CASE("alignment config validation") {
    CHECK(thrown_code([] { AlignmentConfig{-0.1, 0.1}.validate(); }) == ErrorCode::kInvalidArgument);
    CHECK(thrown_code([] { AlignmentConfig{0.1, 0.0}.validate(); }) == ErrorCode::kInvalidArgument);
  }

  TEST_CASE("kind names") {
    CHECK(parse_verifier_kind("F3") == VerifierKind::kF3);
    CHECK(to_string(VerifierKind::kF4) == "f4");
    CHECK(thrown_code([] { parse_verifier_kind("f5"); }) == ErrorCode::kInvalidArgument);
  }

  TEST_CASE("zeroed heads score exactly 0") {
    std::mt19937_64 rng(5);
    const Matrix m = random_matrix(6, 7, rng);
    Verifier f3 = Verifier::create(small_config(VerifierKind::kF3), 1);
    zero_head(f3, "fc2.w", "fc2.b");
    CHECK(f3.score(m) == 0.0);
    Verifier f4 = Verifier::create(small_config(VerifierKind::kF4), 1);
    zero_head(f4, "head.w", "head.b");
    CHECK(f4.score(m) == 0.0);
  }

  TEST_CASE("learned verifiers are deterministic and bounded") {
    std::mt19937_64 rng(6);
    std::vector<SimMap> maps;
    for (int i = 0; i < 40; ++i) maps.push_back(random_matrix(3 + i % 20, 2 + i % 17, rng));
    for (VerifierKind k : {VerifierKind::kF3, VerifierKind::kF4}) {
      const Verifier a = Verifier::create(small_config(k), 77);
      const Verifier b = Verifier::create(small_config(k), 77);
      CHECK(a == b);
      const auto sa = a.score_batch(maps);
      const auto sb = b.score_batch(maps);
      CHECK(sa == sb);
      for (std::size_t i = 0; i < maps.size(); ++i) {
        CHECK(std::abs(sa[i] - a.score(maps[i])) <= 1e-12);
        CHECK(std::abs(sa[i]) < 1.0);
      }
      CHECK_FALSE(Verifier::create(small_config(k), 78) == a);
    }
  }

  TEST_CASE("score_batch matches score for the fixed kinds") {
    std::mt19937_64 rng(7);
    std::vector<SimMap> maps;
    for (int i = 0; i < 70; ++i) maps.push_back(random_matrix(1 + i % 9, 1 + i % 4, rng));
    for (VerifierKind k : {VerifierKind::kF0, VerifierKind::kF1, VerifierKind::kF2}) {
      const Verifier v = Verifier::create(small_config(k), 1);
      const auto s = v.score_batch(maps);
      for (std::size_t i = 0; i < maps.size(); ++i) CHECK(s[i] == v.score(maps[i]));
    }
  }

  TEST_CASE("zero upstream gives zero gradients") {
    std::mt19937_64 rng(8);
    std::vector<SimMap> maps = {random_matrix(5, 6, rng), random_matrix(9, 3, rng)};
    for (VerifierKind k : {VerifierKind::kF2, VerifierKind::kF3, VerifierKind::kF4}) {
      const Verifier v = Verifier::create(small_config(k), 3);
      VerifierTape tape;
      v.forward(maps, tape);
      Gradients g(v.params());
      std::vector<Matrix> dm;
      const std::vector<double> up = {0.0, 0.0};
      v.backward(tape, up, g, &dm);
      CHECK(g.all_zero());
      REQUIRE(dm.size() == 2);
      for (std::size_t i = 0; i < 2; ++i) {
        CHECK(dm[i].rows() == maps[i].rows());
        CHECK(dm[i].cols() == maps[i].cols());
        CHECK(dm[i].isZero(0.0));
      }
    }
  }

  TEST_CASE("F2, F3 and F4 gradients match central differences") {
    for (GradComponent c : {GradComponent::kF2, GradComponent::kF3}) {
      for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const auto r = grad_check(c, seed);
        CHECK(r.checked > 0);
        CHECK(r.max_rel_error <= 1e-4);
      }
    }
    const auto r = grad_check(GradComponent::kF4, 1);
    CHECK(r.checked > 0);
    CHECK(r.max_rel_error <= 1e-4);
  }

  TEST_CASE("VRF1 round trip and errors") {
    compose::testing::TempDir dir("vrf");
    for (VerifierKind k : {VerifierKind::kF0, VerifierKind::kF1, VerifierKind::kF2,
                           VerifierKind::kF3, VerifierKind::kF4}) {
      const Verifier v = Verifier::create(small_config(k), 21);
      const auto path = dir / (std::string(to_string(k)) + ".vrf1");
      v.save(path);
      CHECK(Verifier::load(path) == v);
      CHECK(Verifier::load(k, path) == v);
    }
    const auto f3 = dir / "f3.vrf1";
    CHECK(thrown_code([&] { Verifier::load(VerifierKind::kF4, f3); }) == ErrorCode::kShapeMismatch);
    std::string bytes = compose::testing::read_bytes(f3);
    compose::testing::write_bytes(dir / "cut.vrf1", bytes.substr(0, bytes.size() - 5));
    CHECK(thrown_code([&] { Verifier::load(dir / "cut.vrf1"); }) == ErrorCode::kTruncatedFile);
    bytes[0] = 'W';
    compose::testing::write_bytes(dir / "magic.vrf1", bytes);
    CHECK(thrown_code([&] { Verifier::load(dir / "magic.vrf1"); }) == ErrorCode::kBadMagic);
  }

  TEST_CASE("F2 projection keeps parameters in range") {
    Verifier v = Verifier::create(small_config(VerifierKind::kF2), 0);
    v.params().value(0)(0, 0) = -3.0;
    v.params().value(1)(0, 0) = -1.0;
    v.project();
    CHECK(v.alignment().lambda >= 0.0);
    CHECK(v.alignment().tau_align > 0.0);
  }
}
