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

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "compose/datagen.hpp"
#include "compose/evalkit.hpp"
#include "compose/optim.hpp"
#include "compose/pipeline.hpp"
#include "compose/train.hpp"
#include "test_util.hpp"

using namespace compose;
using compose::testing::random_matrix;
using compose::testing::thrown_code;

namespace {

// Cross-entropy of each row against its diagonal entry, from the definition.
double reference_mnrl(const Matrix& s, double t) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    double z = 0.0;
    for (Eigen::Index j = 0; j < s.cols(); ++j) z += std::exp(s(i, j) / t);
    total += -(s(i, i) / t - std::log(z));
  }
  return total / static_cast<double>(s.rows());
}

const TripletSet& small_mixed() {
  static const TripletSet data = [] {
    const auto world = TemplateWorld::builtin("train");
    const TripletSet standard = gen_standard_triplets(world, 400, 1);
    std::vector<PairRecord> pairs = gen_pairs(world, Family::kNegation, 60, 2);
    const auto binding = gen_pairs(world, Family::kBinding, 60, 3);
    pairs.insert(pairs.end(), binding.begin(), binding.end());
    return mix_datasets(standard, make_structural_triplets(pairs), 0.192, 4);
  }();
  return data;
}

TrainConfig small_train(Regime regime, std::size_t steps, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.regime = regime;
  cfg.steps = steps;
  cfg.batch_size = 8;
  cfg.seed = seed;
  cfg.lr_encoder = 1e-2;
  cfg.lr_verifier = 1e-2;
  cfg.log_every = 5;
  cfg.tokenizer.vocab_buckets = 4096;
  return cfg;
}

VerifierConfig small_verifier(VerifierKind kind) {
  VerifierConfig cfg;
  cfg.kind = kind;
  cfg.cnn.side = 16;
  cfg.transformer.side = 16;
  cfg.transformer.patch = 4;
  cfg.transformer.d_model = 16;
  cfg.transformer.heads = 2;
  cfg.transformer.layers = 1;
  cfg.transformer.ffn = 32;
  return cfg;
}

EncoderParams small_encoder(std::uint64_t seed) { return EncoderParams::initialize(16, 4096, true, seed); }

double mean_of(const std::vector<double>& v, std::size_t from, std::size_t to) {
  return std::accumulate(v.begin() + static_cast<long>(from), v.begin() + static_cast<long>(to), 0.0) /
         static_cast<double>(to - from);
}

}  // namespace

TEST_SUITE("train") {
  TEST_CASE("saturated MNRL loss is near zero") {
    Matrix s(2, 2);
    s << 10, -10, -10, 10;
    CHECK(mnrl_loss(s, 0.1).loss < 1e-6);
  }

  TEST_CASE("uniform scores give log of the column count") {
    CHECK(std::abs(mnrl_loss(Matrix::Constant(2, 2, 0.3), 0.1).loss - std::log(2.0)) <= 1e-12);
    for (int b = 2; b <= 6; ++b) {
      for (int h = 0; h <= 4; ++h) {
        const double loss = mnrl_loss(Matrix::Constant(b, b + h, -0.7), 0.1).loss;
        CHECK(std::abs(loss - std::log(static_cast<double>(b + h))) <= 1e-12);
      }
    }
  }

  TEST_CASE("MNRL matches its definition and is non-negative") {
    std::mt19937_64 rng(1);
    for (int t = 0; t < 200; ++t) {
      const int b = 2 + t % 5;
      const Matrix s = random_matrix(b, b + t % 4, rng);
      const double loss = mnrl_loss(s, 0.1).loss;
      CHECK(loss >= 0.0);
      CHECK(std::abs(loss - reference_mnrl(s, 0.1)) <= 1e-9 * std::max(1.0, loss));
    }
    Matrix big = Matrix::Constant(2, 3, 0.0);
    big(0, 1) = 1000.0;
    CHECK(std::isfinite(mnrl_loss(big, 0.01).loss));
  }

  TEST_CASE("MNRL gradient matches central differences") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto r = grad_check(GradComponent::kMnrl, seed);
      CHECK(r.checked == 24);
      CHECK(r.max_rel_error <= 1e-5);
    }
  }

  TEST_CASE("end-to-end gradients reach the encoder") {
    const auto r = grad_check(GradComponent::kEndToEnd, 1);
    CHECK(r.checked > 0);
    CHECK(r.max_rel_error <= 1e-4);
  }

  TEST_CASE("perturbing one token embedding changes the F4 score") {
    EncoderParams enc = small_encoder(3);
    const Verifier v = Verifier::create(small_verifier(VerifierKind::kF4), 5);
    TokenizerConfig tok;
    tok.vocab_buckets = 4096;
    const auto score = [&] {
      return v.score(build_sim_map(encode_text("the cat is on the mat", enc, tok),
                                   encode_text("the cat is not on the mat", enc, tok)));
    };
    const double before = score();
    const auto row = static_cast<Eigen::Index>(tokenize("cat", tok)[0]);
    enc.params().value(enc.table_index())(row, 0) += 1e-3;
    CHECK(score() != before);
  }

  TEST_CASE("grad_check on a zero map") {
    ParamSet p;
    p.add("w", {3});
    Matrix zero = Matrix::Zero(2, 2);
    const auto r = grad_check(zero, [&] { return zero.sum(); }, Matrix::Ones(2, 2));
    CHECK(r.max_rel_error <= 1e-9);
    CHECK(r.checked == 4);
  }

  TEST_CASE("linear schedule") {
    const LinearSchedule s(1.0, 100, 0.1);
    CHECK(s.warmup_steps() == 10);
    CHECK(s.lr(0) == 0.0);
    CHECK(s.lr(5) == doctest::Approx(0.5));
    CHECK(s.lr(10) == doctest::Approx(1.0));
    CHECK(s.lr(55) == doctest::Approx(0.5));
    CHECK(s.lr(100) == 0.0);
  }

  TEST_CASE("AdamW with lr 0 leaves parameters untouched") {
    ParamSet p;
    const auto i = p.add("w", {3, 4});
    std::mt19937_64 rng(2);
    p.value(i) = random_matrix(3, 4, rng);
    const ParamSet before = p;
    AdamWConfig cfg;
    cfg.lr = 0.0;
    AdamW opt(p, cfg);
    Gradients g(p);
    g[i] = random_matrix(3, 4, rng);
    for (int s = 0; s < 5; ++s) opt.step(p, g);
    CHECK(p == before);
  }

  TEST_CASE("one AdamW step against a hand computation") {
    ParamSet p;
    const auto i = p.add("w", {2});
    p.value(i) << 1.0, -2.0;
    AdamWConfig cfg;
    cfg.lr = 0.1;
    cfg.warmup_ratio = 0.0;
    cfg.total_steps = 1000000;
    AdamW opt(p, cfg);
    Gradients g(p);
    g[i] << 0.5, -0.25;
    opt.step(p, g);
    // First step: m_hat = g, v_hat = g^2, so the update is lr * sign(g)
    // (up to eps), plus decoupled decay lr * wd * w.
    for (int k = 0; k < 2; ++k) {
      const double w0 = k == 0 ? 1.0 : -2.0;
      const double gk = k == 0 ? 0.5 : -0.25;
      const double expected = w0 - 0.1 * (gk / (std::abs(gk) + 1e-8)) - 0.1 * 0.01 * w0;
      CHECK(p.value(i)(0, k) == doctest::Approx(expected).epsilon(1e-12));
    }
  }

  TEST_CASE("learned kinds only") {
    const auto enc = small_encoder(1);
    for (VerifierKind k : {VerifierKind::kF0, VerifierKind::kF1}) {
      const Verifier v = Verifier::create(small_verifier(k), 1);
      CHECK(thrown_code([&] {
              train_verifier(small_mixed(), enc, v, small_train(Regime::kVerifierFrozen, 2, 1));
            }) == ErrorCode::kNonLearnableKind);
    }
  }

  TEST_CASE("empty data is rejected") {
    const auto enc = small_encoder(1);
    const Verifier v = Verifier::create(small_verifier(VerifierKind::kF2), 1);
    CHECK(thrown_code([&] { train_encoder({}, enc, small_train(Regime::kEncoderA, 2, 1)); }) ==
          ErrorCode::kDataEmpty);
    CHECK(thrown_code([&] {
            train_verifier({}, enc, v, small_train(Regime::kVerifierFrozen, 2, 1));
          }) == ErrorCode::kDataEmpty);
  }

  TEST_CASE("invalid configs are rejected") {
    TrainConfig cfg;
    cfg.temperature = 0.0;
    CHECK(thrown_code([&] { cfg.validate(); }) == ErrorCode::kInvalidArgument);
    cfg = TrainConfig{};
    cfg.batch_size = 1;
    CHECK(thrown_code([&] { cfg.validate(); }) == ErrorCode::kInvalidArgument);
    cfg = TrainConfig{};
    cfg.lr_encoder = -1.0;
    CHECK(thrown_code([&] { cfg.validate(); }) == ErrorCode::kInvalidArgument);
  }

  TEST_CASE("regime names") {
    CHECK(parse_regime("A") == Regime::kEncoderA);
    CHECK(parse_regime("encoder_B") == Regime::kEncoderB);
    CHECK(parse_regime("frozen") == Regime::kVerifierFrozen);
    CHECK(parse_regime("e2e") == Regime::kEndToEnd);
    CHECK(to_string(Regime::kEndToEnd) == "end_to_end");
    CHECK(thrown_code([] { parse_regime("C"); }) == ErrorCode::kInvalidArgument);
  }

  TEST_CASE("encoder training with lr 0 is a no-op") {
    const auto enc = small_encoder(4);
    auto cfg = small_train(Regime::kEncoderA, 10, 1);
    cfg.lr_encoder = 0.0;
    CHECK(train_encoder(small_mixed(), enc, cfg).encoder == enc);
  }

  TEST_CASE("encoder training is deterministic in the seed") {
    const auto enc = small_encoder(4);
    const auto a = train_encoder(small_mixed(), enc, small_train(Regime::kEncoderB, 20, 42));
    const auto b = train_encoder(small_mixed(), enc, small_train(Regime::kEncoderB, 20, 42));
    const auto c = train_encoder(small_mixed(), enc, small_train(Regime::kEncoderB, 20, 43));
    CHECK(a.encoder == b.encoder);
    CHECK(a.log.to_jsonl() == b.log.to_jsonl());
    CHECK_FALSE(a.encoder == c.encoder);
  }

  TEST_CASE("verifier training is deterministic in the seed") {
    const auto enc = small_encoder(5);
    const Verifier init = Verifier::create(small_verifier(VerifierKind::kF3), 9);
    const auto a = train_verifier(small_mixed(), enc, init, small_train(Regime::kVerifierFrozen, 10, 42));
    const auto b = train_verifier(small_mixed(), enc, init, small_train(Regime::kVerifierFrozen, 10, 42));
    const auto c = train_verifier(small_mixed(), enc, init, small_train(Regime::kVerifierFrozen, 10, 43));
    CHECK(a.verifier == b.verifier);
    CHECK(a.log.step_losses == b.log.step_losses);
    CHECK_FALSE(a.verifier == c.verifier);
  }

  TEST_CASE("verifier loss decreases over the first 50 steps") {
    const auto enc = small_encoder(6);
    for (VerifierKind k : {VerifierKind::kF2, VerifierKind::kF3, VerifierKind::kF4}) {
      const Verifier init = Verifier::create(small_verifier(k), 11);
      auto cfg = small_train(Regime::kVerifierFrozen, 50, 42);
      cfg.batch_size = 16;
      // The data is exactly one batch, so every step sees the same batch.
      const TripletSet batch(small_mixed().begin(), small_mixed().begin() + 16);
      const auto r = train_verifier(batch, enc, init, cfg);
      REQUIRE(r.log.step_losses.size() == 50);
      CAPTURE(to_string(k));
      CHECK(r.log.step_losses.back() < r.log.step_losses.front());
      CHECK(mean_of(r.log.step_losses, 40, 50) < mean_of(r.log.step_losses, 0, 10));
    }
  }

  TEST_CASE("end to end with a frozen encoder reproduces verifier training") {
    const auto enc = small_encoder(7);
    for (VerifierKind k : {VerifierKind::kF3, VerifierKind::kF4}) {
      const Verifier init = Verifier::create(small_verifier(k), 13);
      auto cfg = small_train(Regime::kEndToEnd, 8, 42);
      cfg.lr_encoder = 0.0;
      const auto joint = train_end_to_end(small_mixed(), enc, init, cfg);
      cfg.regime = Regime::kVerifierFrozen;
      const auto frozen = train_verifier(small_mixed(), enc, init, cfg);
      CHECK(joint.verifier == frozen.verifier);
      CHECK(joint.encoder == enc);
      CHECK(joint.log.step_losses == frozen.log.step_losses);
    }
  }

  TEST_CASE("end to end updates both parameter sets") {
    const auto enc = small_encoder(8);
    const Verifier init = Verifier::create(small_verifier(VerifierKind::kF4), 17);
    const auto r = train_end_to_end(small_mixed(), enc, init, small_train(Regime::kEndToEnd, 5, 42));
    CHECK_FALSE(r.encoder == enc);
    CHECK_FALSE(r.verifier == init);
  }

  TEST_CASE("training log layout") {
    const auto enc = small_encoder(9);
    auto cfg = small_train(Regime::kEncoderA, 12, 42);
    int calls = 0;
    const auto r = train_encoder(small_mixed(), enc, cfg, [&](const EncoderParams&, const Verifier* v) {
      CHECK(v == nullptr);
      ++calls;
      return EvalPoint{0.5, 0.25};
    });
    // Steps 5 and 10, plus the final partial window.
    CHECK(calls == 3);
    CHECK(r.log.steps_run == 12);
    REQUIRE(r.log.entries.size() == 3);
    CHECK(r.log.entries[2].step == 12);
    std::istringstream in(r.log.to_jsonl());
    std::string line;
    std::getline(in, line);
    const auto header = nlohmann::json::parse(line);
    CHECK(header.contains("config"));
    CHECK(header["config"]["regime"] == "encoder_A");
    std::getline(in, line);
    const auto first = nlohmann::json::parse(line);
    CHECK(first["step"] == 5);
    CHECK(first.contains("loss"));
    CHECK(first["ndcg10"] == 0.5);
    CHECK(first["acc1"] == 0.25);
  }

  TEST_CASE("early stopping returns the best parameters") {
    const auto enc = small_encoder(10);
    auto cfg = small_train(Regime::kEncoderA, 100, 42);
    cfg.patience = 10;
    int calls = 0;
    EncoderParams best;
    const auto r = train_encoder(small_mixed(), enc, cfg, [&](const EncoderParams& e, const Verifier*) {
      ++calls;
      if (calls == 2) best = e;
      return EvalPoint{calls == 2 ? 0.9 : 0.1, 0.0};
    });
    CHECK(r.log.steps_run < 100);
    CHECK(r.encoder == best);
  }

  TEST_CASE("toy run improves held-out in-domain Acc@1") {
    RunConfig rc;
    const auto world = TemplateWorld::builtin("train");
    const TripletSet data = gen_standard_triplets(world, 5000, 42);
    const RetrievalBenchmark bench = gen_retrieval_benchmark(world, Partition::kHeldout, 1000, 200, 7);
    const EncoderParams init = initial_encoder(rc, 42);
    TrainConfig cfg = encoder_train_config(rc, Regime::kEncoderA, 42);
    const auto r = train_encoder(data, init, cfg);
    SearchConfig search;
    const TokenizerConfig tok = tokenizer_config(rc);
    const double before = acc_at_1(stage1(bench, init, tok, search), bench.qrels);
    const double after = acc_at_1(stage1(bench, r.encoder, tok, search), bench.qrels);
    MESSAGE("Acc@1 before " << before << " after " << after);
    CHECK(after > before);
  }
}
