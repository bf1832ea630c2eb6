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

// Contrastive training with the multiple-negatives ranking loss. Four
// regimes share one batch sampler so that, for a fixed seed, every regime
// sees the same batches in the same order:
//   encoder_A / encoder_B  pooled-cosine scores, encoder updated
//   verifier_frozen        verifier scores over token maps, encoder fixed
//   end_to_end             verifier scores, both updated
// Row i of a score matrix pairs anchor i with positive i (column i); the
// extra columns are the batch's structural hard negatives.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "compose/embstore.hpp"
#include "compose/encoder.hpp"
#include "compose/params.hpp"
#include "compose/verifiers.hpp"

namespace compose {

struct MnrlResult {
  double loss = 0.0;
  Matrix grad;  // d loss / d scores
};

// loss = -(1/B) sum_i log softmax(scores_i / temperature)[i], where B is the
// row count and scores is B x (B + H).
MnrlResult mnrl_loss(const Matrix& scores, double temperature);

enum class Regime { kEncoderA, kEncoderB, kVerifierFrozen, kEndToEnd };

std::string_view to_string(Regime r);
// Accepts encoder_A, encoder_B, verifier_frozen, end_to_end (and A, B,
// frozen, e2e).
Regime parse_regime(std::string_view text);

struct TrainConfig {
  Regime regime = Regime::kEncoderA;
  double temperature = 0.1;
  double lr_encoder = 2e-5;
  double lr_verifier = 1e-4;
  double weight_decay = 0.01;
  double warmup_ratio = 0.1;
  std::size_t batch_size = 64;
  std::size_t steps = 2000;
  std::uint64_t seed = 42;
  // Loss is averaged and logged every log_every steps and after the last
  // step; the evaluation hook (if any) runs at the same points.
  std::size_t log_every = 50;
  // Stop after this many steps without an nDCG@10 improvement and return
  // the best parameters seen. 0 disables early stopping.
  std::size_t patience = 0;
  TokenizerConfig tokenizer;

  // Throws InvalidArgument on out-of-range values.
  void validate() const;
  nlohmann::ordered_json to_json() const;
};

struct EvalPoint {
  double ndcg10 = 0.0;
  double acc1 = 0.0;
};

// Evaluates the current model; the verifier is null for encoder-only runs.
using EvalHook = std::function<EvalPoint(const EncoderParams&, const Verifier*)>;

struct LogEntry {
  std::size_t step = 0;
  double loss = 0.0;
  std::optional<EvalPoint> eval;
};

struct TrainLog {
  nlohmann::ordered_json header;
  std::vector<LogEntry> entries;
  std::vector<double> step_losses;  // loss of every optimizer step
  std::size_t steps_run = 0;

  // Header line {"config": ...} followed by one line per entry.
  std::string to_jsonl() const;
  void write_jsonl(const std::filesystem::path& path) const;
};

struct EncoderTrainResult {
  EncoderParams encoder;
  TrainLog log;
};

struct VerifierTrainResult {
  Verifier verifier;
  TrainLog log;
};

struct JointTrainResult {
  EncoderParams encoder;
  Verifier verifier;
  TrainLog log;
};

// Throws DataEmpty for an empty triplet set.
EncoderTrainResult train_encoder(const TripletSet& data, const EncoderParams& init,
                                 const TrainConfig& cfg, const EvalHook& hook = {});

// Throws NonLearnableKind for F0/F1 and DataEmpty for an empty set.
VerifierTrainResult train_verifier(const TripletSet& data, const EncoderParams& encoder,
                                   const Verifier& init, const TrainConfig& cfg,
                                   const EvalHook& hook = {});

// Encoder and verifier updated jointly with separate learning rates. With
// lr_encoder = 0 this reproduces train_verifier exactly.
JointTrainResult train_end_to_end(const TripletSet& data, const EncoderParams& encoder,
                                  const Verifier& init, const TrainConfig& cfg,
                                  const EvalHook& hook = {});

// ---- Finite-difference verification ---------------------------------------

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t checked = 0;
};

// Relative error per coordinate is |a - n| / max(|a|, |n|, floor).
inline constexpr double kGradCheckStep = 1e-4;
inline constexpr double kGradCheckFloor = 1e-6;

// Compares `analytic` against central differences of `loss` over every
// parameter coordinate. Parameters are restored afterwards.
GradCheckResult grad_check(ParamSet& params, const std::function<double()>& loss,
                           const Gradients& analytic, double step = kGradCheckStep,
                           double floor = kGradCheckFloor);
// Same over the entries of a free matrix input.
GradCheckResult grad_check(Matrix& input, const std::function<double()>& loss,
                           const Matrix& analytic, double step = kGradCheckStep,
                           double floor = kGradCheckFloor);

enum class GradComponent { kEncoder, kMnrl, kF2, kF3, kF4, kEndToEnd };

std::string_view to_string(GradComponent c);

// Builds a small random instance of `component` from `seed` and checks every
// gradient it exposes (parameters and, for verifiers, the input map).
//   encoder     3 tokens, d = 8, with mix, loss on rows and key
//   mnrl        4 x 6 random scores
//   f2/f3       8 x 8 map (F3 side 8)
//   f4          S = 16, P = 4, d_model 16, FFN 32, 2 layers, 4 heads
//   end_to_end  F4 (same shape) score of two encoded texts, gradient into the encoder
GradCheckResult grad_check(GradComponent component, std::uint64_t seed);

}  // namespace compose
