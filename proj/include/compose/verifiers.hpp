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

// Verifiers score a raw token similarity map M (cosines in [-1, 1]).
//   F0  global mean
//   F1  MaxSim: mean over query rows of the row maximum
//   F2  soft alignment with a positional penalty
//   F3  tiny CNN over phi(M), padded to side x side
//   F4  tiny Transformer over the patches of phi(M)
// F3/F4 end in tanh, so every verifier scores in [-1, 1].

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "compose/map_cnn.hpp"
#include "compose/map_transformer.hpp"
#include "compose/params.hpp"
#include "compose/simmap.hpp"

namespace compose {

enum class VerifierKind : std::uint8_t { kF0 = 0, kF1 = 1, kF2 = 2, kF3 = 3, kF4 = 4 };

std::string_view to_string(VerifierKind kind);
// Accepts "f0".."f4" (case-insensitive).
VerifierKind parse_verifier_kind(std::string_view text);

struct AlignmentConfig {
  double lambda = 0.1;
  double tau_align = 0.1;

  // Throws InvalidArgument unless lambda >= 0 and tau_align > 0.
  void validate() const;
};

double f0(const SimMap& m);
double f1(const SimMap& m);
// A(i, j) = softmax_j((M(i, j) - lambda |i - j|) / tau).
Matrix soft_align(const SimMap& m, const AlignmentConfig& cfg);
double f2(const SimMap& m, const AlignmentConfig& cfg);

// Gradient of f2 with respect to M, lambda and tau, scaled by `upstream`.
struct F2Gradient {
  Matrix d_map;
  double d_lambda = 0.0;
  double d_tau = 0.0;
};
F2Gradient f2_backward(const SimMap& m, const AlignmentConfig& cfg, double upstream);

struct VerifierConfig {
  VerifierKind kind = VerifierKind::kF1;
  AlignmentConfig align;
  CnnShape cnn;
  TransformerShape transformer;
};

// Forward cache for a batch of maps (defined below).
struct VerifierTape;

class Verifier {
 public:
  // F3/F4 weights are drawn from `seed`; F2 starts at cfg.align.
  static Verifier create(const VerifierConfig& cfg, std::uint64_t seed);

  VerifierKind kind() const { return cfg_.kind; }
  const VerifierConfig& config() const { return cfg_; }
  // F2 (lambda, tau), F3 and F4 have parameters; F0 and F1 do not.
  bool learnable() const { return cfg_.kind != VerifierKind::kF0 && cfg_.kind != VerifierKind::kF1; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }
  // Current alignment settings (F2 reads them from its parameters).
  AlignmentConfig alignment() const;
  // Keeps F2's lambda >= 0 and tau >= a small floor after an update.
  void project();

  double score(const SimMap& m) const;
  // Scores many maps; fans out across workers with deterministic results.
  // F3/F4 stack each chunk into one matrix product, so a score can differ
  // from score() of the same map in the last bits.
  std::vector<double> score_batch(std::span<const SimMap> maps) const;

  // Training interface. forward() records activations in `tape`;
  // backward() accumulates parameter gradients for upstream d(score) and,
  // when `d_maps` is non-null, fills one gradient per input map.
  std::vector<double> forward(std::span<const SimMap> maps, VerifierTape& tape) const;
  void backward(const VerifierTape& tape, std::span<const double> upstream, Gradients& grads,
                std::vector<Matrix>* d_maps) const;

  // VRF1: "VRF1" | u8 kind | u32 config fields | u32 tensor count | per
  // tensor: u16 name length, name, u8 rank, u32 dims | f32 payload.
  void save(const std::filesystem::path& path) const;
  // Throws ShapeMismatch when the file holds a different kind.
  static Verifier load(VerifierKind expected, const std::filesystem::path& path);
  static Verifier load(const std::filesystem::path& path);

  friend bool operator==(const Verifier& a, const Verifier& b);

 private:
  VerifierConfig cfg_;
  ParamSet params_;
};

// Batches are processed in fixed-size chunks; each chunk keeps its own cache.
inline constexpr std::size_t kVerifierChunk = 32;

struct VerifierTape {
  std::vector<SimMap> maps;
  std::vector<CnnTape> cnn;
  std::vector<TransformerTape> transformer;
};

}  // namespace compose
