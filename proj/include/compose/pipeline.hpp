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

// Experiment plumbing shared by the CLI and the acceptance suite: dataset
// assembly, Model A / Model B training, the verifier grid, and the
// multi-seed report.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "compose/config.hpp"
#include "compose/datagen.hpp"
#include "compose/encoder.hpp"
#include "compose/evalkit.hpp"
#include "compose/index.hpp"
#include "compose/train.hpp"
#include "compose/verifiers.hpp"

namespace compose {

using Logger = std::function<void(const std::string&)>;

struct DataBundle {
  TripletSet standard;    // filtered standard triplets (Model A)
  TripletSet structural;  // from the training pair split
  TripletSet mixed;       // Model B and verifier training
  std::vector<PairRecord> pairs_train;
  std::vector<PairRecord> pairs_heldout;
  RetrievalBenchmark generic;   // eval world, stands in for out-of-domain retrieval
  RetrievalBenchmark indomain;  // train world, held-out entity combinations
};

// Deterministic in (config, data_seed). Paraphrase pairs are always
// generated for evaluation; near-miss families follow cfg.families.
DataBundle generate_data(const RunConfig& cfg);

// File layout under `dir`: standard.jsonl, structural.jsonl, mixed.jsonl,
// pairs_train.jsonl, pairs_heldout.jsonl, {generic,indomain}_corpus.jsonl,
// {generic,indomain}_queries.jsonl, {generic,indomain}_qrels.tsv and
// manifest.json.
void write_data(const DataBundle& data, const std::filesystem::path& dir, const RunConfig& cfg);
DataBundle load_data(const std::filesystem::path& dir);

TokenizerConfig tokenizer_config(const RunConfig& cfg);
EncoderParams initial_encoder(const RunConfig& cfg, std::uint64_t seed);
TrainConfig encoder_train_config(const RunConfig& cfg, Regime regime, std::uint64_t seed);
TrainConfig verifier_train_config(const RunConfig& cfg, Regime regime, VerifierKind kind,
                                  std::uint64_t seed);
VerifierConfig verifier_config(const RunConfig& cfg, VerifierKind kind);

struct RetrievalMetrics {
  double ndcg10 = 0.0;
  double acc1 = 0.0;
};

std::vector<std::pair<std::string, PooledKey>> pooled_keys(const std::vector<CorpusRecord>& texts,
                                                           const EncoderParams& encoder,
                                                           const TokenizerConfig& tokenizer);
TokenLookup token_lookup(const std::vector<CorpusRecord>& texts, const EncoderParams& encoder,
                         const TokenizerConfig& tokenizer);

RankedRun stage1(const RetrievalBenchmark& bench, const EncoderParams& encoder,
                 const TokenizerConfig& tokenizer, const SearchConfig& search);
RetrievalMetrics score_run(const RankedRun& run, const QRels& qrels);

struct EncoderOutcome {
  Regime regime = Regime::kEncoderA;
  EncoderParams encoder;
  TrainLog log;
  RetrievalMetrics generic;
  RetrievalMetrics indomain;
  NearMissReport nearmiss;  // pooled cosine on the held-out pairs
  CosineHistogram histogram;
};

// Trains Model A (standard set) or Model B (mixed set) and evaluates it.
EncoderOutcome run_encoder(const RunConfig& cfg, const DataBundle& data, Regime regime,
                           std::uint64_t seed);

struct VerifierOutcome {
  VerifierKind kind = VerifierKind::kF0;
  Regime regime = Regime::kVerifierFrozen;
  Verifier verifier;
  std::optional<EncoderParams> encoder;  // set for end-to-end runs
  std::optional<TrainLog> log;           // unset for parameter-free runs
  RetrievalMetrics rerank;               // Stage 2 over the base Stage-1 run
  NearMissReport nearmiss;
};

// F0/F1 are evaluated as is; F2 is trained only when cfg.f2_fit is set.
// Maps are built with the run's own encoder (the jointly trained one for
// end-to-end); Stage-1 candidates always come from `base`.
VerifierOutcome run_verifier(const RunConfig& cfg, const DataBundle& data,
                             const EncoderParams& base, const RankedRun& base_run,
                             VerifierKind kind, Regime regime, std::uint64_t seed);

// The verifier grid: F0, F1, F2, F3 and F4 frozen, F3 and F4 end to end.
std::vector<std::pair<VerifierKind, Regime>> verifier_grid();

// Runs every seed in cfg.seeds, writes artifacts under cfg.out and returns
// the report text (also written to <out>/report.json).
std::string reproduce(const RunConfig& cfg, const Logger& log = {});

// Stable name fragments used in artifact file names.
std::string run_label(Regime regime, std::optional<VerifierKind> kind, std::uint64_t seed);

nlohmann::ordered_json metrics_json(const RetrievalMetrics& m);
nlohmann::ordered_json nearmiss_json(const NearMissReport& r);

// Writes `text` to `path`, creating parent directories.
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace compose
