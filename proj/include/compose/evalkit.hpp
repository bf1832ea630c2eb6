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

// Evaluation: ranking metrics, Stage-2 reranking, near-miss scoring and
// cosine histograms.

#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "compose/datagen.hpp"
#include "compose/embstore.hpp"
#include "compose/encoder.hpp"
#include "compose/index.hpp"
#include "compose/tensor.hpp"
#include "compose/verifiers.hpp"

namespace compose {

struct ScoredDoc {
  std::string id;
  double score = 0.0;

  friend bool operator==(const ScoredDoc&, const ScoredDoc&) = default;
};

// query id -> candidates, best first.
using RankedRun = std::map<std::string, std::vector<ScoredDoc>>;

// Throws InvalidArgument if some list has increasing scores or repeated ids.
void validate_run(const RankedRun& run);

RankedRun run_from_hits(const std::map<std::string, std::vector<SearchHit>>& hits);

// TREC run format: qid Q0 docid rank score tag, scores printed to round-trip.
void write_run_tsv(const std::filesystem::path& path, const RankedRun& run, std::string_view tag);
RankedRun load_run_tsv(const std::filesystem::path& path);
RankedRun parse_run_tsv(std::istream& in);

// Mean over the qrels queries with at least one relevant document; a query
// missing from the run scores 0. Gain 2^grade - 1, discount log2(rank + 1).
// Throws NoJudgedQueries when no query has a relevant document.
double ndcg_at_k(const RankedRun& run, const QRels& qrels, std::size_t k = 10);

// Fraction of the same queries whose first candidate has grade >= 1.
double acc_at_1(const RankedRun& run, const QRels& qrels);

using TokenLookup = std::unordered_map<std::string, TokenMatrix>;

using PairScorer = std::function<double(const std::string& query_id, const std::string& doc_id)>;

// Rescores every candidate and re-sorts by score descending; equal scores
// keep their input order. The result is a permutation of each input list.
RankedRun rerank(const RankedRun& run, const PairScorer& scorer);

// rerank with verifier(build_sim_map(Q, C)). Throws MissingEmbedding when a
// query or candidate has no token matrix.
RankedRun rerank(const RankedRun& run, const Verifier& verifier, const TokenLookup& queries,
                 const TokenLookup& docs);

// Stage 1 over `index` for every query key.
RankedRun stage1_run(const PooledIndex& index,
                     const std::vector<std::pair<std::string, PooledKey>>& queries,
                     const SearchConfig& cfg);

// Area under the ROC curve for positives scored above negatives: the
// Mann-Whitney statistic with averaged ranks for ties. Throws
// InvalidArgument when either side is empty.
double auc(std::span<const double> positives, std::span<const double> negatives);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for fewer than 2 values
  std::size_t count = 0;
};

MeanStd mean_std(std::span<const double> values);

struct FamilyScores {
  Family family = Family::kParaphrase;
  MeanStd stats;
  std::optional<double> auc;  // paraphrase pairs versus this family
};

struct NearMissReport {
  std::vector<FamilyScores> families;  // near-miss families, then paraphrase
  std::optional<double> auc;           // paraphrase versus all near-misses
  std::string note;

  const FamilyScores* find(Family family) const;
  std::string to_json() const;
};

// Scores every pair (s1, s2) at once; returns one score per pair.
using BatchPairScorer = std::function<std::vector<double>(std::span<const PairRecord>)>;

// Per-family score statistics and AUCs. Without paraphrase pairs the AUCs
// are omitted and the note reads MissingParaphrases. Throws InvalidArgument
// on empty input.
NearMissReport nearmiss_eval(std::span<const PairRecord> pairs, const BatchPairScorer& scorer);

// Pooled cosine between encoder keys.
BatchPairScorer cosine_scorer(const EncoderParams& encoder, const TokenizerConfig& tokenizer);

// Verifier over the token similarity map of (s1, s2).
BatchPairScorer verifier_scorer(const Verifier& verifier, const EncoderParams& encoder,
                                const TokenizerConfig& tokenizer);

inline constexpr std::size_t kHistogramBins = 50;

struct CosineHistogram {
  std::map<Family, std::vector<std::size_t>> counts;  // kHistogramBins each
  std::map<Family, double> means;

  // Bin of a cosine on [-1, 1]; 1.0 lands in the last bin.
  static std::size_t bin_of(double cosine);
  // family,bin,lo,hi,count
  std::string to_csv() const;
};

// Throws InvalidArgument on empty input.
CosineHistogram cosine_histogram(std::span<const PairRecord> pairs,
                                 const EncoderParams& encoder, const TokenizerConfig& tokenizer);

}  // namespace compose
