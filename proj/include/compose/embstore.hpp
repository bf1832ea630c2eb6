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

// Corpora, relevance judgments, triplets, and the EMB1 token-embedding store.
//
// EMB1 layout (little-endian):
//   "EMB1" | u32 version=1 | u32 dim | u64 count
//   count x (u16 id_len | id bytes)
//   count x (u32 m | m*dim f32)

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "compose/tensor.hpp"

namespace compose {

inline constexpr std::size_t kMaxIdBytes = 256;
inline constexpr std::uint32_t kEmbStoreVersion = 1;

TokenMatrix normalize_rows(const TokenMatrix& m);
PooledKey pool_mean(const TokenMatrix& m);

struct StoreRecord {
  std::string id;
  TokenMatrix tokens;
};

// Byte size of an EMB1 file holding `records`.
std::size_t store_file_size(std::span<const StoreRecord> records);

void write_store(std::ostream& out, std::span<const StoreRecord> records);
void write_store(const std::filesystem::path& path,
                 std::span<const StoreRecord> records);
std::vector<StoreRecord> read_store(std::istream& in);
std::vector<StoreRecord> read_store(const std::filesystem::path& path);

struct CorpusRecord {
  std::string id;
  std::string text;
};

std::vector<CorpusRecord> load_corpus_jsonl(const std::filesystem::path& path);
std::vector<CorpusRecord> parse_corpus_jsonl(std::istream& in);
void write_corpus_jsonl(const std::filesystem::path& path,
                        std::span<const CorpusRecord> records);

// query id -> (doc id -> grade).
class QRels {
 public:
  void add(const std::string& qid, const std::string& doc_id, int grade);
  // Grade of `doc_id` for `qid`; 0 when unjudged.
  int grade(const std::string& qid, const std::string& doc_id) const;
  const std::map<std::string, int>* judgments(const std::string& qid) const;
  const std::map<std::string, std::map<std::string, int>>& all() const {
    return judged_;
  }
  std::size_t size() const { return judged_.size(); }
  // Throws InvalidArgument if an id does not resolve.
  void validate(std::span<const CorpusRecord> queries,
                std::span<const CorpusRecord> docs) const;

 private:
  std::map<std::string, std::map<std::string, int>> judged_;
};

QRels load_qrels_tsv(const std::filesystem::path& path);
QRels parse_qrels_tsv(std::istream& in);
void write_qrels_tsv(const std::filesystem::path& path, const QRels& qrels);

enum class Family { kStandard, kNegation, kBinding, kSpatial, kParaphrase };

std::string_view to_string(Family f);
std::optional<Family> parse_family(std::string_view name);
inline constexpr Family kNearMissFamilies[] = {Family::kNegation, Family::kBinding,
                                               Family::kSpatial};

struct Triplet {
  std::string anchor;
  std::string positive;
  std::string negative;
  Family family = Family::kStandard;

  friend bool operator==(const Triplet&, const Triplet&) = default;
};

using TripletSet = std::vector<Triplet>;

TripletSet load_triplets_jsonl(const std::filesystem::path& path);
TripletSet parse_triplets_jsonl(std::istream& in);
void write_triplets_jsonl(const std::filesystem::path& path, const TripletSet& set);
void write_triplets_jsonl(std::ostream& out, const TripletSet& set);

}  // namespace compose
