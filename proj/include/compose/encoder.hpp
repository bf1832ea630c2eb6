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

// Bag-of-tokens encoder: hashed embedding table, optional shared linear mix,
// per-token unit normalization and mean pooling. There is no
// contextualization, so the pooled key of a text is invariant under any
// permutation of its tokens.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "compose/params.hpp"
#include "compose/tensor.hpp"

namespace compose {

struct TokenizerConfig {
  bool lowercase = true;
  std::uint32_t vocab_buckets = 65536;
  std::size_t max_len = 64;

  void validate() const;
};

std::uint64_t fnv1a64(std::string_view bytes);

// Whitespace split, surrounding ASCII punctuation stripped, optional ASCII
// lowercasing. Words that are pure punctuation are dropped. No truncation.
std::vector<std::string> split_words(std::string_view text, bool lowercase = true);

// split_words -> FNV-1a 64 -> mod vocab_buckets -> truncate to max_len.
// Throws EmptyAfterTokenization when nothing survives.
std::vector<std::uint32_t> tokenize(std::string_view text, const TokenizerConfig& cfg);

class EncoderParams {
 public:
  // Table entries ~ Normal(0, 1/sqrt(dim)); mix starts at the identity.
  static EncoderParams initialize(std::size_t dim, std::uint32_t buckets,
                                  bool with_mix, std::uint64_t seed);
  // Wraps explicit values (table is buckets x dim, mix dim x dim).
  static EncoderParams from_values(Matrix table, std::optional<Matrix> mix);

  std::size_t dim() const { return static_cast<std::size_t>(table().cols()); }
  std::uint32_t buckets() const { return static_cast<std::uint32_t>(table().rows()); }
  bool has_mix() const { return mix_index_.has_value(); }

  const Matrix& table() const { return params_.value(table_index_); }
  const Matrix* mix() const { return mix_index_ ? &params_.value(*mix_index_) : nullptr; }
  std::size_t table_index() const { return table_index_; }
  std::optional<std::size_t> mix_index() const { return mix_index_; }

  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  // ENC1: "ENC1" | u32 dim | u32 buckets | u8 has_mix | f32 table | f32 mix.
  void save(const std::filesystem::path& path) const;
  static EncoderParams load(const std::filesystem::path& path);

  friend bool operator==(const EncoderParams& a, const EncoderParams& b) {
    return a.params_ == b.params_;
  }

 private:
  ParamSet params_;
  std::size_t table_index_ = 0;
  std::optional<std::size_t> mix_index_;
};

// Row i = normalize(mix * table[ids[i]]).
TokenMatrix encode_tokens(std::span<const std::uint32_t> ids, const EncoderParams& params);
TokenMatrix encode_text(std::string_view text, const EncoderParams& params,
                        const TokenizerConfig& cfg);
PooledKey encode_pooled(std::string_view text, const EncoderParams& params,
                        const TokenizerConfig& cfg);

// Forward activations kept for the backward pass.
struct EncodedText {
  std::vector<std::uint32_t> ids;
  Matrix pre;          // m x d, mix * table rows before normalization
  Vector pre_norms;    // m
  TokenMatrix rows;    // normalized token rows
  Vector mean;         // d, mean of rows
  double mean_norm = 0.0;
  PooledKey key;
};

EncodedText encode_with_cache(std::span<const std::uint32_t> ids, const EncoderParams& params);

// Accumulates parameter gradients given upstream gradients on the token rows
// and/or the pooled key. Either upstream may be null. Only table rows named in
// `cache.ids` are touched.
void encoder_backward(const EncodedText& cache, const Matrix* grad_rows,
                      const Vector* grad_key, const EncoderParams& params,
                      Gradients& grads);

}  // namespace compose
