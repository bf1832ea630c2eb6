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

#include "compose/encoder.hpp"

#include <cctype>
#include <cmath>
#include <random>

#include "compose/binio.hpp"
#include "compose/error.hpp"

namespace compose {

void TokenizerConfig::validate() const {
  if (vocab_buckets < 2) throw Error(ErrorCode::kInvalidArgument, "vocab_buckets must be >= 2");
  if (max_len < 1) throw Error(ErrorCode::kInvalidArgument, "max_len must be >= 1");
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

namespace {

// Length in bytes of a Unicode whitespace sequence starting at text[i], or 0.
std::size_t whitespace_length(std::string_view text, std::size_t i) {
  const auto b = [&](std::size_t k) {
    return k < text.size() ? static_cast<unsigned char>(text[k]) : 0u;
  };
  const unsigned c0 = b(i);
  if (c0 == ' ' || (c0 >= 0x09 && c0 <= 0x0D)) return 1;
  if (c0 == 0xC2 && (b(i + 1) == 0x85 || b(i + 1) == 0xA0)) return 2;
  if (c0 == 0xE1 && b(i + 1) == 0x9A && b(i + 2) == 0x80) return 3;  // U+1680
  if (c0 == 0xE2 && b(i + 1) == 0x80) {
    const unsigned c2 = b(i + 2);
    if ((c2 >= 0x80 && c2 <= 0x8A) || c2 == 0xA8 || c2 == 0xA9 || c2 == 0xAF) return 3;
  }
  if (c0 == 0xE2 && b(i + 1) == 0x81 && b(i + 2) == 0x9F) return 3;  // U+205F
  if (c0 == 0xE3 && b(i + 1) == 0x80 && b(i + 2) == 0x80) return 3;  // U+3000
  return 0;
}

bool ascii_punct(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u < 0x80 && std::ispunct(u);
}

}  // namespace

std::vector<std::string> split_words(std::string_view text, bool lowercase) {
  std::vector<std::string> words;
  std::size_t i = 0;
  std::string current;
  const auto flush = [&] {
    std::size_t lo = 0, hi = current.size();
    while (lo < hi && ascii_punct(current[lo])) ++lo;
    while (hi > lo && ascii_punct(current[hi - 1])) --hi;
    if (hi > lo) {
      std::string w = current.substr(lo, hi - lo);
      if (lowercase) {
        for (char& c : w) {
          if (static_cast<unsigned char>(c) < 0x80) c = static_cast<char>(std::tolower(c));
        }
      }
      words.push_back(std::move(w));
    }
    current.clear();
  };
  while (i < text.size()) {
    if (const std::size_t ws = whitespace_length(text, i); ws > 0) {
      flush();
      i += ws;
    } else {
      current.push_back(text[i]);
      ++i;
    }
  }
  flush();
  return words;
}

std::vector<std::uint32_t> tokenize(std::string_view text, const TokenizerConfig& cfg) {
  cfg.validate();
  const auto words = split_words(text, cfg.lowercase);
  if (words.empty()) {
    throw Error(ErrorCode::kEmptyAfterTokenization, "no tokens in text");
  }
  std::vector<std::uint32_t> ids;
  ids.reserve(std::min(words.size(), cfg.max_len));
  for (const auto& w : words) {
    if (ids.size() == cfg.max_len) break;
    ids.push_back(static_cast<std::uint32_t>(fnv1a64(w) % cfg.vocab_buckets));
  }
  return ids;
}

EncoderParams EncoderParams::initialize(std::size_t dim, std::uint32_t buckets,
                                        bool with_mix, std::uint64_t seed) {
  if (dim < 2 || buckets < 2) {
    throw Error(ErrorCode::kInvalidArgument, "encoder needs dim >= 2 and buckets >= 2");
  }
  std::mt19937_64 rng(seed);
  Matrix table(static_cast<Eigen::Index>(buckets), static_cast<Eigen::Index>(dim));
  fill_normal(table, 1.0 / std::sqrt(static_cast<double>(dim)), rng);
  // Round to single precision so a fresh encoder survives ENC1 unchanged.
  table = table.cast<float>().cast<double>();
  std::optional<Matrix> mix;
  if (with_mix) {
    mix = Matrix::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  }
  return from_values(std::move(table), std::move(mix));
}

EncoderParams EncoderParams::from_values(Matrix table, std::optional<Matrix> mix) {
  if (table.rows() < 2 || table.cols() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "encoder table must be at least 2x2");
  }
  if (mix && (mix->rows() != table.cols() || mix->cols() != table.cols())) {
    throw Error(ErrorCode::kShapeMismatch, "mix must be dim x dim");
  }
  if (!table.allFinite() || (mix && !mix->allFinite())) {
    throw Error(ErrorCode::kInvalidArgument, "encoder parameters must be finite");
  }
  EncoderParams p;
  const auto rows = static_cast<std::size_t>(table.rows());
  const auto dim = static_cast<std::size_t>(table.cols());
  p.table_index_ = p.params_.add("table", {rows, dim}, /*row_sparse=*/true);
  p.params_.value(p.table_index_) = std::move(table);
  if (mix) {
    p.mix_index_ = p.params_.add("mix", {dim, dim});
    p.params_.value(*p.mix_index_) = std::move(*mix);
  }
  return p;
}

void EncoderParams::save(const std::filesystem::path& path) const {
  auto out = open_for_write(path);
  BinaryWriter w(out);
  w.magic("ENC1");
  w.u32(static_cast<std::uint32_t>(dim()));
  w.u32(buckets());
  w.u8(has_mix() ? 1 : 0);
  const auto dump = [&](const Matrix& m) {
    const double* p = m.data();
    for (Eigen::Index k = 0; k < m.size(); ++k) w.f32(static_cast<float>(p[k]));
  };
  dump(table());
  if (has_mix()) dump(*mix());
}

EncoderParams EncoderParams::load(const std::filesystem::path& path) {
  auto in = open_for_read(path);
  BinaryReader r(in);
  r.expect_magic("ENC1");
  const std::uint32_t dim = r.u32();
  const std::uint32_t buckets = r.u32();
  const std::uint8_t flag = r.u8();
  if (dim < 2 || buckets < 2 || flag > 1) {
    throw Error(ErrorCode::kShapeMismatch, "bad ENC1 header");
  }
  const auto read = [&](Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    double* p = m.data();
    for (Eigen::Index k = 0; k < m.size(); ++k) p[k] = static_cast<double>(r.f32());
    return m;
  };
  Matrix table = read(buckets, dim);
  std::optional<Matrix> mix;
  if (flag == 1) mix = read(dim, dim);
  if (!r.at_end()) throw Error(ErrorCode::kShapeMismatch, "trailing bytes in ENC1 file");
  return from_values(std::move(table), std::move(mix));
}

namespace {

Matrix gather_rows(std::span<const std::uint32_t> ids, const EncoderParams& params) {
  const Matrix& table = params.table();
  Matrix raw(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= params.buckets()) {
      throw Error(ErrorCode::kInvalidArgument, "token id out of range");
    }
    raw.row(static_cast<Eigen::Index>(i)) = table.row(ids[i]);
  }
  return raw;
}

// Shared by encode_tokens and encode_with_cache so both produce identical rows.
Matrix normalized_rows(std::span<const std::uint32_t> ids, const EncoderParams& params,
                       Matrix& pre, Vector& norms) {
  if (ids.empty()) throw Error(ErrorCode::kInvalidArgument, "no token ids");
  Matrix raw = gather_rows(ids, params);
  pre = params.has_mix() ? Matrix(raw * params.mix()->transpose()) : std::move(raw);
  norms = pre.rowwise().norm();
  Matrix rows = pre;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    if (!(norms(i) >= kZeroNormThreshold)) {
      throw Error(ErrorCode::kZeroRow, "token vector is numerically zero");
    }
    rows.row(i) /= norms(i);
  }
  return rows;
}

}  // namespace

EncodedText encode_with_cache(std::span<const std::uint32_t> ids, const EncoderParams& params) {
  EncodedText out;
  out.ids.assign(ids.begin(), ids.end());
  Matrix rows = normalized_rows(ids, params, out.pre, out.pre_norms);
  out.mean = order_free_column_mean(rows);
  out.mean_norm = out.mean.norm();
  out.rows = TokenMatrix(std::move(rows));
  if (!(out.mean_norm >= kZeroNormThreshold)) {
    throw Error(ErrorCode::kZeroRow, "mean of token vectors is zero");
  }
  out.key = PooledKey(out.mean / out.mean_norm);
  return out;
}

TokenMatrix encode_tokens(std::span<const std::uint32_t> ids, const EncoderParams& params) {
  Matrix pre;
  Vector norms;
  return TokenMatrix(normalized_rows(ids, params, pre, norms));
}

TokenMatrix encode_text(std::string_view text, const EncoderParams& params,
                        const TokenizerConfig& cfg) {
  const auto ids = tokenize(text, cfg);
  return encode_tokens(ids, params);
}

PooledKey encode_pooled(std::string_view text, const EncoderParams& params,
                        const TokenizerConfig& cfg) {
  const auto ids = tokenize(text, cfg);
  return encode_with_cache(ids, params).key;
}

void encoder_backward(const EncodedText& cache, const Matrix* grad_rows,
                      const Vector* grad_key, const EncoderParams& params,
                      Gradients& grads) {
  const Matrix& rows = cache.rows.values();
  const Eigen::Index m = rows.rows();
  Matrix g_rows = grad_rows ? *grad_rows : Matrix::Zero(m, rows.cols());
  if (g_rows.rows() != m || g_rows.cols() != rows.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "row gradient shape mismatch");
  }
  if (grad_key) {
    // key = mean / |mean|: project onto the tangent space, then spread the
    // mean's gradient evenly over the rows.
    const Vector& key = cache.key.values();
    const Vector g_mean = (*grad_key - key * key.dot(*grad_key)) / cache.mean_norm;
    g_rows.rowwise() += (g_mean / static_cast<double>(m)).transpose();
  }
  // row = pre / |pre|.
  Matrix g_pre(m, rows.cols());
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto r = rows.row(i);
    g_pre.row(i) = (g_rows.row(i) - r * r.dot(g_rows.row(i))) / cache.pre_norms(i);
  }
  const std::size_t table_idx = params.table_index();
  if (params.has_mix()) {
    const Matrix raw = gather_rows(cache.ids, params);
    grads[*params.mix_index()].noalias() += g_pre.transpose() * raw;
    const Matrix g_raw = g_pre * (*params.mix());
    for (Eigen::Index i = 0; i < m; ++i) {
      grads.row(table_idx, cache.ids[static_cast<std::size_t>(i)]) += g_raw.row(i);
    }
  } else {
    for (Eigen::Index i = 0; i < m; ++i) {
      grads.row(table_idx, cache.ids[static_cast<std::size_t>(i)]) += g_pre.row(i);
    }
  }
}

}  // namespace compose
