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

#include "compose/embstore.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "compose/binio.hpp"
#include "compose/error.hpp"

namespace compose {

using nlohmann::json;
using nlohmann::ordered_json;

TokenMatrix normalize_rows(const TokenMatrix& m) {
  Matrix out = m.values();
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double n = out.row(i).norm();
    if (!(n >= kZeroNormThreshold)) {
      throw Error(ErrorCode::kZeroRow, "row " + std::to_string(i) + " has zero norm");
    }
    out.row(i) /= n;
  }
  return TokenMatrix(std::move(out));
}

PooledKey pool_mean(const TokenMatrix& m) {
  const Vector mean = order_free_column_mean(m.values());
  return PooledKey::normalized(mean);
}

namespace {

void check_id(const std::string& id) {
  if (id.empty() || id.size() > kMaxIdBytes) {
    throw Error(ErrorCode::kInvalidArgument,
                "id must be 1..256 bytes: '" + id.substr(0, 32) + "'");
  }
}

}  // namespace

std::size_t store_file_size(std::span<const StoreRecord> records) {
  std::size_t size = 4 + 4 + 4 + 8;
  for (const auto& r : records) {
    size += 2 + r.id.size();
    size += 4 + r.tokens.rows() * r.tokens.dim() * 4;
  }
  return size;
}

void write_store(std::ostream& out, std::span<const StoreRecord> records) {
  const std::uint32_t dim =
      records.empty() ? 0 : static_cast<std::uint32_t>(records.front().tokens.dim());
  std::unordered_set<std::string> seen;
  for (const auto& r : records) {
    check_id(r.id);
    if (r.tokens.dim() != dim) {
      throw Error(ErrorCode::kDimMismatch, "record '" + r.id + "' has dim " +
                                               std::to_string(r.tokens.dim()) +
                                               ", store dim " + std::to_string(dim));
    }
    if (!seen.insert(r.id).second) {
      throw Error(ErrorCode::kDuplicateId, "duplicate id '" + r.id + "'");
    }
  }
  BinaryWriter w(out);
  w.magic("EMB1");
  w.u32(kEmbStoreVersion);
  w.u32(dim);
  w.u64(records.size());
  for (const auto& r : records) {
    w.u16(static_cast<std::uint16_t>(r.id.size()));
    w.bytes(r.id);
  }
  for (const auto& r : records) {
    const Matrix& v = r.tokens.values();
    w.u32(static_cast<std::uint32_t>(v.rows()));
    const double* p = v.data();
    for (Eigen::Index k = 0; k < v.size(); ++k) w.f32(static_cast<float>(p[k]));
  }
}

void write_store(const std::filesystem::path& path,
                 std::span<const StoreRecord> records) {
  // Serialize to memory first so a failed validation never leaves a partial file.
  std::ostringstream buf(std::ios::binary);
  write_store(buf, records);
  auto out = open_for_write(path);
  const std::string bytes = buf.str();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIoError, "write failed: " + path.string());
}

std::vector<StoreRecord> read_store(std::istream& in) {
  BinaryReader r(in);
  r.expect_magic("EMB1");
  const std::uint32_t version = r.u32();
  if (version != kEmbStoreVersion) {
    throw Error(ErrorCode::kBadMagic, "unsupported EMB1 version " + std::to_string(version));
  }
  const std::uint32_t dim = r.u32();
  const std::uint64_t count = r.u64();
  if (count > 0 && dim < 2) {
    throw Error(ErrorCode::kDimMismatch, "store dim must be >= 2");
  }
  std::vector<std::string> ids;
  std::unordered_set<std::string> seen;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint16_t len = r.u16();
    if (len == 0 || len > kMaxIdBytes) {
      throw Error(ErrorCode::kParseError, "id length out of range in record " + std::to_string(i));
    }
    ids.push_back(r.bytes(len));
    if (!seen.insert(ids.back()).second) {
      throw Error(ErrorCode::kDuplicateId, "duplicate id '" + ids.back() + "'");
    }
  }
  std::vector<StoreRecord> records;
  records.reserve(ids.size());
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint32_t m = r.u32();
    if (m == 0) {
      throw Error(ErrorCode::kDimMismatch, "record '" + ids[i] + "' has zero rows");
    }
    Matrix v(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(dim));
    double* p = v.data();
    for (Eigen::Index k = 0; k < v.size(); ++k) p[k] = static_cast<double>(r.f32());
    records.push_back({std::move(ids[i]), TokenMatrix(std::move(v))});
  }
  if (!r.at_end()) {
    throw Error(ErrorCode::kDimMismatch, "trailing bytes after last record");
  }
  return records;
}

std::vector<StoreRecord> read_store(const std::filesystem::path& path) {
  auto in = open_for_read(path);
  return read_store(in);
}

// ---------------------------------------------------------------------------
// JSONL / TSV

namespace {

json parse_json_line(const std::string& line, std::size_t lineno) {
  try {
    json j = json::parse(line);
    if (!j.is_object()) throw Error(ErrorCode::kParseError, "expected a JSON object", lineno);
    return j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, e.what(), lineno);
  }
}

std::string required_string(const json& j, const char* key, std::size_t lineno) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) {
    throw Error(ErrorCode::kParseError, std::string("missing string field '") + key + "'", lineno);
  }
  std::string s = it->get<std::string>();
  if (s.empty()) {
    throw Error(ErrorCode::kParseError, std::string("empty field '") + key + "'", lineno);
  }
  return s;
}

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r\n") == std::string::npos;
}

std::ofstream open_text(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_text_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open for reading: " + path.string());
  return in;
}

}  // namespace

std::vector<CorpusRecord> parse_corpus_jsonl(std::istream& in) {
  std::vector<CorpusRecord> out;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    const json j = parse_json_line(line, lineno);
    CorpusRecord rec{required_string(j, "id", lineno), required_string(j, "text", lineno)};
    if (rec.id.size() > kMaxIdBytes) {
      throw Error(ErrorCode::kParseError, "id longer than 256 bytes", lineno);
    }
    if (!seen.insert(rec.id).second) {
      throw Error(ErrorCode::kParseError, "duplicate id '" + rec.id + "'", lineno);
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<CorpusRecord> load_corpus_jsonl(const std::filesystem::path& path) {
  auto in = open_text_in(path);
  return parse_corpus_jsonl(in);
}

void write_corpus_jsonl(const std::filesystem::path& path,
                        std::span<const CorpusRecord> records) {
  auto out = open_text(path);
  for (const auto& r : records) {
    ordered_json j;
    j["id"] = r.id;
    j["text"] = r.text;
    out << j.dump() << '\n';
  }
}

void QRels::add(const std::string& qid, const std::string& doc_id, int grade) {
  if (grade < 0) throw Error(ErrorCode::kInvalidArgument, "negative relevance grade");
  judged_[qid][doc_id] = grade;
}

int QRels::grade(const std::string& qid, const std::string& doc_id) const {
  auto q = judged_.find(qid);
  if (q == judged_.end()) return 0;
  auto d = q->second.find(doc_id);
  return d == q->second.end() ? 0 : d->second;
}

const std::map<std::string, int>* QRels::judgments(const std::string& qid) const {
  auto q = judged_.find(qid);
  return q == judged_.end() ? nullptr : &q->second;
}

void QRels::validate(std::span<const CorpusRecord> queries,
                     std::span<const CorpusRecord> docs) const {
  std::set<std::string> qids, dids;
  for (const auto& q : queries) qids.insert(q.id);
  for (const auto& d : docs) dids.insert(d.id);
  for (const auto& [qid, judged] : judged_) {
    if (!qids.count(qid)) throw Error(ErrorCode::kInvalidArgument, "qrels query '" + qid + "' not in query set");
    for (const auto& [did, g] : judged) {
      if (!dids.count(did)) throw Error(ErrorCode::kInvalidArgument, "qrels doc '" + did + "' not in corpus");
    }
  }
}

QRels parse_qrels_tsv(std::istream& in) {
  QRels q;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    std::istringstream fields(line);
    std::string qid, zero, did, grade_s, extra;
    if (!(fields >> qid >> zero >> did >> grade_s) || (fields >> extra)) {
      throw Error(ErrorCode::kParseError, "expected 4 columns: qid 0 docid grade", lineno);
    }
    int grade = 0;
    try {
      std::size_t used = 0;
      grade = std::stoi(grade_s, &used);
      if (used != grade_s.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw Error(ErrorCode::kParseError, "grade is not an integer", lineno);
    }
    if (grade < 0) throw Error(ErrorCode::kParseError, "negative grade", lineno);
    q.add(qid, did, grade);
  }
  return q;
}

QRels load_qrels_tsv(const std::filesystem::path& path) {
  auto in = open_text_in(path);
  return parse_qrels_tsv(in);
}

void write_qrels_tsv(const std::filesystem::path& path, const QRels& qrels) {
  auto out = open_text(path);
  for (const auto& [qid, judged] : qrels.all()) {
    for (const auto& [did, g] : judged) out << qid << "\t0\t" << did << '\t' << g << '\n';
  }
}

std::string_view to_string(Family f) {
  switch (f) {
    case Family::kStandard: return "standard";
    case Family::kNegation: return "negation";
    case Family::kBinding: return "binding";
    case Family::kSpatial: return "spatial";
    case Family::kParaphrase: return "paraphrase";
  }
  return "standard";
}

std::optional<Family> parse_family(std::string_view name) {
  for (Family f : {Family::kStandard, Family::kNegation, Family::kBinding,
                   Family::kSpatial, Family::kParaphrase}) {
    if (to_string(f) == name) return f;
  }
  return std::nullopt;
}

TripletSet parse_triplets_jsonl(std::istream& in) {
  TripletSet out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    const json j = parse_json_line(line, lineno);
    Triplet t;
    t.anchor = required_string(j, "anchor", lineno);
    t.positive = required_string(j, "positive", lineno);
    t.negative = required_string(j, "negative", lineno);
    const auto fam = parse_family(required_string(j, "family", lineno));
    if (!fam) throw Error(ErrorCode::kParseError, "unknown family tag", lineno);
    t.family = *fam;
    out.push_back(std::move(t));
  }
  return out;
}

TripletSet load_triplets_jsonl(const std::filesystem::path& path) {
  auto in = open_text_in(path);
  return parse_triplets_jsonl(in);
}

void write_triplets_jsonl(std::ostream& out, const TripletSet& set) {
  for (const auto& t : set) {
    ordered_json j;
    j["anchor"] = t.anchor;
    j["positive"] = t.positive;
    j["negative"] = t.negative;
    j["family"] = std::string(to_string(t.family));
    out << j.dump() << '\n';
  }
}

void write_triplets_jsonl(const std::filesystem::path& path, const TripletSet& set) {
  auto out = open_text(path);
  write_triplets_jsonl(out, set);
}

}  // namespace compose
