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

#include "compose/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "compose/encoder.hpp"
#include "compose/error.hpp"
#include "compose/parallel.hpp"
#include "compose/simmap.hpp"

namespace compose {

void validate_run(const RankedRun& run) {
  for (const auto& [qid, docs] : run) {
    std::set<std::string> seen;
    for (std::size_t i = 0; i < docs.size(); ++i) {
      if (!seen.insert(docs[i].id).second) {
        throw Error(ErrorCode::kInvalidArgument, "query '" + qid + "' repeats doc '" + docs[i].id + "'");
      }
      if (i > 0 && docs[i].score > docs[i - 1].score) {
        throw Error(ErrorCode::kInvalidArgument, "query '" + qid + "' scores increase at rank " +
                                                     std::to_string(i + 1));
      }
    }
  }
}

RankedRun run_from_hits(const std::map<std::string, std::vector<SearchHit>>& hits) {
  RankedRun run;
  for (const auto& [qid, list] : hits) {
    auto& out = run[qid];
    out.reserve(list.size());
    for (const auto& h : list) out.push_back({h.id, h.score});
  }
  return run;
}

void write_run_tsv(const std::filesystem::path& path, const RankedRun& run, std::string_view tag) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  char score[32];
  for (const auto& [qid, list] : run) {
    for (std::size_t r = 0; r < list.size(); ++r) {
      std::snprintf(score, sizeof score, "%.17g", list[r].score);
      out << qid << "\tQ0\t" << list[r].id << '\t' << r + 1 << '\t' << score << '\t' << tag << '\n';
    }
  }
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

RankedRun parse_run_tsv(std::istream& in) {
  RankedRun run;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream fields(line);
    std::string qid, q0, doc, tag;
    std::size_t rank = 0;
    std::string score_text;
    if (!(fields >> qid >> q0 >> doc >> rank >> score_text >> tag)) {
      throw Error(ErrorCode::kParseError, "expected qid Q0 docid rank score tag", n);
    }
    char* end = nullptr;
    const double score = std::strtod(score_text.c_str(), &end);
    if (end != score_text.c_str() + score_text.size()) {
      throw Error(ErrorCode::kParseError, "bad score '" + score_text + "'", n);
    }
    auto& list = run[qid];
    if (rank != list.size() + 1) throw Error(ErrorCode::kParseError, "ranks must be consecutive from 1", n);
    list.push_back({doc, score});
  }
  validate_run(run);
  return run;
}

RankedRun load_run_tsv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  return parse_run_tsv(in);
}

namespace {

// Judged queries with at least one relevant document.
std::vector<std::pair<std::string, const std::map<std::string, int>*>> judged_queries(
    const QRels& qrels) {
  std::vector<std::pair<std::string, const std::map<std::string, int>*>> out;
  for (const auto& [qid, docs] : qrels.all()) {
    const bool any = std::any_of(docs.begin(), docs.end(), [](const auto& d) { return d.second > 0; });
    if (any) out.emplace_back(qid, &docs);
  }
  if (out.empty()) throw Error(ErrorCode::kNoJudgedQueries, "no query has a relevant document");
  return out;
}

int grade_in(const std::map<std::string, int>& docs, const std::string& id) {
  const auto it = docs.find(id);
  return it == docs.end() ? 0 : it->second;
}

}  // namespace

double ndcg_at_k(const RankedRun& run, const QRels& qrels, std::size_t k) {
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
  const auto judged = judged_queries(qrels);
  double total = 0.0;
  for (const auto& [qid, docs] : judged) {
    std::vector<int> grades;
    for (const auto& [id, g] : *docs) {
      if (g > 0) grades.push_back(g);
    }
    std::sort(grades.rbegin(), grades.rend());
    double ideal = 0.0;
    for (std::size_t r = 0; r < std::min(k, grades.size()); ++r) {
      ideal += (std::exp2(grades[r]) - 1.0) / std::log2(static_cast<double>(r) + 2.0);
    }
    double dcg = 0.0;
    if (const auto it = run.find(qid); it != run.end()) {
      const auto& list = it->second;
      for (std::size_t r = 0; r < std::min(k, list.size()); ++r) {
        const int g = grade_in(*docs, list[r].id);
        if (g > 0) dcg += (std::exp2(g) - 1.0) / std::log2(static_cast<double>(r) + 2.0);
      }
    }
    total += dcg / ideal;
  }
  return total / static_cast<double>(judged.size());
}

double acc_at_1(const RankedRun& run, const QRels& qrels) {
  const auto judged = judged_queries(qrels);
  std::size_t hits = 0;
  for (const auto& [qid, docs] : judged) {
    const auto it = run.find(qid);
    if (it != run.end() && !it->second.empty() && grade_in(*docs, it->second.front().id) >= 1) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(judged.size());
}

namespace {

std::vector<ScoredDoc> sorted_by_score(const std::vector<ScoredDoc>& input,
                                       const std::vector<double>& scores) {
  std::vector<std::size_t> order(input.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<ScoredDoc> out;
  out.reserve(input.size());
  for (std::size_t i : order) out.push_back({input[i].id, scores[i]});
  return out;
}

}  // namespace

RankedRun rerank(const RankedRun& run, const PairScorer& scorer) {
  RankedRun out;
  for (const auto& [qid, list] : run) {
    std::vector<double> scores;
    scores.reserve(list.size());
    for (const auto& d : list) scores.push_back(scorer(qid, d.id));
    out[qid] = sorted_by_score(list, scores);
  }
  return out;
}

RankedRun rerank(const RankedRun& run, const Verifier& verifier, const TokenLookup& queries,
                 const TokenLookup& docs) {
  const auto lookup = [](const TokenLookup& table, const std::string& id, const char* what) {
    const auto it = table.find(id);
    if (it == table.end()) {
      throw Error(ErrorCode::kMissingEmbedding, std::string("no token matrix for ") + what + " '" + id + "'");
    }
    return &it->second;
  };
  std::vector<const std::pair<const std::string, std::vector<ScoredDoc>>*> entries;
  for (const auto& e : run) entries.push_back(&e);
  // Resolve every embedding up front so errors do not depend on scheduling.
  for (const auto* e : entries) {
    lookup(queries, e->first, "query");
    for (const auto& d : e->second) lookup(docs, d.id, "document");
  }
  std::vector<std::vector<ScoredDoc>> results(entries.size());
  parallel_for(entries.size(), [&](std::size_t i) {
    const auto& [qid, list] = *entries[i];
    const TokenMatrix* q = lookup(queries, qid, "query");
    std::vector<double> scores;
    scores.reserve(list.size());
    for (const auto& d : list) scores.push_back(verifier.score(build_sim_map(*q, *lookup(docs, d.id, "document"))));
    results[i] = sorted_by_score(list, scores);
  });
  RankedRun out;
  for (std::size_t i = 0; i < entries.size(); ++i) out[entries[i]->first] = std::move(results[i]);
  return out;
}

RankedRun stage1_run(const PooledIndex& index,
                     const std::vector<std::pair<std::string, PooledKey>>& queries,
                     const SearchConfig& cfg) {
  std::vector<std::vector<SearchHit>> hits(queries.size());
  parallel_for(queries.size(), [&](std::size_t i) { hits[i] = index.top_k(queries[i].second, cfg); });
  RankedRun run;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    auto& out = run[queries[i].first];
    for (const auto& h : hits[i]) out.push_back({h.id, h.score});
  }
  return run;
}

double auc(std::span<const double> positives, std::span<const double> negatives) {
  if (positives.empty() || negatives.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "AUC needs positives and negatives");
  }
  struct Item {
    double score;
    bool positive;
  };
  std::vector<Item> items;
  items.reserve(positives.size() + negatives.size());
  for (double s : positives) items.push_back({s, true});
  for (double s : negatives) items.push_back({s, false});
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.score < b.score; });
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < items.size();) {
    std::size_t j = i;
    while (j < items.size() && items[j].score == items[i].score) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t t = i; t < j; ++t) {
      if (items[t].positive) rank_sum += avg_rank;
    }
    i = j;
  }
  const double np = static_cast<double>(positives.size());
  const double nn = static_cast<double>(negatives.size());
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  out.count = values.size();
  if (values.empty()) return out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

const FamilyScores* NearMissReport::find(Family family) const {
  for (const auto& f : families) {
    if (f.family == family) return &f;
  }
  return nullptr;
}

std::string NearMissReport::to_json() const {
  nlohmann::ordered_json j;
  j["families"] = nlohmann::ordered_json::array();
  for (const auto& f : families) {
    nlohmann::ordered_json e;
    e["family"] = std::string(to_string(f.family));
    e["count"] = f.stats.count;
    e["mean"] = f.stats.mean;
    e["std"] = f.stats.std;
    e["auc"] = f.auc ? nlohmann::ordered_json(*f.auc) : nlohmann::ordered_json(nullptr);
    j["families"].push_back(std::move(e));
  }
  j["auc"] = auc ? nlohmann::ordered_json(*auc) : nlohmann::ordered_json(nullptr);
  j["note"] = note;
  return j.dump(2) + "\n";
}

NearMissReport nearmiss_eval(std::span<const PairRecord> pairs, const BatchPairScorer& scorer) {
  if (pairs.empty()) throw Error(ErrorCode::kInvalidArgument, "no pairs to evaluate");
  const std::vector<double> scores = scorer(pairs);
  if (scores.size() != pairs.size()) {
    throw Error(ErrorCode::kShapeMismatch, "scorer returned the wrong number of scores");
  }
  std::map<Family, std::vector<double>> by_family;
  for (std::size_t i = 0; i < pairs.size(); ++i) by_family[pairs[i].family].push_back(scores[i]);
  const auto para_it = by_family.find(Family::kParaphrase);
  const std::vector<double>* para = para_it == by_family.end() ? nullptr : &para_it->second;

  NearMissReport report;
  std::vector<double> all_near;
  for (Family f : kNearMissFamilies) {
    const auto it = by_family.find(f);
    if (it == by_family.end()) continue;
    FamilyScores fs;
    fs.family = f;
    fs.stats = mean_std(it->second);
    if (para) fs.auc = auc(*para, it->second);
    all_near.insert(all_near.end(), it->second.begin(), it->second.end());
    report.families.push_back(std::move(fs));
  }
  if (para) {
    FamilyScores fs;
    fs.family = Family::kParaphrase;
    fs.stats = mean_std(*para);
    report.families.push_back(std::move(fs));
    if (!all_near.empty()) report.auc = auc(*para, all_near);
  } else {
    report.note = std::string(to_string(ErrorCode::kMissingParaphrases));
  }
  return report;
}

namespace {

// Encodes each distinct sentence once, in first-appearance order.
std::map<std::string, std::size_t> distinct_sentences(std::span<const PairRecord> pairs,
                                                      std::vector<std::string>& order) {
  std::map<std::string, std::size_t> slot;
  for (const auto& p : pairs) {
    for (const std::string* s : {&p.s1, &p.s2}) {
      if (slot.emplace(*s, order.size()).second) order.push_back(*s);
    }
  }
  return slot;
}

}  // namespace

BatchPairScorer cosine_scorer(const EncoderParams& encoder, const TokenizerConfig& tokenizer) {
  return [&encoder, tokenizer](std::span<const PairRecord> pairs) {
    std::vector<std::string> order;
    const auto slot = distinct_sentences(pairs, order);
    std::vector<PooledKey> keys(order.size());
    parallel_for(order.size(), [&](std::size_t i) { keys[i] = encode_pooled(order[i], encoder, tokenizer); });
    std::vector<double> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) {
      out.push_back(cosine(keys[slot.at(p.s1)].values(), keys[slot.at(p.s2)].values()));
    }
    return out;
  };
}

BatchPairScorer verifier_scorer(const Verifier& verifier, const EncoderParams& encoder,
                                const TokenizerConfig& tokenizer) {
  return [&verifier, &encoder, tokenizer](std::span<const PairRecord> pairs) {
    std::vector<std::string> order;
    const auto slot = distinct_sentences(pairs, order);
    std::vector<TokenMatrix> tokens(order.size());
    parallel_for(order.size(), [&](std::size_t i) { tokens[i] = encode_text(order[i], encoder, tokenizer); });
    std::vector<SimMap> maps;
    maps.reserve(pairs.size());
    for (const auto& p : pairs) maps.push_back(build_sim_map(tokens[slot.at(p.s1)], tokens[slot.at(p.s2)]));
    return verifier.score_batch(maps);
  };
}

std::size_t CosineHistogram::bin_of(double cosine) {
  const double x = std::clamp(cosine, -1.0, 1.0);
  const auto b = static_cast<std::size_t>(std::floor((x + 1.0) / 2.0 * static_cast<double>(kHistogramBins)));
  return std::min(b, kHistogramBins - 1);
}

std::string CosineHistogram::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "family,bin,lo,hi,count\n";
  const double width = 2.0 / static_cast<double>(kHistogramBins);
  for (const auto& [family, bins] : counts) {
    for (std::size_t b = 0; b < bins.size(); ++b) {
      out << to_string(family) << ',' << b << ',' << -1.0 + width * static_cast<double>(b) << ','
          << -1.0 + width * static_cast<double>(b + 1) << ',' << bins[b] << '\n';
    }
  }
  return out.str();
}

CosineHistogram cosine_histogram(std::span<const PairRecord> pairs, const EncoderParams& encoder,
                                 const TokenizerConfig& tokenizer) {
  if (pairs.empty()) throw Error(ErrorCode::kInvalidArgument, "no pairs for the histogram");
  const auto scores = cosine_scorer(encoder, tokenizer)(pairs);
  CosineHistogram h;
  std::map<Family, std::vector<double>> values;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto& bins = h.counts[pairs[i].family];
    if (bins.empty()) bins.assign(kHistogramBins, 0);
    ++bins[CosineHistogram::bin_of(scores[i])];
    values[pairs[i].family].push_back(scores[i]);
  }
  for (const auto& [family, v] : values) h.means[family] = mean_std(v).mean;
  return h;
}

}  // namespace compose
