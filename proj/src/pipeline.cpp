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

#include "compose/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "compose/error.hpp"
#include "compose/parallel.hpp"
#include "compose/params.hpp"

namespace compose {

namespace fs = std::filesystem;

namespace {

constexpr const char* kReportNote =
    "Synthetic template data. The generic benchmark is a disjoint-lexicon world standing in for "
    "out-of-domain retrieval; summary values are mean and sample std across seeds.";

void say(const Logger& log, const std::string& line) {
  if (log) log(line);
}

std::vector<Family> near_miss_families(const RunConfig& cfg) {
  std::vector<Family> out;
  for (const auto& name : cfg.families) out.push_back(*parse_family(name));
  return out;
}

bool trains(const RunConfig& cfg, VerifierKind kind) {
  if (kind == VerifierKind::kF0 || kind == VerifierKind::kF1) return false;
  if (kind == VerifierKind::kF2) return cfg.f2_fit;
  return true;
}

std::string seed_dir_name(std::uint64_t seed) { return "seed-" + std::to_string(seed); }

}  // namespace

DataBundle generate_data(const RunConfig& cfg) {
  cfg.validate();
  const auto world = TemplateWorld::builtin(cfg.train_world);
  const auto eval_world = TemplateWorld::builtin(cfg.eval_world);
  const std::uint64_t seed = cfg.data_seed;
  DataBundle d;
  const TripletSet raw = gen_standard_triplets(world, cfg.standard_triplets, seed);
  std::vector<PairRecord> pairs;
  auto families = near_miss_families(cfg);
  families.push_back(Family::kParaphrase);
  for (Family f : families) {
    auto p = gen_pairs(world, f, cfg.pairs_per_family, seed);
    pairs.insert(pairs.end(), p.begin(), p.end());
  }
  std::tie(d.pairs_train, d.pairs_heldout) = split_pairs(pairs, cfg.split_ratio, seed);
  d.structural = make_structural_triplets(d.pairs_train);
  d.standard = mix_datasets(raw, d.structural, 0.0, seed);
  d.mixed = mix_datasets(raw, d.structural, cfg.structural_fraction, seed);
  d.generic = gen_retrieval_benchmark(eval_world, Partition::kAll, cfg.bench_docs,
                                      cfg.bench_queries, seed);
  d.indomain = gen_retrieval_benchmark(world, Partition::kHeldout, cfg.bench_docs,
                                       cfg.bench_queries, seed);
  return d;
}

void write_text(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

void write_data(const DataBundle& d, const fs::path& dir, const RunConfig& cfg) {
  fs::create_directories(dir);
  write_triplets_jsonl(dir / "standard.jsonl", d.standard);
  write_triplets_jsonl(dir / "structural.jsonl", d.structural);
  write_triplets_jsonl(dir / "mixed.jsonl", d.mixed);
  write_pairs_jsonl(dir / "pairs_train.jsonl", d.pairs_train);
  write_pairs_jsonl(dir / "pairs_heldout.jsonl", d.pairs_heldout);
  for (const auto& [name, bench] : {std::pair<std::string, const RetrievalBenchmark*>{"generic", &d.generic},
                                    {"indomain", &d.indomain}}) {
    write_corpus_jsonl(dir / (name + "_corpus.jsonl"), bench->corpus);
    write_corpus_jsonl(dir / (name + "_queries.jsonl"), bench->queries);
    write_qrels_tsv(dir / (name + "_qrels.tsv"), bench->qrels);
  }
  nlohmann::ordered_json m;
  m["command"] = "gen-data";
  m["data_seed"] = cfg.data_seed;
  m["counts"] = {{"standard", d.standard.size()},
                 {"structural", d.structural.size()},
                 {"mixed", d.mixed.size()},
                 {"pairs_train", d.pairs_train.size()},
                 {"pairs_heldout", d.pairs_heldout.size()},
                 {"generic_docs", d.generic.corpus.size()},
                 {"generic_queries", d.generic.queries.size()},
                 {"indomain_docs", d.indomain.corpus.size()},
                 {"indomain_queries", d.indomain.queries.size()}};
  m["config"] = cfg.to_json();
  write_text(dir / "manifest.json", m.dump(2) + "\n");
}

DataBundle load_data(const fs::path& dir) {
  DataBundle d;
  d.standard = load_triplets_jsonl(dir / "standard.jsonl");
  d.structural = load_triplets_jsonl(dir / "structural.jsonl");
  d.mixed = load_triplets_jsonl(dir / "mixed.jsonl");
  d.pairs_train = load_pairs_jsonl(dir / "pairs_train.jsonl");
  d.pairs_heldout = load_pairs_jsonl(dir / "pairs_heldout.jsonl");
  for (const auto& [name, bench] : {std::pair<std::string, RetrievalBenchmark*>{"generic", &d.generic},
                                    {"indomain", &d.indomain}}) {
    bench->corpus = load_corpus_jsonl(dir / (name + "_corpus.jsonl"));
    bench->queries = load_corpus_jsonl(dir / (name + "_queries.jsonl"));
    bench->qrels = load_qrels_tsv(dir / (name + "_qrels.tsv"));
    bench->qrels.validate(bench->queries, bench->corpus);
  }
  return d;
}

TokenizerConfig tokenizer_config(const RunConfig& cfg) {
  TokenizerConfig t;
  t.vocab_buckets = cfg.vocab_buckets;
  t.max_len = cfg.max_len;
  t.validate();
  return t;
}

EncoderParams initial_encoder(const RunConfig& cfg, std::uint64_t seed) {
  return EncoderParams::initialize(cfg.dim, cfg.vocab_buckets, cfg.mix,
                                   derive_seed(seed, "encoder-init"));
}

TrainConfig encoder_train_config(const RunConfig& cfg, Regime regime, std::uint64_t seed) {
  TrainConfig t;
  t.regime = regime;
  t.temperature = cfg.temperature;
  t.lr_encoder = cfg.lr_encoder;
  t.weight_decay = cfg.weight_decay;
  t.warmup_ratio = cfg.warmup_ratio;
  t.batch_size = cfg.batch_size;
  t.steps = cfg.steps;
  t.seed = seed;
  t.log_every = cfg.log_every;
  t.patience = cfg.patience;
  t.tokenizer = tokenizer_config(cfg);
  return t;
}

TrainConfig verifier_train_config(const RunConfig& cfg, Regime regime, VerifierKind kind,
                                  std::uint64_t seed) {
  TrainConfig t = encoder_train_config(cfg, regime, seed);
  const bool align = kind == VerifierKind::kF2;
  t.lr_encoder = regime == Regime::kEndToEnd ? cfg.lr_encoder_e2e : 0.0;
  t.lr_verifier = align ? cfg.lr_align : cfg.lr_verifier;
  t.batch_size = align ? cfg.align_batch_size : cfg.verifier_batch_size;
  t.steps = align ? cfg.align_steps : cfg.verifier_steps;
  return t;
}

VerifierConfig verifier_config(const RunConfig& cfg, VerifierKind kind) {
  VerifierConfig v;
  v.kind = kind;
  v.align.lambda = cfg.f2_lambda;
  v.align.tau_align = cfg.f2_tau;
  v.cnn.side = cfg.map_side;
  v.cnn.channels1 = cfg.cnn_channels1;
  v.cnn.channels2 = cfg.cnn_channels2;
  v.cnn.pool = cfg.cnn_pool;
  v.cnn.hidden = cfg.cnn_hidden;
  v.transformer.side = cfg.map_side;
  v.transformer.patch = cfg.patch;
  v.transformer.d_model = cfg.d_model;
  v.transformer.heads = cfg.heads;
  v.transformer.layers = cfg.layers;
  v.transformer.ffn = cfg.ffn;
  return v;
}

std::vector<std::pair<std::string, PooledKey>> pooled_keys(const std::vector<CorpusRecord>& texts,
                                                           const EncoderParams& encoder,
                                                           const TokenizerConfig& tokenizer) {
  std::vector<std::pair<std::string, PooledKey>> out(texts.size());
  parallel_for(texts.size(), [&](std::size_t i) {
    out[i] = {texts[i].id, encode_pooled(texts[i].text, encoder, tokenizer)};
  });
  return out;
}

TokenLookup token_lookup(const std::vector<CorpusRecord>& texts, const EncoderParams& encoder,
                         const TokenizerConfig& tokenizer) {
  std::vector<TokenMatrix> rows(texts.size());
  parallel_for(texts.size(),
               [&](std::size_t i) { rows[i] = encode_text(texts[i].text, encoder, tokenizer); });
  TokenLookup out;
  for (std::size_t i = 0; i < texts.size(); ++i) out.emplace(texts[i].id, std::move(rows[i]));
  return out;
}

RankedRun stage1(const RetrievalBenchmark& bench, const EncoderParams& encoder,
                 const TokenizerConfig& tokenizer, const SearchConfig& search) {
  const auto index = PooledIndex::build(pooled_keys(bench.corpus, encoder, tokenizer));
  return stage1_run(index, pooled_keys(bench.queries, encoder, tokenizer), search);
}

RetrievalMetrics score_run(const RankedRun& run, const QRels& qrels) {
  return {ndcg_at_k(run, qrels, 10), acc_at_1(run, qrels)};
}

namespace {

SearchConfig search_config(const RunConfig& cfg) {
  SearchConfig s;
  s.k = cfg.k;
  s.threshold_tau = cfg.threshold;
  return s;
}

}  // namespace

EncoderOutcome run_encoder(const RunConfig& cfg, const DataBundle& data, Regime regime,
                           std::uint64_t seed) {
  if (regime != Regime::kEncoderA && regime != Regime::kEncoderB) {
    throw Error(ErrorCode::kInvalidArgument, "encoder runs use encoder_A or encoder_B");
  }
  const TokenizerConfig tok = tokenizer_config(cfg);
  const SearchConfig search = search_config(cfg);
  const EvalHook hook = [&](const EncoderParams& enc, const Verifier*) {
    const auto m = score_run(stage1(data.indomain, enc, tok, search), data.indomain.qrels);
    return EvalPoint{m.ndcg10, m.acc1};
  };
  const TripletSet& set = regime == Regime::kEncoderA ? data.standard : data.mixed;
  auto trained = train_encoder(set, initial_encoder(cfg, seed),
                               encoder_train_config(cfg, regime, seed), hook);
  EncoderOutcome out{regime, std::move(trained.encoder), std::move(trained.log), {}, {}, {}, {}};
  out.generic = score_run(stage1(data.generic, out.encoder, tok, search), data.generic.qrels);
  out.indomain = score_run(stage1(data.indomain, out.encoder, tok, search), data.indomain.qrels);
  out.nearmiss = nearmiss_eval(data.pairs_heldout, cosine_scorer(out.encoder, tok));
  out.histogram = cosine_histogram(data.pairs_heldout, out.encoder, tok);
  return out;
}

VerifierOutcome run_verifier(const RunConfig& cfg, const DataBundle& data,
                             const EncoderParams& base, const RankedRun& base_run,
                             VerifierKind kind, Regime regime, std::uint64_t seed) {
  if (regime != Regime::kVerifierFrozen && regime != Regime::kEndToEnd) {
    throw Error(ErrorCode::kInvalidArgument, "verifier runs use verifier_frozen or end_to_end");
  }
  const TokenizerConfig tok = tokenizer_config(cfg);
  const Verifier init = Verifier::create(
      verifier_config(cfg, kind), derive_seed(seed, "verifier-init-" + std::string(to_string(kind))));
  const TrainConfig tcfg = verifier_train_config(cfg, regime, kind, seed);
  EvalHook hook;
  if (cfg.patience > 0) {
    hook = [&](const EncoderParams& enc, const Verifier* v) {
      const auto run = rerank(base_run, *v, token_lookup(data.indomain.queries, enc, tok),
                              token_lookup(data.indomain.corpus, enc, tok));
      const auto m = score_run(run, data.indomain.qrels);
      return EvalPoint{m.ndcg10, m.acc1};
    };
  }
  VerifierOutcome out{kind, regime, init, std::nullopt, std::nullopt, {}, {}};
  if (regime == Regime::kEndToEnd) {
    if (!init.learnable()) {
      throw Error(ErrorCode::kNonLearnableKind,
                  std::string(to_string(kind)) + " has no parameters to train end to end");
    }
    auto r = train_end_to_end(data.mixed, base, init, tcfg, hook);
    out.verifier = std::move(r.verifier);
    out.encoder = std::move(r.encoder);
    out.log = std::move(r.log);
  } else if (trains(cfg, kind)) {
    auto r = train_verifier(data.mixed, base, init, tcfg, hook);
    out.verifier = std::move(r.verifier);
    out.log = std::move(r.log);
  }
  const EncoderParams& enc = out.encoder ? *out.encoder : base;
  const auto run = rerank(base_run, out.verifier, token_lookup(data.generic.queries, enc, tok),
                          token_lookup(data.generic.corpus, enc, tok));
  out.rerank = score_run(run, data.generic.qrels);
  out.nearmiss = nearmiss_eval(data.pairs_heldout, verifier_scorer(out.verifier, enc, tok));
  return out;
}

std::vector<std::pair<VerifierKind, Regime>> verifier_grid() {
  return {{VerifierKind::kF0, Regime::kVerifierFrozen}, {VerifierKind::kF1, Regime::kVerifierFrozen},
          {VerifierKind::kF2, Regime::kVerifierFrozen}, {VerifierKind::kF3, Regime::kVerifierFrozen},
          {VerifierKind::kF4, Regime::kVerifierFrozen}, {VerifierKind::kF3, Regime::kEndToEnd},
          {VerifierKind::kF4, Regime::kEndToEnd}};
}

std::string run_label(Regime regime, std::optional<VerifierKind> kind, std::uint64_t seed) {
  std::string label = kind ? std::string(to_string(*kind)) + "_" : std::string();
  return label + std::string(to_string(regime)) + "_seed" + std::to_string(seed);
}

nlohmann::ordered_json metrics_json(const RetrievalMetrics& m) {
  return {{"ndcg10", m.ndcg10}, {"acc1", m.acc1}};
}

nlohmann::ordered_json nearmiss_json(const NearMissReport& r) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& f : r.families) {
    nlohmann::ordered_json e;
    e["mean"] = f.stats.mean;
    e["std"] = f.stats.std;
    e["count"] = f.stats.count;
    if (f.auc) e["auc"] = *f.auc;
    j[std::string(to_string(f.family))] = std::move(e);
  }
  j["auc"] = r.auc ? nlohmann::ordered_json(*r.auc) : nlohmann::ordered_json(nullptr);
  return j;
}

namespace {

// Mean and sample std of every numeric leaf across the per-seed objects.
nlohmann::ordered_json summarize(const std::vector<const nlohmann::ordered_json*>& items) {
  const auto& first = *items.front();
  if (first.is_object()) {
    nlohmann::ordered_json out = nlohmann::ordered_json::object();
    for (const auto& [key, value] : first.items()) {
      std::vector<const nlohmann::ordered_json*> sub;
      for (const auto* it : items) {
        if (it->contains(key)) sub.push_back(&(*it)[key]);
      }
      if (key == "count" || sub.size() != items.size()) continue;
      out[key] = summarize(sub);
    }
    return out;
  }
  if (first.is_number()) {
    std::vector<double> values;
    for (const auto* it : items) {
      if (!it->is_number()) return nullptr;
      values.push_back(it->get<double>());
    }
    const MeanStd ms = mean_std(values);
    return {{"mean", ms.mean}, {"std", ms.std}};
  }
  return nullptr;
}

double mean_at(const nlohmann::ordered_json& summary, const std::vector<std::string>& path) {
  const nlohmann::ordered_json* node = &summary;
  for (const auto& key : path) {
    if (!node->is_object() || !node->contains(key)) return std::nan("");
    node = &(*node)[key];
  }
  if (!node->is_object() || !node->contains("mean")) return std::nan("");
  return (*node)["mean"].get<double>();
}

}  // namespace

std::string reproduce(const RunConfig& cfg, const Logger& log) {
  cfg.validate();
  const fs::path out(cfg.out);
  const TokenizerConfig tok = tokenizer_config(cfg);
  const SearchConfig search = search_config(cfg);
  say(log, "generating data");
  const DataBundle data = generate_data(cfg);
  write_data(data, out / "data", cfg);

  std::set<std::string> artifacts;
  const auto keep = [&](const fs::path& p) { artifacts.insert(fs::relative(p, out).generic_string()); };
  for (const char* name : {"standard.jsonl", "structural.jsonl", "mixed.jsonl", "pairs_train.jsonl",
                           "pairs_heldout.jsonl", "generic_corpus.jsonl", "generic_queries.jsonl",
                           "generic_qrels.tsv", "indomain_corpus.jsonl", "indomain_queries.jsonl",
                           "indomain_qrels.tsv", "manifest.json"}) {
    keep(out / "data" / name);
  }

  nlohmann::ordered_json seeds = nlohmann::ordered_json::object();
  std::vector<nlohmann::ordered_json> per_seed;
  for (std::uint64_t seed : cfg.seeds) {
    const fs::path dir = out / seed_dir_name(seed);
    fs::create_directories(dir);
    nlohmann::ordered_json s;
    std::optional<EncoderParams> model_a;
    for (Regime regime : {Regime::kEncoderA, Regime::kEncoderB}) {
      say(log, "seed " + std::to_string(seed) + ": training " + std::string(to_string(regime)));
      EncoderOutcome r = run_encoder(cfg, data, regime, seed);
      const std::string label = run_label(regime, std::nullopt, seed);
      r.encoder.save(dir / (label + ".enc1"));
      r.log.write_jsonl(dir / (label + "_log.jsonl"));
      write_text(dir / (label + "_cosine_hist.csv"), r.histogram.to_csv());
      for (const char* ext : {".enc1", "_log.jsonl", "_cosine_hist.csv"}) keep(dir / (label + ext));
      nlohmann::ordered_json e;
      e["generic"] = metrics_json(r.generic);
      e["indomain"] = metrics_json(r.indomain);
      e["nearmiss_cosine"] = nearmiss_json(r.nearmiss);
      s[std::string(to_string(regime))] = std::move(e);
      if (regime == Regime::kEncoderA) model_a = std::move(r.encoder);
    }
    const RankedRun base_run = stage1(data.generic, *model_a, tok, search);
    nlohmann::ordered_json verifiers = nlohmann::ordered_json::object();
    for (const auto& [kind, regime] : verifier_grid()) {
      const std::string label = run_label(regime, kind, seed);
      say(log, "seed " + std::to_string(seed) + ": " + label);
      VerifierOutcome r = run_verifier(cfg, data, *model_a, base_run, kind, regime, seed);
      r.verifier.save(dir / (label + ".vrf1"));
      keep(dir / (label + ".vrf1"));
      if (r.log) {
        r.log->write_jsonl(dir / (label + "_log.jsonl"));
        keep(dir / (label + "_log.jsonl"));
      }
      if (r.encoder) {
        r.encoder->save(dir / (label + ".enc1"));
        keep(dir / (label + ".enc1"));
      }
      nlohmann::ordered_json e;
      e["trained"] = r.log.has_value();
      if (kind == VerifierKind::kF2) {
        const auto a = r.verifier.alignment();
        e["lambda"] = a.lambda;
        e["tau_align"] = a.tau_align;
      }
      e["rerank"] = metrics_json(r.rerank);
      e["nearmiss"] = nearmiss_json(r.nearmiss);
      verifiers[std::string(to_string(kind)) + "_" + std::string(to_string(regime))] = std::move(e);
    }
    s["stage1"] = metrics_json(score_run(base_run, data.generic.qrels));
    s["verifiers"] = std::move(verifiers);
    seeds[std::to_string(seed)] = s;
    per_seed.push_back(std::move(s));
  }

  std::vector<const nlohmann::ordered_json*> items;
  for (const auto& s : per_seed) items.push_back(&s);
  const nlohmann::ordered_json summary = summarize(items);

  // Directional findings, evaluated on the cross-seed means.
  const auto m = [&](std::vector<std::string> path) { return mean_at(summary, path); };
  nlohmann::ordered_json checks;
  checks["model_b_generic_ndcg10_not_above_model_a"] =
      m({"encoder_B", "generic", "ndcg10"}) <= m({"encoder_A", "generic", "ndcg10"});
  for (const auto& fam : cfg.families) {
    checks["model_b_" + fam + "_cosine_below_model_a"] =
        m({"encoder_B", "nearmiss_cosine", fam, "mean"}) <
        m({"encoder_A", "nearmiss_cosine", fam, "mean"});
  }
  checks["f1_rerank_ndcg10_not_below_f2"] =
      m({"verifiers", "f1_verifier_frozen", "rerank", "ndcg10"}) >=
      m({"verifiers", "f2_verifier_frozen", "rerank", "ndcg10"});
  checks["f1_auc_below_f4_end_to_end"] = m({"verifiers", "f1_verifier_frozen", "nearmiss", "auc"}) <
                                         m({"verifiers", "f4_end_to_end", "nearmiss", "auc"});
  checks["f4_end_to_end_auc_at_least_0.9"] = m({"verifiers", "f4_end_to_end", "nearmiss", "auc"}) >= 0.9;

  nlohmann::ordered_json report;
  report["note"] = kReportNote;
  report["config"] = cfg.to_json();
  report["seeds"] = std::move(seeds);
  report["summary"] = summary;
  report["checks"] = std::move(checks);
  const std::string text = report.dump(2) + "\n";
  write_text(out / "report.json", text);
  keep(out / "report.json");

  nlohmann::ordered_json manifest;
  manifest["command"] = "reproduce";
  manifest["config"] = cfg.to_json();
  manifest["artifacts"] = std::vector<std::string>(artifacts.begin(), artifacts.end());
  write_text(out / "manifest.json", manifest.dump(2) + "\n");
  say(log, "wrote " + (out / "report.json").string());
  return text;
}

}  // namespace compose
