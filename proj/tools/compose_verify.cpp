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

// compose_verify: command-line entry point for data generation, training,
// retrieval, reranking, evaluation and the full reproduction run.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "compose/config.hpp"
#include "compose/datagen.hpp"
#include "compose/embstore.hpp"
#include "compose/encoder.hpp"
#include "compose/error.hpp"
#include "compose/evalkit.hpp"
#include "compose/geometry.hpp"
#include "compose/index.hpp"
#include "compose/pipeline.hpp"
#include "compose/train.hpp"
#include "compose/verifiers.hpp"

namespace fs = std::filesystem;
using namespace compose;

namespace {

void log_line(const std::string& line) { std::cerr << line << std::endl; }

std::string flag_name(const std::string& key) {
  std::string s = key;
  for (char& c : s) {
    if (c == '_') c = '-';
  }
  return "--" + s;
}

fs::path or_default(const std::string& value, const fs::path& fallback) {
  return value.empty() ? fallback : fs::path(value);
}

fs::path data_dir(const RunConfig& cfg) { return or_default(cfg.data, fs::path(cfg.out) / "data"); }

[[noreturn]] void missing(const char* key) {
  throw Error(ErrorCode::kConfigError, std::string("key '") + key + "' is required for this command");
}

const std::string& required(const std::string& value, const char* key) {
  if (value.empty()) missing(key);
  return value;
}

void write_manifest(const fs::path& dir, const std::string& command, const RunConfig& cfg,
                    const std::vector<fs::path>& outputs) {
  nlohmann::ordered_json m;
  m["command"] = command;
  m["config"] = cfg.to_json();
  std::vector<std::string> files;
  for (const auto& p : outputs) files.push_back(p.filename().generic_string());
  m["outputs"] = files;
  write_text(dir / (command + ".manifest.json"), m.dump(2) + "\n");
}

fs::path parent_or_cwd(const fs::path& p) {
  return p.has_parent_path() ? p.parent_path() : fs::path(".");
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

std::vector<StoreRecord> embed_records(const std::vector<CorpusRecord>& texts,
                                       const EncoderParams& enc, const TokenizerConfig& tok) {
  const TokenLookup lookup = token_lookup(texts, enc, tok);
  std::vector<StoreRecord> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back({t.id, lookup.at(t.id)});
  return out;
}

Verifier verifier_for(const RunConfig& cfg) {
  if (!cfg.verifier_path.empty()) return Verifier::load(cfg.verifier_path);
  const VerifierKind kind = parse_verifier_kind(cfg.verifier);
  if (kind == VerifierKind::kF3 || kind == VerifierKind::kF4) {
    throw Error(ErrorCode::kConfigError, "verifier " + cfg.verifier + " needs --verifier-path");
  }
  return Verifier::create(verifier_config(cfg, kind), cfg.seed);
}

// ---- Commands ------------------------------------------------------------------

void cmd_gen_data(const RunConfig& cfg) {
  const fs::path dir = data_dir(cfg);
  write_data(generate_data(cfg), dir, cfg);
  log_line("wrote data to " + dir.string());
}

void cmd_train_encoder(const RunConfig& cfg) {
  const Regime regime = parse_regime(cfg.regime);
  const DataBundle data = load_data(data_dir(cfg));
  EncoderOutcome r = run_encoder(cfg, data, regime, cfg.seed);
  const std::string label = run_label(regime, std::nullopt, cfg.seed);
  const fs::path enc = or_default(cfg.output, fs::path(cfg.out) / (label + ".enc1"));
  const fs::path dir = parent_or_cwd(enc);
  ensure_parent(enc);
  r.encoder.save(enc);
  const fs::path log = dir / (label + "_log.jsonl");
  r.log.write_jsonl(log);
  nlohmann::ordered_json metrics;
  metrics["generic"] = metrics_json(r.generic);
  metrics["indomain"] = metrics_json(r.indomain);
  metrics["nearmiss_cosine"] = nearmiss_json(r.nearmiss);
  const fs::path mpath = dir / (label + "_metrics.json");
  write_text(mpath, metrics.dump(2) + "\n");
  write_manifest(dir, "train-encoder", cfg, {enc, log, mpath});
  std::cout << metrics.dump(2) << "\n";
}

void cmd_embed(const RunConfig& cfg) {
  const auto enc = EncoderParams::load(required(cfg.encoder, "encoder"));
  const auto texts = load_corpus_jsonl(required(cfg.corpus, "corpus"));
  const fs::path out = or_default(cfg.output, fs::path(cfg.out) / "embeddings.emb1");
  ensure_parent(out);
  write_store(out, embed_records(texts, enc, tokenizer_config(cfg)));
  write_manifest(parent_or_cwd(out), "embed", cfg, {out});
  log_line("wrote " + std::to_string(texts.size()) + " records to " + out.string());
}

void cmd_build_index(const RunConfig& cfg) {
  const auto records = read_store(fs::path(required(cfg.input, "input")));
  std::vector<StoreRecord> keys;
  std::vector<std::pair<std::string, PooledKey>> entries;
  for (const auto& r : records) {
    const PooledKey key = pool_mean(r.tokens);
    entries.push_back({r.id, key});
    Matrix row(1, static_cast<Eigen::Index>(key.dim()));
    row.row(0) = key.values().transpose();
    keys.push_back({r.id, TokenMatrix(std::move(row))});
  }
  const auto index = PooledIndex::build(entries);
  const fs::path out = or_default(cfg.output, fs::path(cfg.out) / "index.emb1");
  ensure_parent(out);
  write_store(out, keys);
  write_manifest(parent_or_cwd(out), "build-index", cfg, {out});
  log_line("indexed " + std::to_string(index.size()) + " keys into " + out.string());
}

PooledIndex load_index(const fs::path& path) {
  std::vector<std::pair<std::string, PooledKey>> entries;
  for (const auto& r : read_store(path)) {
    if (r.tokens.rows() != 1) {
      throw Error(ErrorCode::kShapeMismatch, "index record '" + r.id + "' must hold one row");
    }
    entries.push_back({r.id, PooledKey::normalized(r.tokens.values().row(0).transpose())});
  }
  return PooledIndex::build(entries);
}

void cmd_search(const RunConfig& cfg) {
  const PooledIndex index = load_index(required(cfg.index, "index"));
  const auto queries = read_store(fs::path(required(cfg.query_store, "query_store")));
  SearchConfig search;
  search.k = cfg.k;
  search.threshold_tau = cfg.threshold;
  if (cfg.k > index.size()) {
    log_line("warning: k=" + std::to_string(cfg.k) + " exceeds the corpus size " +
             std::to_string(index.size()) + "; clamped to " + std::to_string(index.size()));
  }
  std::vector<std::pair<std::string, PooledKey>> keys;
  for (const auto& q : queries) keys.push_back({q.id, pool_mean(q.tokens)});
  const RankedRun run = stage1_run(index, keys, search);
  const fs::path out = or_default(cfg.output, fs::path(cfg.out) / "stage1_run.tsv");
  ensure_parent(out);
  write_run_tsv(out, run, "stage1");
  write_manifest(parent_or_cwd(out), "search", cfg, {out});
  log_line("wrote " + out.string());
}

void cmd_train_verifier(const RunConfig& cfg) {
  const Regime regime = parse_regime(cfg.regime);
  if (regime != Regime::kVerifierFrozen && regime != Regime::kEndToEnd) {
    throw Error(ErrorCode::kConfigError, "train-verifier needs regime frozen or e2e");
  }
  const VerifierKind kind = parse_verifier_kind(cfg.verifier);
  const DataBundle data = load_data(data_dir(cfg));
  const auto base = EncoderParams::load(required(cfg.encoder, "encoder"));
  const Verifier init = Verifier::create(
      verifier_config(cfg, kind), derive_seed(cfg.seed, "verifier-init-" + std::string(to_string(kind))));
  const TrainConfig tcfg = verifier_train_config(cfg, regime, kind, cfg.seed);
  const std::string label = run_label(regime, kind, cfg.seed);
  const fs::path vpath = or_default(cfg.output, fs::path(cfg.out) / (label + ".vrf1"));
  const fs::path dir = parent_or_cwd(vpath);
  ensure_parent(vpath);
  std::vector<fs::path> outputs{vpath, dir / (label + "_log.jsonl")};
  if (regime == Regime::kEndToEnd) {
    auto r = train_end_to_end(data.mixed, base, init, tcfg);
    r.verifier.save(vpath);
    r.encoder.save(dir / (label + ".enc1"));
    r.log.write_jsonl(outputs[1]);
    outputs.push_back(dir / (label + ".enc1"));
  } else {
    auto r = train_verifier(data.mixed, base, init, tcfg);
    r.verifier.save(vpath);
    r.log.write_jsonl(outputs[1]);
  }
  write_manifest(dir, "train-verifier", cfg, outputs);
  log_line("wrote " + vpath.string());
}

TokenLookup store_lookup(const fs::path& path) {
  TokenLookup out;
  for (auto& r : read_store(path)) out.emplace(r.id, std::move(r.tokens));
  return out;
}

void cmd_rerank(const RunConfig& cfg) {
  const RankedRun input = load_run_tsv(required(cfg.run, "run"));
  const Verifier verifier = verifier_for(cfg);
  const RankedRun run = rerank(input, verifier, store_lookup(required(cfg.query_store, "query_store")),
                               store_lookup(required(cfg.doc_store, "doc_store")));
  const fs::path out = or_default(
      cfg.output, fs::path(cfg.out) / ("rerank_" + std::string(to_string(verifier.kind())) + ".tsv"));
  ensure_parent(out);
  write_run_tsv(out, run, to_string(verifier.kind()));
  write_manifest(parent_or_cwd(out), "rerank", cfg, {out});
  log_line("wrote " + out.string());
}

void cmd_eval_retrieval(const RunConfig& cfg) {
  const RankedRun run = load_run_tsv(required(cfg.run, "run"));
  const QRels qrels = load_qrels_tsv(required(cfg.qrels, "qrels"));
  const auto m = score_run(run, qrels);
  nlohmann::ordered_json j = metrics_json(m);
  const std::string text = j.dump(2) + "\n";
  if (!cfg.output.empty()) {
    write_text(cfg.output, text);
    write_manifest(parent_or_cwd(cfg.output), "eval-retrieval", cfg, {cfg.output});
  }
  std::cout << text;
}

void cmd_eval_nearmiss(const RunConfig& cfg) {
  const auto pairs = load_pairs_jsonl(required(cfg.pairs, "pairs"));
  const auto enc = EncoderParams::load(required(cfg.encoder, "encoder"));
  const TokenizerConfig tok = tokenizer_config(cfg);
  NearMissReport report;
  if (cfg.verifier == "cosine" && cfg.verifier_path.empty()) {
    report = nearmiss_eval(pairs, cosine_scorer(enc, tok));
  } else {
    const Verifier v = verifier_for(cfg);
    report = nearmiss_eval(pairs, verifier_scorer(v, enc, tok));
  }
  if (!report.note.empty()) log_line("warning: " + report.note + "; AUC omitted");
  const std::string text = report.to_json();
  if (!cfg.output.empty()) {
    write_text(cfg.output, text);
    write_manifest(parent_or_cwd(cfg.output), "eval-nearmiss", cfg, {cfg.output});
  }
  std::cout << text;
}

void cmd_cosine_hist(const RunConfig& cfg) {
  const auto pairs = load_pairs_jsonl(required(cfg.pairs, "pairs"));
  const auto enc = EncoderParams::load(required(cfg.encoder, "encoder"));
  const auto hist = cosine_histogram(pairs, enc, tokenizer_config(cfg));
  const fs::path out = or_default(cfg.output, fs::path(cfg.out) / "cosine_hist.csv");
  write_text(out, hist.to_csv());
  write_manifest(parent_or_cwd(out), "cosine-hist", cfg, {out});
  for (const auto& [family, mean] : hist.means) {
    std::cout << to_string(family) << " mean " << mean << "\n";
  }
}

void cmd_geometry_demo(const RunConfig& cfg) {
  const auto space = ConceptSpace::create(cfg.geo_concepts, cfg.geo_dim, cfg.seed, cfg.noise_angle);
  const auto instances = build_identity_instances(space, cfg.geo_count);
  const MarginReport report = threshold_sweep(instances, cfg.grid_step);
  const fs::path dir(cfg.out);
  const fs::path json = dir / "margin_report.json";
  const fs::path csv = dir / "margin_curves.csv";
  write_text(json, report.to_json());
  write_text(csv, report.curves_csv());
  write_manifest(dir, "geometry-demo", cfg, {json, csv});
  std::cout << report.to_json();
}

void cmd_reproduce(const RunConfig& cfg) {
  reproduce(cfg, log_line);
}

struct Command {
  const char* name;
  const char* help;
  std::function<void(const RunConfig&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Command> commands = {
      {"gen-data", "generate triplets, pairs, benchmarks and splits", cmd_gen_data},
      {"train-encoder", "train Model A or Model B (--regime A|B)", cmd_train_encoder},
      {"embed", "encode a corpus into an EMB1 token store", cmd_embed},
      {"build-index", "pool a token store into a pooled-key index", cmd_build_index},
      {"search", "Stage-1 top-K search for a query store", cmd_search},
      {"train-verifier", "train F2/F3/F4 (--regime frozen|e2e)", cmd_train_verifier},
      {"rerank", "Stage-2 rerank of a run", cmd_rerank},
      {"eval-retrieval", "nDCG@10 and Acc@1 of a run", cmd_eval_retrieval},
      {"eval-nearmiss", "near-miss scores and AUC for pairs", cmd_eval_nearmiss},
      {"cosine-hist", "pooled-cosine histogram per family", cmd_cosine_hist},
      {"geometry-demo", "superposition threshold sweep", cmd_geometry_demo},
      {"reproduce", "full multi-seed pipeline and report", cmd_reproduce},
  };

  CLI::App app{"Two-stage retrieval with similarity-map verifiers"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_file;
  app.add_option("--config", config_file, "JSON config file");
  std::map<std::string, std::string> overrides;
  for (const auto& key : RunConfig::keys()) {
    std::string names = flag_name(key.name);
    if (key.name == "verifier") names += ",--kind";
    app.add_option(names, overrides[key.name], key.help);
  }
  std::vector<std::pair<CLI::App*, const Command*>> subs;
  for (const auto& c : commands) subs.push_back({app.add_subcommand(c.name, c.help), &c});

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    nlohmann::ordered_json j{{"error", "UsageError"}, {"message", e.what()}};
    std::cerr << j.dump() << std::endl;
    return 2;
  }

  try {
    RunConfig cfg;
    if (!config_file.empty()) cfg.load_file(config_file);
    for (const auto& key : RunConfig::keys()) {
      if (app.count(flag_name(key.name)) > 0) cfg.set(key.name, overrides[key.name]);
    }
    cfg.validate();
    for (const auto& [sub, cmd] : subs) {
      if (sub->parsed()) cmd->run(cfg);
    }
  } catch (const Error& e) {
    nlohmann::ordered_json j{{"error", std::string(to_string(e.code()))}, {"message", e.message()}};
    if (e.line()) j["line"] = *e.line();
    std::cerr << j.dump() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    nlohmann::ordered_json j{{"error", "InternalError"}, {"message", e.what()}};
    std::cerr << j.dump() << std::endl;
    return 1;
  }
  return 0;
}
