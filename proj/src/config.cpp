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

#include "compose/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <type_traits>

#include "compose/error.hpp"

namespace compose {

namespace {

[[noreturn]] void config_error(std::string_view key, const std::string& what) {
  throw Error(ErrorCode::kConfigError, "key '" + std::string(key) + "': " + what);
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::size_t end = comma == std::string_view::npos ? text.size() : comma;
    if (end > start) out.emplace_back(text.substr(start, end - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <class T>
T parse_integer(std::string_view key, std::string_view text) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    config_error(key, "expected a non-negative integer, got '" + std::string(text) + "'");
  }
  return value;
}

double parse_double(std::string_view key, std::string_view text) {
  const std::string s(text);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) {
    config_error(key, "expected a number, got '" + s + "'");
  }
  return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  config_error(key, "expected true or false, got '" + std::string(text) + "'");
}

// Conversions for every member type that appears in RunConfig.
template <class T>
struct Codec;

template <>
struct Codec<std::string> {
  static nlohmann::ordered_json to(const std::string& v) { return v; }
  static std::string from(std::string_view key, const nlohmann::json& j) {
    if (!j.is_string()) config_error(key, "expected a string");
    return j.get<std::string>();
  }
  static std::string parse(std::string_view, std::string_view s) { return std::string(s); }
};

template <class T>
  requires std::is_unsigned_v<T>
struct Codec<T> {
  static nlohmann::ordered_json to(T v) { return v; }
  static T from(std::string_view key, const nlohmann::json& j) {
    if (!j.is_number_unsigned() ||
        j.get<std::uint64_t>() > std::numeric_limits<T>::max()) {
      config_error(key, "expected a non-negative integer");
    }
    return static_cast<T>(j.get<std::uint64_t>());
  }
  static T parse(std::string_view key, std::string_view s) { return parse_integer<T>(key, s); }
};

template <>
struct Codec<double> {
  static nlohmann::ordered_json to(double v) { return v; }
  static double from(std::string_view key, const nlohmann::json& j) {
    if (!j.is_number()) config_error(key, "expected a number");
    return j.get<double>();
  }
  static double parse(std::string_view key, std::string_view s) { return parse_double(key, s); }
};

template <>
struct Codec<bool> {
  static nlohmann::ordered_json to(bool v) { return v; }
  static bool from(std::string_view key, const nlohmann::json& j) {
    if (!j.is_boolean()) config_error(key, "expected true or false");
    return j.get<bool>();
  }
  static bool parse(std::string_view key, std::string_view s) { return parse_bool(key, s); }
};

template <>
struct Codec<std::optional<double>> {
  static nlohmann::ordered_json to(const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  }
  static std::optional<double> from(std::string_view key, const nlohmann::json& j) {
    if (j.is_null()) return std::nullopt;
    return Codec<double>::from(key, j);
  }
  static std::optional<double> parse(std::string_view key, std::string_view s) {
    if (s == "none") return std::nullopt;
    return parse_double(key, s);
  }
};

template <>
struct Codec<std::vector<std::uint64_t>> {
  static nlohmann::ordered_json to(const std::vector<std::uint64_t>& v) { return v; }
  static std::vector<std::uint64_t> from(std::string_view key, const nlohmann::json& j) {
    if (!j.is_array()) config_error(key, "expected an array of integers");
    std::vector<std::uint64_t> out;
    for (const auto& e : j) out.push_back(Codec<std::uint64_t>::from(key, e));
    return out;
  }
  static std::vector<std::uint64_t> parse(std::string_view key, std::string_view s) {
    std::vector<std::uint64_t> out;
    for (const auto& part : split_list(s)) out.push_back(parse_integer<std::uint64_t>(key, part));
    return out;
  }
};

template <>
struct Codec<std::vector<std::string>> {
  static nlohmann::ordered_json to(const std::vector<std::string>& v) { return v; }
  static std::vector<std::string> from(std::string_view key, const nlohmann::json& j) {
    if (!j.is_array()) config_error(key, "expected an array of strings");
    std::vector<std::string> out;
    for (const auto& e : j) out.push_back(Codec<std::string>::from(key, e));
    return out;
  }
  static std::vector<std::string> parse(std::string_view, std::string_view s) {
    return split_list(s);
  }
};

struct Field {
  std::string name;
  std::string help;
  std::function<nlohmann::ordered_json(const RunConfig&)> get;
  std::function<void(RunConfig&, const nlohmann::json&)> from_json;
  std::function<void(RunConfig&, std::string_view)> parse;
};

template <class T>
Field field(std::string name, T RunConfig::*member, std::string help) {
  Field f;
  f.name = name;
  f.help = std::move(help);
  f.get = [member](const RunConfig& c) { return Codec<T>::to(c.*member); };
  f.from_json = [member, name](RunConfig& c, const nlohmann::json& j) {
    c.*member = Codec<T>::from(name, j);
  };
  f.parse = [member, name](RunConfig& c, std::string_view s) { c.*member = Codec<T>::parse(name, s); };
  return f;
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      field("out", &RunConfig::out, "output directory"),
      field("data", &RunConfig::data, "data directory (default <out>/data)"),
      field("encoder", &RunConfig::encoder, "encoder file (ENC1)"),
      field("verifier_path", &RunConfig::verifier_path, "verifier file (VRF1)"),
      field("corpus", &RunConfig::corpus, "corpus JSONL"),
      field("queries", &RunConfig::queries, "query JSONL"),
      field("qrels", &RunConfig::qrels, "relevance judgments TSV"),
      field("pairs", &RunConfig::pairs, "pair JSONL"),
      field("input", &RunConfig::input, "input file"),
      field("output", &RunConfig::output, "output file"),
      field("index", &RunConfig::index, "pooled-key store (EMB1, one row per record)"),
      field("run", &RunConfig::run, "ranked run TSV"),
      field("query_store", &RunConfig::query_store, "query token store (EMB1)"),
      field("doc_store", &RunConfig::doc_store, "document token store (EMB1)"),
      field("seed", &RunConfig::seed, "training seed"),
      field("seeds", &RunConfig::seeds, "seeds for reproduce"),
      field("data_seed", &RunConfig::data_seed, "data generation seed"),
      field("train_world", &RunConfig::train_world, "template world for training data"),
      field("eval_world", &RunConfig::eval_world, "template world for generic retrieval"),
      field("standard_triplets", &RunConfig::standard_triplets, "standard triplet count"),
      field("pairs_per_family", &RunConfig::pairs_per_family, "pairs per family"),
      field("families", &RunConfig::families, "near-miss families"),
      field("split_ratio", &RunConfig::split_ratio, "train share of the pair split"),
      field("structural_fraction", &RunConfig::structural_fraction, "structural share of the mix"),
      field("bench_docs", &RunConfig::bench_docs, "benchmark corpus size"),
      field("bench_queries", &RunConfig::bench_queries, "benchmark query count"),
      field("dim", &RunConfig::dim, "encoder dimension"),
      field("vocab_buckets", &RunConfig::vocab_buckets, "hash buckets"),
      field("max_len", &RunConfig::max_len, "token cap"),
      field("mix", &RunConfig::mix, "learn a mixing matrix"),
      field("k", &RunConfig::k, "Stage-1 candidate count"),
      field("threshold", &RunConfig::threshold, "cosine acceptance threshold or none"),
      field("regime", &RunConfig::regime, "encoder_A|encoder_B|verifier_frozen|end_to_end"),
      field("temperature", &RunConfig::temperature, "MNRL temperature"),
      field("lr_encoder", &RunConfig::lr_encoder, "encoder learning rate"),
      field("lr_verifier", &RunConfig::lr_verifier, "verifier learning rate"),
      field("lr_encoder_e2e", &RunConfig::lr_encoder_e2e, "encoder learning rate in end-to-end"),
      field("weight_decay", &RunConfig::weight_decay, "AdamW weight decay"),
      field("warmup_ratio", &RunConfig::warmup_ratio, "warmup share of the steps"),
      field("batch_size", &RunConfig::batch_size, "encoder batch size"),
      field("steps", &RunConfig::steps, "encoder steps"),
      field("verifier_batch_size", &RunConfig::verifier_batch_size, "verifier batch size"),
      field("verifier_steps", &RunConfig::verifier_steps, "verifier steps"),
      field("lr_align", &RunConfig::lr_align, "F2 learning rate"),
      field("align_batch_size", &RunConfig::align_batch_size, "F2 batch size"),
      field("align_steps", &RunConfig::align_steps, "F2 steps"),
      field("log_every", &RunConfig::log_every, "log interval in steps"),
      field("patience", &RunConfig::patience, "early-stopping patience (0 disables)"),
      field("verifier", &RunConfig::verifier, "f0|f1|f2|f3|f4"),
      field("f2_lambda", &RunConfig::f2_lambda, "F2 distance penalty"),
      field("f2_tau", &RunConfig::f2_tau, "F2 softmax temperature"),
      field("f2_fit", &RunConfig::f2_fit, "train F2 in the verifier grid"),
      field("map_side", &RunConfig::map_side, "F3/F4 map side"),
      field("patch", &RunConfig::patch, "F4 patch size"),
      field("d_model", &RunConfig::d_model, "F4 width"),
      field("heads", &RunConfig::heads, "F4 attention heads"),
      field("layers", &RunConfig::layers, "F4 layers"),
      field("ffn", &RunConfig::ffn, "F4 feed-forward width"),
      field("cnn_channels1", &RunConfig::cnn_channels1, "F3 first conv channels"),
      field("cnn_channels2", &RunConfig::cnn_channels2, "F3 second conv channels"),
      field("cnn_pool", &RunConfig::cnn_pool, "F3 pooled grid side"),
      field("cnn_hidden", &RunConfig::cnn_hidden, "F3 hidden width"),
      field("geo_concepts", &RunConfig::geo_concepts, "geometry concept count"),
      field("geo_dim", &RunConfig::geo_dim, "geometry dimension"),
      field("geo_count", &RunConfig::geo_count, "geometry instances per family"),
      field("noise_angle", &RunConfig::noise_angle, "paraphrase rotation in radians"),
      field("grid_step", &RunConfig::grid_step, "threshold sweep step"),
  };
  return table;
}

const Field* find_field(std::string_view key) {
  for (const auto& f : fields()) {
    if (f.name == key) return &f;
  }
  return nullptr;
}

}  // namespace

const std::vector<RunConfig::KeyInfo>& RunConfig::keys() {
  static const std::vector<KeyInfo> out = [] {
    std::vector<KeyInfo> v;
    for (const auto& f : fields()) v.push_back({f.name, f.help});
    return v;
  }();
  return out;
}

nlohmann::ordered_json RunConfig::to_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& f : fields()) j[f.name] = f.get(*this);
  return j;
}

void RunConfig::apply_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kConfigError, "config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    const Field* f = find_field(key);
    if (!f) config_error(key, "unknown key");
    f->from_json(*this, value);
  }
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kConfigError, path.string() + ": " + e.what());
  }
  apply_json(j);
}

void RunConfig::set(std::string_view key, std::string_view value) {
  const Field* f = find_field(key);
  if (!f) config_error(key, "unknown key");
  f->parse(*this, value);
}

void RunConfig::validate() const {
  const auto require = [](bool ok, std::string_view key, const char* what) {
    if (!ok) config_error(key, what);
  };
  require(!out.empty(), "out", "must not be empty");
  require(!seeds.empty(), "seeds", "must list at least one seed");
  require(standard_triplets >= 1, "standard_triplets", "must be >= 1");
  require(pairs_per_family >= 1, "pairs_per_family", "must be >= 1");
  require(!families.empty(), "families", "must list at least one family");
  for (const auto& name : families) {
    require(name == "negation" || name == "binding" || name == "spatial", "families",
            "entries must be negation, binding or spatial");
  }
  require(std::set<std::string>(families.begin(), families.end()).size() == families.size(),
          "families", "entries must be distinct");
  require(split_ratio > 0.0 && split_ratio < 1.0, "split_ratio", "must be in (0, 1)");
  require(structural_fraction >= 0.0 && structural_fraction < 1.0, "structural_fraction",
          "must be in [0, 1)");
  require(bench_queries >= 1 && bench_queries <= bench_docs, "bench_queries",
          "must be in [1, bench_docs]");
  require(dim >= 2, "dim", "must be >= 2");
  require(vocab_buckets >= 2, "vocab_buckets", "must be >= 2");
  require(max_len >= 1, "max_len", "must be >= 1");
  require(k >= 1, "k", "must be >= 1");
  require(!threshold || (*threshold >= -1.0 && *threshold <= 1.0), "threshold",
          "must be in [-1, 1]");
  require(temperature > 0.0, "temperature", "must be > 0");
  require(lr_encoder >= 0.0, "lr_encoder", "must be >= 0");
  require(lr_verifier >= 0.0, "lr_verifier", "must be >= 0");
  require(lr_encoder_e2e >= 0.0, "lr_encoder_e2e", "must be >= 0");
  require(weight_decay >= 0.0, "weight_decay", "must be >= 0");
  require(warmup_ratio >= 0.0 && warmup_ratio <= 1.0, "warmup_ratio", "must be in [0, 1]");
  require(batch_size >= 2, "batch_size", "must be >= 2");
  require(verifier_batch_size >= 2, "verifier_batch_size", "must be >= 2");
  require(align_batch_size >= 2, "align_batch_size", "must be >= 2");
  require(align_steps >= 1, "align_steps", "must be >= 1");
  require(lr_align >= 0.0, "lr_align", "must be >= 0");
  require(steps >= 1, "steps", "must be >= 1");
  require(verifier_steps >= 1, "verifier_steps", "must be >= 1");
  require(log_every >= 1, "log_every", "must be >= 1");
  require(verifier == "cosine" || verifier == "f0" || verifier == "f1" || verifier == "f2" ||
              verifier == "f3" || verifier == "f4",
          "verifier", "must be cosine or f0..f4");
  require(regime == "encoder_A" || regime == "encoder_B" || regime == "verifier_frozen" ||
              regime == "end_to_end" || regime == "A" || regime == "B" || regime == "frozen" ||
              regime == "e2e",
          "regime", "must be encoder_A, encoder_B, verifier_frozen or end_to_end");
  require(f2_lambda >= 0.0, "f2_lambda", "must be >= 0");
  require(f2_tau >= 1e-3, "f2_tau", "must be >= 0.001");
  require(patch >= 1 && map_side % patch == 0, "patch", "must divide map_side");
  require(heads >= 1 && d_model % heads == 0, "heads", "must divide d_model");
  require(geo_concepts >= 5 && geo_concepts <= geo_dim, "geo_concepts",
          "must be in [5, geo_dim]");
  require(geo_count >= 1, "geo_count", "must be >= 1");
  require(grid_step > 0.0 && grid_step <= 1.0, "grid_step", "must be in (0, 1]");
}

}  // namespace compose
