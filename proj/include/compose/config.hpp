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

// Flat run configuration shared by every command. Each key has a default;
// values come from an optional JSON file and then from command-line
// overrides. Unknown keys are rejected.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace compose {

struct RunConfig {
  // Paths. Empty values are derived from `out` by each command.
  std::string out = "runs/default";
  std::string data;
  std::string encoder;
  std::string verifier_path;
  std::string corpus;
  std::string queries;
  std::string qrels;
  std::string pairs;
  std::string input;
  std::string output;
  std::string index;
  std::string run;
  std::string query_store;
  std::string doc_store;

  // Seeds.
  std::uint64_t seed = 42;
  std::vector<std::uint64_t> seeds = {42, 43, 44};
  std::uint64_t data_seed = 42;

  // Data generation.
  std::string train_world = "train";
  std::string eval_world = "ood";
  std::size_t standard_triplets = 10000;
  std::size_t pairs_per_family = 2000;
  std::vector<std::string> families = {"negation", "binding", "spatial"};
  double split_ratio = 0.8;
  double structural_fraction = 0.192;
  std::size_t bench_docs = 2000;
  std::size_t bench_queries = 200;

  // Encoder.
  std::size_t dim = 64;
  std::uint32_t vocab_buckets = 65536;
  std::size_t max_len = 64;
  bool mix = true;

  // Retrieval.
  std::size_t k = 100;
  std::optional<double> threshold;

  // Training.
  std::string regime = "encoder_A";
  double temperature = 0.1;
  double lr_encoder = 2e-3;
  double lr_verifier = 1e-3;
  double lr_encoder_e2e = 2e-3;
  double weight_decay = 0.01;
  double warmup_ratio = 0.1;
  std::size_t batch_size = 64;
  std::size_t steps = 2000;
  std::size_t verifier_batch_size = 16;
  std::size_t verifier_steps = 600;
  double lr_align = 5e-2;
  std::size_t align_batch_size = 128;
  std::size_t align_steps = 100;
  std::size_t log_every = 50;
  std::size_t patience = 0;

  // Verifiers.
  // f0..f4; eval-nearmiss also accepts cosine.
  std::string verifier = "f4";
  double f2_lambda = 0.1;
  double f2_tau = 0.1;
  bool f2_fit = false;
  std::size_t map_side = 16;
  std::size_t patch = 4;
  std::size_t d_model = 64;
  std::size_t heads = 4;
  std::size_t layers = 2;
  std::size_t ffn = 128;
  std::size_t cnn_channels1 = 8;
  std::size_t cnn_channels2 = 16;
  std::size_t cnn_pool = 4;
  std::size_t cnn_hidden = 64;

  // Geometry testbed.
  std::size_t geo_concepts = 64;
  std::size_t geo_dim = 128;
  std::size_t geo_count = 200;
  double noise_angle = 0.05;
  double grid_step = 0.001;

  // Throws ConfigError naming the first offending key.
  void validate() const;

  nlohmann::ordered_json to_json() const;
  // Applies the keys present in `j`; throws ConfigError on unknown keys or
  // wrongly typed values.
  void apply_json(const nlohmann::json& j);
  void load_file(const std::filesystem::path& path);
  // Parses a command-line value for `key`.
  void set(std::string_view key, std::string_view value);

  struct KeyInfo {
    std::string name;
    std::string help;
  };
  static const std::vector<KeyInfo>& keys();

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

}  // namespace compose
