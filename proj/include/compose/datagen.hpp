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

// Template-grammar generator for synthetic retrieval data and structural
// near-miss pairs.
//
// A world fixes the entity lexicons (agents, objects, locations). Verbs,
// colors, spatial relations and function words are shared by all worlds, so
// a model trained in one world meets only unseen entities in another.
// Sentences are lowercase, single-space separated and unpunctuated.
//
// Fact templates:
//   transitive    the <agent> <verb> the <agent> in the <location>
//   spatial       the <color> <object> is <relation> the <object>
//   coordination  the <color> <object> and the <color> <object> are in the <location>
//   ability       the <agent> can <verb> the <agent> from the <location>

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "compose/embstore.hpp"

namespace compose {

struct VerbForms {
  std::string past, base, synonym_past, synonym_base;
};

// Word lists shared by every world.
struct SharedLexicon {
  std::vector<VerbForms> verbs;
  std::vector<std::string> colors;
  // Spatial relations as antonym pairs; the map is an involution.
  std::vector<std::pair<std::string, std::string>> antonyms;
};

const SharedLexicon& shared_lexicon();

class TemplateWorld {
 public:
  TemplateWorld(std::string name, std::vector<std::string> agents,
                std::vector<std::string> objects, std::vector<std::string> locations);

  // Built-in worlds: "train" and "ood" (disjoint entity lexicons).
  static TemplateWorld builtin(std::string_view name);

  const std::string& name() const { return name_; }
  const std::vector<std::string>& agents() const { return agents_; }
  const std::vector<std::string>& objects() const { return objects_; }
  const std::vector<std::string>& locations() const { return locations_; }

  // Throws InvalidArgument for empty or duplicated lexicons and for an
  // antonym map that is not an involution.
  void validate() const;

 private:
  std::string name_;
  std::vector<std::string> agents_, objects_, locations_;
};

enum class FactKind { kTransitive, kSpatial, kCoordination, kAbility };

// Entity-combination split of a world's facts into train / held-out.
enum class Partition { kTrain, kHeldout, kAll };

struct Fact {
  FactKind kind = FactKind::kTransitive;
  // Slot indices into the lexicons; meaning depends on kind:
  //   transitive/ability: agent, verb, patient, location
  //   spatial:            color, object, relation, object2
  //   coordination:       color1, object1, color2, object2, location
  std::vector<std::size_t> slots;
  std::string text;
  // Entity nouns mentioned (agents, objects, locations).
  std::vector<std::string> entities;
};

std::vector<Fact> enumerate_facts(const TemplateWorld& world, FactKind kind, Partition part);
std::size_t fact_capacity(const TemplateWorld& world, Partition part);

// Question about `fact` plus the slot signature that defines relevance.
struct Query {
  std::string text;
  FactKind kind;
  int form = 0;
  std::vector<std::size_t> signature;
};

// Restatement queries paraphrase the fact itself and are relevant only to
// that fact, as in duplicate-question retrieval.
inline constexpr int kRestatementForm = -1;
inline constexpr double kRestatementShare = 0.25;

// Picks a restatement (with probability kRestatementShare) or a question
// form with surface variation (verb synonym, determiner, fronted location)
// from `rng`.
Query make_query(const Fact& fact, std::mt19937_64& rng);
// Whether `fact` answers `query`.
bool relevant(const Query& query, const Fact& fact);

// (query, relevant fact, random fact sharing no entity with the positive)
// drawn from the train partition. Throws LexiconExhausted when count exceeds
// the number of distinct train facts.
TripletSet gen_standard_triplets(const TemplateWorld& world, std::size_t count,
                                 std::uint64_t seed);

struct RetrievalBenchmark {
  std::vector<CorpusRecord> corpus;
  std::vector<CorpusRecord> queries;
  QRels qrels;
};

RetrievalBenchmark gen_retrieval_benchmark(const TemplateWorld& world, Partition part,
                                           std::size_t docs, std::size_t queries,
                                           std::uint64_t seed);

// ---- Perturbations (all throw UnsupportedPattern when no rule applies) ----

// First copula/auxiliary: "is" <-> "is not", "are" <-> "are not",
// "was" <-> "was not", "can" <-> "cannot".
std::string perturb_negation(std::string_view s);
// Attribute swap across a two-head coordination, else subject/object swap
// around a transitive verb. Token multiset is preserved.
std::string perturb_binding(std::string_view s);
// First spatial relation replaced by its antonym.
std::string perturb_spatial(std::string_view s);
// First applicable of: determiner "the" -> "a", verb synonym, fronting of a
// trailing prepositional phrase.
std::string perturb_paraphrase(std::string_view s);
// Every applicable paraphrase, in the priority order above.
std::vector<std::string> paraphrase_variants(std::string_view s);

// Jaccard similarity of the two texts' token sets.
double token_jaccard(std::string_view a, std::string_view b);

struct PairRecord {
  std::string s1, s2;
  Family family = Family::kParaphrase;
  bool is_near_miss = false;

  friend bool operator==(const PairRecord&, const PairRecord&) = default;
};

// `count` pairs of `family` (negation, binding, spatial or paraphrase) from
// distinct facts of the world. Throws LexiconExhausted when there are not
// enough eligible facts.
std::vector<PairRecord> gen_pairs(const TemplateWorld& world, Family family, std::size_t count,
                                  std::uint64_t seed);

// Near-miss pairs become (s1, s1, s2); paraphrase pairs are dropped.
TripletSet make_structural_triplets(const std::vector<PairRecord>& pairs);

// Stratified per family: round(ratio * n_f) pairs of each family go to train.
std::pair<std::vector<PairRecord>, std::vector<PairRecord>> split_pairs(
    const std::vector<PairRecord>& pairs, double ratio, std::uint64_t seed);

inline constexpr std::size_t kMinSentenceChars = 20;

// Drops triplets with any field shorter than kMinSentenceChars, then sub- or
// oversamples the structural set so it makes up `fraction` of the result,
// and shuffles. Throws DataEmpty when a required input is empty.
TripletSet mix_datasets(const TripletSet& standard, const TripletSet& structural,
                        double fraction, std::uint64_t seed);

std::vector<PairRecord> parse_pairs_jsonl(std::istream& in);
std::vector<PairRecord> load_pairs_jsonl(const std::filesystem::path& path);
void write_pairs_jsonl(std::ostream& out, const std::vector<PairRecord>& pairs);
void write_pairs_jsonl(const std::filesystem::path& path, const std::vector<PairRecord>& pairs);

}  // namespace compose
