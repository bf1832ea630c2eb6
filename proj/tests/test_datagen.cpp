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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "compose/datagen.hpp"
#include "compose/encoder.hpp"
#include "test_util.hpp"

using namespace compose;
using compose::testing::thrown_code;

namespace {

std::multiset<std::string> tokens(const std::string& s) {
  const auto w = split_words(s);
  return {w.begin(), w.end()};
}

std::set<std::string> token_set(const std::string& s) {
  const auto w = split_words(s);
  return {w.begin(), w.end()};
}

std::string pairs_jsonl(const std::vector<PairRecord>& pairs) {
  std::ostringstream out;
  write_pairs_jsonl(out, pairs);
  return out.str();
}

std::string triplets_jsonl(const TripletSet& set) {
  std::ostringstream out;
  write_triplets_jsonl(out, set);
  return out.str();
}

const TemplateWorld& train_world() {
  static const TemplateWorld w = TemplateWorld::builtin("train");
  return w;
}

Triplet triplet_of(std::size_t i, Family f, std::size_t len = 24) {
  std::string base(len, 'x');
  base.replace(0, std::to_string(i).size(), std::to_string(i));
  return {base + " a", base + " b", base + " c", f};
}

}  // namespace

TEST_SUITE("datagen") {
  TEST_CASE("builtin worlds are valid and disjoint") {
    const auto ood = TemplateWorld::builtin("ood");
    for (const auto& a : train_world().agents()) {
      CHECK(std::find(ood.agents().begin(), ood.agents().end(), a) == ood.agents().end());
    }
    for (const auto& o : train_world().objects()) {
      CHECK(std::find(ood.objects().begin(), ood.objects().end(), o) == ood.objects().end());
    }
    CHECK(thrown_code([] { TemplateWorld::builtin("mars"); }) == ErrorCode::kInvalidArgument);
  }

  TEST_CASE("world validation") {
    CHECK(thrown_code([] { TemplateWorld("w", {}, {"a", "b"}, {"x"}); }) == ErrorCode::kInvalidArgument);
    CHECK(thrown_code([] { TemplateWorld("w", {"a", "a"}, {"a", "b"}, {"x"}); }) ==
          ErrorCode::kInvalidArgument);
    CHECK_NOTHROW(TemplateWorld("w", {"a", "b"}, {"c", "d"}, {"x"}));
  }

  TEST_CASE("antonym map is an involution") {
    std::map<std::string, std::string> anti;
    for (const auto& [a, b] : shared_lexicon().antonyms) {
      anti[a] = b;
      anti[b] = a;
    }
    for (const auto& [a, b] : anti) CHECK(anti.at(b) == a);
  }

  TEST_CASE("negation rule") {
    CHECK(perturb_negation("the cat is on the mat") == "the cat is not on the mat");
    CHECK(perturb_negation("the cat is not on the mat") == "the cat is on the mat");
    CHECK(perturb_negation("the red cup and the blue box are in the park") ==
          "the red cup and the blue box are not in the park");
    CHECK(perturb_negation("the dog can help the man") == "the dog cannot help the man");
    CHECK(perturb_negation("the dog cannot help the man") == "the dog can help the man");
    CHECK(thrown_code([] { perturb_negation("the dog barked"); }) == ErrorCode::kUnsupportedPattern);
  }

  TEST_CASE("binding rule") {
    CHECK(perturb_binding("the dog bit the man") == "the man bit the dog");
    CHECK(perturb_binding("the red cube and the blue ball") == "the blue cube and the red ball");
    CHECK(perturb_binding("the red cube and the blue ball are in the park") ==
          "the blue cube and the red ball are in the park");
    CHECK(perturb_binding("the dog chased the man in the park") == "the man chased the dog in the park");
    CHECK(thrown_code([] { perturb_binding("the cat is on the mat"); }) == ErrorCode::kUnsupportedPattern);
  }

  TEST_CASE("spatial rule") {
    CHECK(perturb_spatial("the cup is left of the book") == "the cup is right of the book");
    CHECK(perturb_spatial("the cup is above the book") == "the cup is below the book");
    CHECK(thrown_code([] { perturb_spatial("the cup is near the book"); }) ==
          ErrorCode::kUnsupportedPattern);
  }

  TEST_CASE("paraphrase rule") {
    CHECK(perturb_paraphrase("the cup is left of the book") == "a cup is left of the book");
    const auto v = paraphrase_variants("the dog chased the man in the park");
    REQUIRE(v.size() == 3);
    CHECK(v[0] == "a dog chased the man in the park");
    CHECK(v[1] == "the dog pursued the man in the park");
    CHECK(v[2] == "in the park the dog chased the man");
    CHECK(thrown_code([] { perturb_paraphrase("dogs bark"); }) == ErrorCode::kUnsupportedPattern);
  }

  TEST_CASE("paraphrases keep the subject") {
    for (FactKind k : {FactKind::kTransitive, FactKind::kAbility, FactKind::kSpatial,
                       FactKind::kCoordination}) {
      const auto facts = enumerate_facts(train_world(), k, Partition::kAll);
      for (std::size_t i = 0; i < facts.size(); i += 997) {
        const std::string subject = facts[i].entities.front();
        for (const auto& p : paraphrase_variants(facts[i].text)) {
          const auto w = split_words(p);
          const auto first_noun = std::find_if(w.begin(), w.end(), [&](const std::string& x) {
            return std::find(facts[i].entities.begin(), facts[i].entities.end(), x) !=
                       facts[i].entities.end() &&
                   x != facts[i].entities.back();
          });
          REQUIRE(first_noun != w.end());
          CHECK(*first_noun == subject);
        }
      }
    }
  }

  TEST_CASE("perturbations are involutions on generated facts") {
    for (FactKind k : {FactKind::kTransitive, FactKind::kAbility, FactKind::kSpatial,
                       FactKind::kCoordination}) {
      const auto facts = enumerate_facts(train_world(), k, Partition::kAll);
      for (std::size_t i = 0; i < facts.size(); i += 101) {
        const std::string& s = facts[i].text;
        for (auto rule : {perturb_negation, perturb_binding, perturb_spatial}) {
          std::string once;
          try {
            once = rule(s);
          } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::kUnsupportedPattern);
            continue;
          }
          CHECK(once != s);
          CHECK(rule(once) == s);
        }
      }
    }
  }

  TEST_CASE("fact capacities and partitions") {
    const std::size_t all = fact_capacity(train_world(), Partition::kAll);
    CHECK(all == fact_capacity(train_world(), Partition::kTrain) +
                     fact_capacity(train_world(), Partition::kHeldout));
    std::set<std::string> train_texts;
    for (const auto& f : enumerate_facts(train_world(), FactKind::kSpatial, Partition::kTrain)) {
      train_texts.insert(f.text);
    }
    for (const auto& f : enumerate_facts(train_world(), FactKind::kSpatial, Partition::kHeldout)) {
      CHECK(train_texts.count(f.text) == 0);
    }
  }

  TEST_CASE("queries are answered by their fact") {
    std::mt19937_64 rng(3);
    for (FactKind k : {FactKind::kTransitive, FactKind::kAbility, FactKind::kSpatial,
                       FactKind::kCoordination}) {
      const auto facts = enumerate_facts(train_world(), k, Partition::kAll);
      for (std::size_t i = 0; i < facts.size(); i += 211) {
        const Query q = make_query(facts[i], rng);
        CHECK(relevant(q, facts[i]));
        CHECK_FALSE(q.text.empty());
      }
    }
  }

  TEST_CASE("one standard triplet") {
    const TripletSet t = gen_standard_triplets(train_world(), 1, 42);
    REQUIRE(t.size() == 1);
    CHECK(t[0].family == Family::kStandard);
    const auto pos = token_set(t[0].positive);
    std::set<std::string> entities;
    for (const auto& a : train_world().agents()) entities.insert(a);
    for (const auto& o : train_world().objects()) entities.insert(o);
    for (const auto& l : train_world().locations()) entities.insert(l);
    for (const auto& w : token_set(t[0].negative)) {
      if (entities.count(w)) CHECK(pos.count(w) == 0);
    }
  }

  TEST_CASE("standard triplets never share entities between positive and negative") {
    std::set<std::string> entities;
    for (const auto& a : train_world().agents()) entities.insert(a);
    for (const auto& o : train_world().objects()) entities.insert(o);
    for (const auto& l : train_world().locations()) entities.insert(l);
    const TripletSet t = gen_standard_triplets(train_world(), 2000, 7);
    std::set<std::string> positives;
    for (const auto& x : t) {
      positives.insert(x.positive.size() < x.anchor.size() ? x.positive : x.anchor);
      const auto pos = token_set(x.positive);
      const auto anc = token_set(x.anchor);
      for (const auto& w : token_set(x.negative)) {
        if (entities.count(w)) {
          CHECK(pos.count(w) == 0);
          CHECK(anc.count(w) == 0);
        }
      }
    }
  }

  TEST_CASE("standard triplets are deterministic and bounded") {
    CHECK(triplets_jsonl(gen_standard_triplets(train_world(), 300, 5)) ==
          triplets_jsonl(gen_standard_triplets(train_world(), 300, 5)));
    CHECK(triplets_jsonl(gen_standard_triplets(train_world(), 300, 5)) !=
          triplets_jsonl(gen_standard_triplets(train_world(), 300, 6)));
    const std::size_t cap = fact_capacity(train_world(), Partition::kTrain);
    CHECK(thrown_code([&] { gen_standard_triplets(train_world(), cap + 1, 1); }) ==
          ErrorCode::kLexiconExhausted);
    CHECK(thrown_code([] { gen_standard_triplets(train_world(), 0, 1); }) ==
          ErrorCode::kInvalidArgument);
  }

  TEST_CASE("retrieval benchmark") {
    const auto b = gen_retrieval_benchmark(TemplateWorld::builtin("ood"), Partition::kAll, 300, 40, 9);
    CHECK(b.corpus.size() == 300);
    CHECK(b.queries.size() == 40);
    CHECK(b.qrels.size() == 40);
    CHECK_NOTHROW(b.qrels.validate(b.queries, b.corpus));
    std::set<std::string> ids;
    for (const auto& d : b.corpus) ids.insert(d.id);
    CHECK(ids.size() == 300);
    for (const auto& [q, judged] : b.qrels.all()) {
      CHECK_FALSE(judged.empty());
      for (const auto& [d, g] : judged) CHECK(g == 1);
    }
  }

  TEST_CASE("pair families") {
    for (Family f : {Family::kNegation, Family::kBinding, Family::kSpatial, Family::kParaphrase}) {
      const auto pairs = gen_pairs(train_world(), f, 300, 11);
      REQUIRE(pairs.size() == 300);
      std::set<std::string> firsts;
      for (const auto& p : pairs) {
        CHECK(p.family == f);
        CHECK(p.is_near_miss == (f != Family::kParaphrase));
        CHECK(p.s1 != p.s2);
        if (p.is_near_miss) CHECK(token_jaccard(p.s1, p.s2) >= 0.5);
        if (f == Family::kBinding) CHECK(tokens(p.s1) == tokens(p.s2));
        firsts.insert(p.s1);
      }
      CHECK(firsts.size() == 300);
    }
    CHECK(thrown_code([] { gen_pairs(train_world(), Family::kStandard, 5, 1); }) ==
          ErrorCode::kInvalidArgument);
    CHECK(thrown_code([] { gen_pairs(train_world(), Family::kSpatial, 10000000, 1); }) ==
          ErrorCode::kLexiconExhausted);
  }

  TEST_CASE("pair generation is a pure function of its inputs") {
    CHECK(pairs_jsonl(gen_pairs(train_world(), Family::kNegation, 200, 3)) ==
          pairs_jsonl(gen_pairs(train_world(), Family::kNegation, 200, 3)));
    CHECK(pairs_jsonl(gen_pairs(train_world(), Family::kNegation, 200, 3)) !=
          pairs_jsonl(gen_pairs(train_world(), Family::kNegation, 200, 4)));
  }

  TEST_CASE("token jaccard") {
    CHECK(token_jaccard("a b c", "a b c") == 1.0);
    CHECK(token_jaccard("a b", "c d") == 0.0);
    CHECK(token_jaccard("a b c", "a b d") == doctest::Approx(0.5));
  }

  TEST_CASE("structural triplets") {
    const std::vector<PairRecord> pairs = {
        {"the dog bit the man", "the man bit the dog", Family::kBinding, true},
        {"the cup is on the mat", "a cup is on the mat", Family::kParaphrase, false}};
    const TripletSet t = make_structural_triplets(pairs);
    REQUIRE(t.size() == 1);
    CHECK(t[0].anchor == "the dog bit the man");
    CHECK(t[0].positive == t[0].anchor);
    CHECK(t[0].negative == "the man bit the dog");
    CHECK(t[0].family == Family::kBinding);
  }

  TEST_CASE("stratified split") {
    std::vector<PairRecord> pairs;
    for (Family f : {Family::kNegation, Family::kSpatial}) {
      const auto p = gen_pairs(train_world(), f, f == Family::kNegation ? 100 : 37, 5);
      pairs.insert(pairs.end(), p.begin(), p.end());
    }
    const auto [train, held] = split_pairs(pairs, 0.8, 1);
    CHECK(train.size() + held.size() == pairs.size());
    const auto count = [](const std::vector<PairRecord>& v, Family f) {
      return std::count_if(v.begin(), v.end(), [&](const PairRecord& p) { return p.family == f; });
    };
    CHECK(count(train, Family::kNegation) == 80);
    CHECK(count(held, Family::kNegation) == 20);
    CHECK(count(train, Family::kSpatial) == 30);
    CHECK(count(held, Family::kSpatial) == 7);
    const auto again = split_pairs(pairs, 0.8, 1);
    CHECK(pairs_jsonl(again.first) == pairs_jsonl(train));
    CHECK(pairs_jsonl(again.second) == pairs_jsonl(held));
  }

  TEST_CASE("mixing hits the structural fraction") {
    TripletSet standard, structural;
    for (std::size_t i = 0; i < 8000; ++i) standard.push_back(triplet_of(i, Family::kStandard));
    for (std::size_t i = 0; i < 1903; ++i) structural.push_back(triplet_of(i, Family::kNegation));
    const TripletSet mixed = mix_datasets(standard, structural, 0.192, 3);
    const double share = static_cast<double>(std::count_if(mixed.begin(), mixed.end(), [](const Triplet& t) {
                           return t.family != Family::kStandard;
                         })) /
                         static_cast<double>(mixed.size());
    CHECK(std::abs(share - 0.192) <= 0.005);
    CHECK(triplets_jsonl(mixed) == triplets_jsonl(mix_datasets(standard, structural, 0.192, 3)));
  }

  TEST_CASE("fraction 0 keeps the standard set only") {
    TripletSet standard, structural;
    for (std::size_t i = 0; i < 50; ++i) standard.push_back(triplet_of(i, Family::kStandard));
    for (std::size_t i = 0; i < 10; ++i) structural.push_back(triplet_of(i, Family::kBinding));
    const TripletSet mixed = mix_datasets(standard, structural, 0.0, 3);
    CHECK(mixed.size() == 50);
    for (const auto& t : mixed) CHECK(t.family == Family::kStandard);
  }

  TEST_CASE("short sentences are filtered") {
    TripletSet standard = {triplet_of(0, Family::kStandard), triplet_of(1, Family::kStandard)};
    standard.push_back({"fifteen chars!!", std::string(30, 'y'), std::string(30, 'z'), Family::kStandard});
    CHECK(std::string("fifteen chars!!").size() == 15);
    TripletSet structural = {triplet_of(5, Family::kSpatial)};
    const TripletSet mixed = mix_datasets(standard, structural, 0.0, 1);
    CHECK(mixed.size() == 2);
    CHECK(thrown_code([&] { mix_datasets({}, structural, 0.2, 1); }) == ErrorCode::kDataEmpty);
    CHECK(thrown_code([&] { mix_datasets(standard, {}, 0.2, 1); }) == ErrorCode::kDataEmpty);
  }

  TEST_CASE("pair jsonl round trip") {
    const auto pairs = gen_pairs(train_world(), Family::kSpatial, 20, 2);
    std::istringstream in(pairs_jsonl(pairs));
    CHECK(parse_pairs_jsonl(in) == pairs);
    std::istringstream bad(R"({"s1":"a","s2":"a","family":"negation","is_near_miss":true})" "\n");
    CHECK(thrown_code([&] { parse_pairs_jsonl(bad); }) == ErrorCode::kParseError);
  }
}
