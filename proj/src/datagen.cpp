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

#include "compose/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "compose/encoder.hpp"
#include "compose/error.hpp"
#include "compose/params.hpp"

namespace compose {

const SharedLexicon& shared_lexicon() {
  static const SharedLexicon lex{
      {
          {"chased", "chase", "pursued", "pursue"},
          {"saw", "see", "noticed", "notice"},
          {"helped", "help", "assisted", "assist"},
          {"pushed", "push", "shoved", "shove"},
          {"called", "call", "phoned", "phone"},
          {"watched", "watch", "observed", "observe"},
          {"followed", "follow", "trailed", "trail"},
          {"met", "meet", "encountered", "encounter"},
          {"bit", "bite", "nipped", "nip"},
          {"hugged", "hug", "embraced", "embrace"},
      },
      {"red", "blue", "green", "yellow", "black", "white", "brown", "orange"},
      {{"left", "right"}, {"above", "below"}, {"inside", "outside"}, {"over", "under"}},
  };
  return lex;
}

TemplateWorld::TemplateWorld(std::string name, std::vector<std::string> agents,
                             std::vector<std::string> objects, std::vector<std::string> locations)
    : name_(std::move(name)),
      agents_(std::move(agents)),
      objects_(std::move(objects)),
      locations_(std::move(locations)) {
  validate();
}

TemplateWorld TemplateWorld::builtin(std::string_view name) {
  if (name == "train") {
    return TemplateWorld(
        "train",
        {"dog", "cat", "man", "woman", "boy", "girl", "teacher", "doctor", "farmer", "pilot",
         "horse", "student"},
        {"cup", "book", "lamp", "box", "ball", "cube", "chair", "vase", "bottle", "basket",
         "clock", "candle"},
        {"park", "kitchen", "garden", "office", "market", "school", "library", "station"});
  }
  if (name == "ood") {
    return TemplateWorld(
        "ood",
        {"wolf", "fox", "nurse", "sailor", "baker", "lawyer", "tiger", "rabbit", "soldier",
         "artist", "monkey", "singer"},
        {"plate", "pencil", "mirror", "bucket", "brick", "shoe", "kettle", "drum", "jar",
         "helmet", "rope", "pillow"},
        {"harbor", "forest", "museum", "bakery", "airport", "village", "stadium", "beach"});
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown template world '" + std::string(name) + "'");
}

void TemplateWorld::validate() const {
  const auto check = [](const std::vector<std::string>& v, const char* what) {
    if (v.empty()) throw Error(ErrorCode::kInvalidArgument, std::string(what) + " lexicon is empty");
    if (std::set<std::string>(v.begin(), v.end()).size() != v.size()) {
      throw Error(ErrorCode::kInvalidArgument, std::string(what) + " lexicon has duplicates");
    }
  };
  check(agents_, "agent");
  check(objects_, "object");
  check(locations_, "location");
  if (agents_.size() < 2 || objects_.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "agent and object lexicons need two entries");
  }
  const auto& lex = shared_lexicon();
  std::map<std::string, std::string> anti;
  for (const auto& [a, b] : lex.antonyms) {
    if (!anti.emplace(a, b).second || !anti.emplace(b, a).second) {
      throw Error(ErrorCode::kInvalidArgument, "antonym map is not an involution");
    }
  }
}

namespace {

using Words = std::vector<std::string>;

Words words_of(std::string_view s) { return split_words(s, /*lowercase=*/true); }

std::string join(const Words& w) {
  std::string out;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (i) out += ' ';
    out += w[i];
  }
  return out;
}

std::string relation_phrase(const std::string& rel) {
  return (rel == "left" || rel == "right") ? rel + " of" : rel;
}

std::vector<std::string> relation_list() {
  std::vector<std::string> rels;
  for (const auto& [a, b] : shared_lexicon().antonyms) {
    rels.push_back(a);
    rels.push_back(b);
  }
  return rels;
}

// Held-out iff the entity combination hashes into one fifth of the space.
bool heldout(const std::vector<std::string>& entities) {
  std::string key;
  for (const auto& e : entities) key += e + '|';
  return fnv1a64(key) % 5 == 0;
}

bool in_partition(const std::vector<std::string>& entities, Partition part) {
  if (part == Partition::kAll) return true;
  return heldout(entities) == (part == Partition::kHeldout);
}

Fact render(const TemplateWorld& w, FactKind kind, std::vector<std::size_t> slots) {
  const auto& lex = shared_lexicon();
  const auto rels = relation_list();
  Fact f;
  f.kind = kind;
  switch (kind) {
    case FactKind::kTransitive: {
      const auto& a = w.agents()[slots[0]];
      const auto& p = w.agents()[slots[2]];
      const auto& l = w.locations()[slots[3]];
      f.text = "the " + a + " " + lex.verbs[slots[1]].past + " the " + p + " in the " + l;
      f.entities = {a, p, l};
      break;
    }
    case FactKind::kAbility: {
      const auto& a = w.agents()[slots[0]];
      const auto& p = w.agents()[slots[2]];
      const auto& l = w.locations()[slots[3]];
      f.text = "the " + a + " can " + lex.verbs[slots[1]].base + " the " + p + " from the " + l;
      f.entities = {a, p, l};
      break;
    }
    case FactKind::kSpatial: {
      const auto& o = w.objects()[slots[1]];
      const auto& o2 = w.objects()[slots[3]];
      f.text = "the " + lex.colors[slots[0]] + " " + o + " is " + relation_phrase(rels[slots[2]]) +
               " the " + o2;
      f.entities = {o, o2};
      break;
    }
    case FactKind::kCoordination: {
      const auto& o1 = w.objects()[slots[1]];
      const auto& o2 = w.objects()[slots[3]];
      const auto& l = w.locations()[slots[4]];
      f.text = "the " + lex.colors[slots[0]] + " " + o1 + " and the " + lex.colors[slots[2]] + " " +
               o2 + " are in the " + l;
      f.entities = {o1, o2, l};
      break;
    }
  }
  f.slots = std::move(slots);
  return f;
}

constexpr FactKind kKinds[] = {FactKind::kTransitive, FactKind::kSpatial, FactKind::kCoordination,
                               FactKind::kAbility};

}  // namespace

std::vector<Fact> enumerate_facts(const TemplateWorld& w, FactKind kind, Partition part) {
  const auto& lex = shared_lexicon();
  const std::size_t na = w.agents().size(), no = w.objects().size(), nl = w.locations().size();
  const std::size_t nv = lex.verbs.size(), nc = lex.colors.size(), nr = relation_list().size();
  std::vector<Fact> out;
  const auto keep = [&](std::vector<std::size_t> slots) {
    Fact f = render(w, kind, std::move(slots));
    if (in_partition(f.entities, part)) out.push_back(std::move(f));
  };
  switch (kind) {
    case FactKind::kTransitive:
    case FactKind::kAbility:
      for (std::size_t a = 0; a < na; ++a)
        for (std::size_t v = 0; v < nv; ++v)
          for (std::size_t p = 0; p < na; ++p)
            for (std::size_t l = 0; l < nl; ++l)
              if (p != a) keep({a, v, p, l});
      break;
    case FactKind::kSpatial:
      for (std::size_t c = 0; c < nc; ++c)
        for (std::size_t o = 0; o < no; ++o)
          for (std::size_t r = 0; r < nr; ++r)
            for (std::size_t o2 = 0; o2 < no; ++o2)
              if (o2 != o) keep({c, o, r, o2});
      break;
    case FactKind::kCoordination:
      for (std::size_t c1 = 0; c1 < nc; ++c1)
        for (std::size_t o1 = 0; o1 < no; ++o1)
          for (std::size_t c2 = 0; c2 < nc; ++c2)
            for (std::size_t o2 = 0; o2 < no; ++o2)
              for (std::size_t l = 0; l < nl; ++l)
                if (o2 != o1 && c2 != c1) keep({c1, o1, c2, o2, l});
      break;
  }
  return out;
}

std::size_t fact_capacity(const TemplateWorld& world, Partition part) {
  std::size_t n = 0;
  for (FactKind k : kKinds) n += enumerate_facts(world, k, part).size();
  return n;
}

Query make_query(const Fact& f, std::mt19937_64& rng) {
  const auto& lex = shared_lexicon();
  const auto rels = relation_list();
  Query q;
  q.kind = f.kind;
  if (uniform01(rng) < kRestatementShare) {
    const auto variants = paraphrase_variants(f.text);
    q.text = variants[uniform_index(rng, variants.size())];
    q.form = kRestatementForm;
    q.signature = f.slots;
    return q;
  }
  const Words w = words_of(f.text);
  const bool synonym = uniform01(rng) < 0.3;
  const auto verb_base = [&](std::size_t v) {
    return synonym ? lex.verbs[v].synonym_base : lex.verbs[v].base;
  };
  const auto verb_past = [&](std::size_t v) {
    return synonym ? lex.verbs[v].synonym_past : lex.verbs[v].past;
  };
  const auto& s = f.slots;
  switch (f.kind) {
    case FactKind::kTransitive:
      q.form = static_cast<int>(uniform_index(rng, 2));
      if (q.form == 0) {
        // who did the <agent> <verb> in the <location>
        q.text = "who did the " + w[1] + " " + verb_base(s[1]) + " in the " + w.back();
        q.signature = {s[0], s[1], s[3]};
      } else {
        q.text = "who " + verb_past(s[1]) + " the " + w[4] + " in the " + w.back();
        q.signature = {s[1], s[2], s[3]};
      }
      break;
    case FactKind::kAbility:
      q.text = "who can the " + w[1] + " " + verb_base(s[1]) + " from the " + w.back();
      q.signature = {s[0], s[1], s[3]};
      break;
    case FactKind::kSpatial:
      q.form = static_cast<int>(uniform_index(rng, 2));
      if (q.form == 0) {
        q.text = "what is " + relation_phrase(rels[s[2]]) + " the " + w.back();
        q.signature = {s[2], s[3]};
      } else {
        q.text = "where is the " + w[1] + " " + w[2];
        q.signature = {s[0], s[1]};
      }
      break;
    case FactKind::kCoordination:
      q.text = "where are the " + w[1] + " " + w[2] + " and the " + w[5] + " " + w[6];
      q.signature = {s[0], s[1], s[2], s[3]};
      break;
  }
  if (uniform01(rng) < 0.3) {
    Words qw = words_of(q.text);
    const auto it = std::find(qw.begin(), qw.end(), "the");
    if (it != qw.end()) *it = "a";
    q.text = join(qw);
  }
  // Trailing "in/from the <location>" moved to the front.
  if (uniform01(rng) < 0.3) {
    Words qw = words_of(q.text);
    const std::size_t k = qw.size() - 3;
    if (qw.size() >= 6 && (qw[k] == "in" || qw[k] == "from") && qw[k + 1] == "the") {
      Words v(qw.begin() + static_cast<std::ptrdiff_t>(k), qw.end());
      v.insert(v.end(), qw.begin(), qw.begin() + static_cast<std::ptrdiff_t>(k));
      q.text = join(v);
    }
  }
  return q;
}

bool relevant(const Query& q, const Fact& f) {
  if (q.kind != f.kind) return false;
  if (q.form == kRestatementForm) return q.signature == f.slots;
  const auto& s = f.slots;
  switch (f.kind) {
    case FactKind::kTransitive:
      return q.form == 0 ? q.signature == std::vector<std::size_t>{s[0], s[1], s[3]}
                         : q.signature == std::vector<std::size_t>{s[1], s[2], s[3]};
    case FactKind::kAbility:
      return q.signature == std::vector<std::size_t>{s[0], s[1], s[3]};
    case FactKind::kSpatial:
      return q.form == 0 ? q.signature == std::vector<std::size_t>{s[2], s[3]}
                         : q.signature == std::vector<std::size_t>{s[0], s[1]};
    case FactKind::kCoordination:
      return q.signature == std::vector<std::size_t>{s[0], s[1], s[2], s[3]};
  }
  return false;
}

namespace {

// Draws facts without replacement, cycling through the kinds so each kind
// contributes evenly; an exhausted kind is skipped.
class FactDrawer {
 public:
  FactDrawer(const TemplateWorld& w, Partition part, std::uint64_t seed,
             std::vector<FactKind> kinds = {std::begin(kKinds), std::end(kKinds)})
      : rng_(seed) {
    for (FactKind k : kinds) {
      pools_.push_back(enumerate_facts(w, k, part));
      fisher_yates(pools_.back(), rng_);
    }
    cursor_.assign(pools_.size(), 0);
  }

  std::size_t remaining() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < pools_.size(); ++i) n += pools_[i].size() - cursor_[i];
    return n;
  }

  const Fact& next() {
    for (std::size_t tries = 0; tries < pools_.size(); ++tries) {
      const std::size_t k = turn_++ % pools_.size();
      if (cursor_[k] < pools_[k].size()) return pools_[k][cursor_[k]++];
    }
    throw Error(ErrorCode::kLexiconExhausted, "template world has no facts left");
  }

  std::mt19937_64& rng() { return rng_; }
  const std::vector<std::vector<Fact>>& pools() const { return pools_; }

 private:
  std::mt19937_64 rng_;
  std::vector<std::vector<Fact>> pools_;
  std::vector<std::size_t> cursor_;
  std::size_t turn_ = 0;
};

bool share_entity(const Fact& a, const Fact& b) {
  for (const auto& e : a.entities) {
    if (std::find(b.entities.begin(), b.entities.end(), e) != b.entities.end()) return true;
  }
  return false;
}

}  // namespace

TripletSet gen_standard_triplets(const TemplateWorld& world, std::size_t count,
                                 std::uint64_t seed) {
  if (count == 0) throw Error(ErrorCode::kInvalidArgument, "count must be >= 1");
  FactDrawer drawer(world, Partition::kTrain, derive_seed(seed, "standard"));
  if (count > drawer.remaining()) {
    throw Error(ErrorCode::kLexiconExhausted,
                "requested " + std::to_string(count) + " triplets but the train partition has " +
                    std::to_string(drawer.remaining()) + " facts");
  }
  std::vector<const Fact*> all;
  for (const auto& pool : drawer.pools()) {
    for (const auto& f : pool) all.push_back(&f);
  }
  std::mt19937_64 neg_rng(derive_seed(seed, "standard-negatives"));
  TripletSet out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const Fact& pos = drawer.next();
    const Query q = make_query(pos, drawer.rng());
    const Fact* neg = nullptr;
    do {
      neg = all[uniform_index(neg_rng, all.size())];
    } while (share_entity(pos, *neg));
    // Restatements are symmetric, so either side may carry the paraphrase.
    if (q.form == kRestatementForm && uniform01(drawer.rng()) < 0.5) {
      out.push_back({pos.text, q.text, neg->text, Family::kStandard});
    } else {
      out.push_back({q.text, pos.text, neg->text, Family::kStandard});
    }
  }
  return out;
}

RetrievalBenchmark gen_retrieval_benchmark(const TemplateWorld& world, Partition part,
                                           std::size_t docs, std::size_t queries,
                                           std::uint64_t seed) {
  if (docs == 0 || queries == 0 || queries > docs) {
    throw Error(ErrorCode::kInvalidArgument, "need 1 <= queries <= docs");
  }
  FactDrawer drawer(world, part, derive_seed(seed, "benchmark-" + world.name()));
  if (docs > drawer.remaining()) {
    throw Error(ErrorCode::kLexiconExhausted, "not enough facts for the requested corpus");
  }
  std::vector<Fact> facts;
  RetrievalBenchmark b;
  for (std::size_t i = 0; i < docs; ++i) {
    facts.push_back(drawer.next());
    char id[32];
    std::snprintf(id, sizeof id, "d%05zu", i);
    b.corpus.push_back({id, facts.back().text});
  }
  std::mt19937_64 rng(derive_seed(seed, "benchmark-queries-" + world.name()));
  std::vector<std::size_t> order(docs);
  for (std::size_t i = 0; i < docs; ++i) order[i] = i;
  fisher_yates(order, rng);
  for (std::size_t k = 0; k < queries; ++k) {
    const Query q = make_query(facts[order[k]], rng);
    char id[32];
    std::snprintf(id, sizeof id, "q%04zu", k);
    b.queries.push_back({id, q.text});
    for (std::size_t d = 0; d < docs; ++d) {
      if (relevant(q, facts[d])) b.qrels.add(id, b.corpus[d].id, 1);
    }
  }
  return b;
}

// ---- Perturbations -------------------------------------------------------------

namespace {

[[noreturn]] void unsupported(std::string_view rule, std::string_view s) {
  throw Error(ErrorCode::kUnsupportedPattern,
              std::string(rule) + " rule does not apply to '" + std::string(s) + "'");
}

bool is_verb_past(const std::string& w) {
  for (const auto& v : shared_lexicon().verbs) {
    if (w == v.past || w == v.synonym_past) return true;
  }
  return false;
}

bool is_color(const std::string& w) {
  const auto& c = shared_lexicon().colors;
  return std::find(c.begin(), c.end(), w) != c.end();
}

std::optional<std::string> antonym(const std::string& w) {
  for (const auto& [a, b] : shared_lexicon().antonyms) {
    if (w == a) return b;
    if (w == b) return a;
  }
  return std::nullopt;
}

// "the <color> <noun> and the <color> <noun>": index of the first color.
std::optional<std::size_t> coordination_at(const Words& w) {
  for (std::size_t i = 0; i + 6 < w.size(); ++i) {
    if (w[i] == "the" && is_color(w[i + 1]) && w[i + 3] == "and" && w[i + 4] == "the" &&
        is_color(w[i + 5]) && w[i + 1] != w[i + 5]) {
      return i + 1;
    }
  }
  return std::nullopt;
}

}  // namespace

std::string perturb_negation(std::string_view s) {
  Words w = words_of(s);
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] == "cannot") {
      w[i] = "can";
      return join(w);
    }
    if (w[i] == "can") {
      w[i] = "cannot";
      return join(w);
    }
    if (w[i] == "is" || w[i] == "are" || w[i] == "was") {
      if (i + 1 < w.size() && w[i + 1] == "not") {
        w.erase(w.begin() + static_cast<std::ptrdiff_t>(i + 1));
      } else {
        w.insert(w.begin() + static_cast<std::ptrdiff_t>(i + 1), "not");
      }
      return join(w);
    }
  }
  unsupported("negation", s);
}

std::string perturb_binding(std::string_view s) {
  Words w = words_of(s);
  if (const auto c = coordination_at(w)) {
    std::swap(w[*c], w[*c + 4]);
    return join(w);
  }
  for (std::size_t v = 1; v + 1 < w.size(); ++v) {
    if (!is_verb_past(w[v])) continue;
    // Subject: from the last determiner before the verb; object: the
    // determiner after the verb up to the next preposition or the end.
    std::size_t subj = v;
    while (subj > 0 && w[subj - 1] != "the" && w[subj - 1] != "a") --subj;
    if (subj == 0) break;
    --subj;
    std::size_t obj_end = v + 1;
    if (w[obj_end] != "the" && w[obj_end] != "a") break;
    ++obj_end;
    while (obj_end < w.size() && w[obj_end] != "in" && w[obj_end] != "from" &&
           w[obj_end] != "at" && w[obj_end] != "on") {
      ++obj_end;
    }
    const Words subject(w.begin() + static_cast<std::ptrdiff_t>(subj),
                        w.begin() + static_cast<std::ptrdiff_t>(v));
    const Words object(w.begin() + static_cast<std::ptrdiff_t>(v + 1),
                       w.begin() + static_cast<std::ptrdiff_t>(obj_end));
    if (subject.size() < 2 || object.size() < 2) break;
    Words out(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(subj));
    out.insert(out.end(), object.begin(), object.end());
    out.push_back(w[v]);
    out.insert(out.end(), subject.begin(), subject.end());
    out.insert(out.end(), w.begin() + static_cast<std::ptrdiff_t>(obj_end), w.end());
    return join(out);
  }
  unsupported("binding", s);
}

std::string perturb_spatial(std::string_view s) {
  Words w = words_of(s);
  for (auto& word : w) {
    if (const auto a = antonym(word)) {
      word = *a;
      return join(w);
    }
  }
  unsupported("spatial", s);
}

std::vector<std::string> paraphrase_variants(std::string_view s) {
  const Words w = words_of(s);
  std::vector<std::string> out;
  // Determiner.
  if (const auto it = std::find(w.begin(), w.end(), "the"); it != w.end()) {
    Words v = w;
    v[static_cast<std::size_t>(it - w.begin())] = "a";
    out.push_back(join(v));
  }
  // Verb synonym (either direction).
  for (std::size_t i = 0; i < w.size(); ++i) {
    for (const auto& verb : shared_lexicon().verbs) {
      std::optional<std::string> swap;
      if (w[i] == verb.past) swap = verb.synonym_past;
      else if (w[i] == verb.synonym_past) swap = verb.past;
      else if (w[i] == verb.base) swap = verb.synonym_base;
      else if (w[i] == verb.synonym_base) swap = verb.base;
      if (swap) {
        Words v = w;
        v[i] = *swap;
        out.push_back(join(v));
        i = w.size();
        break;
      }
    }
  }
  // Trailing "in/from the <noun>" moved to the front.
  if (w.size() >= 6) {
    const std::size_t k = w.size() - 3;
    if ((w[k] == "in" || w[k] == "from") && w[k + 1] == "the") {
      Words v(w.begin() + static_cast<std::ptrdiff_t>(k), w.end());
      v.insert(v.end(), w.begin(), w.begin() + static_cast<std::ptrdiff_t>(k));
      out.push_back(join(v));
    }
  }
  return out;
}

std::string perturb_paraphrase(std::string_view s) {
  auto v = paraphrase_variants(s);
  if (v.empty()) unsupported("paraphrase", s);
  return v.front();
}

double token_jaccard(std::string_view a, std::string_view b) {
  const auto wa = words_of(a), wb = words_of(b);
  const std::set<std::string> sa(wa.begin(), wa.end()), sb(wb.begin(), wb.end());
  std::size_t inter = 0;
  for (const auto& x : sa) inter += sb.count(x);
  const std::size_t uni = sa.size() + sb.size() - inter;
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<PairRecord> gen_pairs(const TemplateWorld& world, Family family, std::size_t count,
                                  std::uint64_t seed) {
  std::vector<FactKind> kinds;
  switch (family) {
    case Family::kNegation:
      kinds = {FactKind::kSpatial, FactKind::kCoordination, FactKind::kAbility};
      break;
    case Family::kBinding:
      kinds = {FactKind::kTransitive, FactKind::kCoordination};
      break;
    case Family::kSpatial:
      kinds = {FactKind::kSpatial};
      break;
    case Family::kParaphrase:
      kinds = {std::begin(kKinds), std::end(kKinds)};
      break;
    case Family::kStandard:
      throw Error(ErrorCode::kInvalidArgument, "standard is not a pair family");
  }
  FactDrawer drawer(world, Partition::kAll, derive_seed(seed, "pairs-" + std::string(to_string(family))),
                    kinds);
  if (count > drawer.remaining()) {
    throw Error(ErrorCode::kLexiconExhausted, "not enough facts for " + std::to_string(count) +
                                                  " " + std::string(to_string(family)) + " pairs");
  }
  std::vector<PairRecord> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const Fact& f = drawer.next();
    PairRecord p;
    p.family = family;
    p.is_near_miss = family != Family::kParaphrase;
    switch (family) {
      case Family::kNegation:
        // Half of the pairs start from the negated sentence.
        p.s1 = f.text;
        if (uniform01(drawer.rng()) < 0.5) p.s1 = perturb_negation(p.s1);
        p.s2 = perturb_negation(p.s1);
        break;
      case Family::kBinding:
        p.s1 = f.text;
        p.s2 = perturb_binding(p.s1);
        break;
      case Family::kSpatial:
        p.s1 = f.text;
        p.s2 = perturb_spatial(p.s1);
        break;
      default: {
        p.s1 = f.text;
        const auto v = paraphrase_variants(p.s1);
        p.s2 = v[uniform_index(drawer.rng(), v.size())];
        break;
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

TripletSet make_structural_triplets(const std::vector<PairRecord>& pairs) {
  TripletSet out;
  for (const auto& p : pairs) {
    if (!p.is_near_miss || p.family == Family::kParaphrase) continue;
    out.push_back({p.s1, p.s1, p.s2, p.family});
  }
  return out;
}

std::pair<std::vector<PairRecord>, std::vector<PairRecord>> split_pairs(
    const std::vector<PairRecord>& pairs, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw Error(ErrorCode::kInvalidArgument, "ratio must be in (0, 1)");
  std::map<Family, std::vector<std::size_t>> by_family;
  for (std::size_t i = 0; i < pairs.size(); ++i) by_family[pairs[i].family].push_back(i);
  std::vector<PairRecord> train, held;
  for (auto& [family, idx] : by_family) {
    std::mt19937_64 rng(derive_seed(seed, "split-" + std::string(to_string(family))));
    fisher_yates(idx, rng);
    const auto cut = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(idx.size())));
    for (std::size_t k = 0; k < idx.size(); ++k) (k < cut ? train : held).push_back(pairs[idx[k]]);
  }
  return {std::move(train), std::move(held)};
}

TripletSet mix_datasets(const TripletSet& standard, const TripletSet& structural, double fraction,
                        std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "structural fraction must be in [0, 1)");
  }
  const auto long_enough = [](const Triplet& t) {
    return t.anchor.size() >= kMinSentenceChars && t.positive.size() >= kMinSentenceChars &&
           t.negative.size() >= kMinSentenceChars;
  };
  TripletSet std_kept, struct_kept;
  std::copy_if(standard.begin(), standard.end(), std::back_inserter(std_kept), long_enough);
  std::copy_if(structural.begin(), structural.end(), std::back_inserter(struct_kept), long_enough);
  if (std_kept.empty()) throw Error(ErrorCode::kDataEmpty, "no standard triplets after filtering");
  std::mt19937_64 rng(derive_seed(seed, "mix"));
  TripletSet out = std_kept;
  if (fraction > 0.0) {
    if (struct_kept.empty()) throw Error(ErrorCode::kDataEmpty, "no structural triplets after filtering");
    const auto target = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(std_kept.size()) / (1.0 - fraction)));
    // Whole shuffled passes over the structural set, then a partial one.
    std::vector<std::size_t> idx(struct_kept.size());
    for (std::size_t added = 0; added < target;) {
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      fisher_yates(idx, rng);
      for (std::size_t i = 0; i < idx.size() && added < target; ++i, ++added) {
        out.push_back(struct_kept[idx[i]]);
      }
    }
  }
  fisher_yates(out, rng);
  return out;
}

std::vector<PairRecord> parse_pairs_jsonl(std::istream& in) {
  std::vector<PairRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      PairRecord p;
      p.s1 = j.at("s1").get<std::string>();
      p.s2 = j.at("s2").get<std::string>();
      const auto fam = parse_family(j.at("family").get<std::string>());
      if (!fam || *fam == Family::kStandard) throw Error(ErrorCode::kParseError, "bad family", n);
      p.family = *fam;
      p.is_near_miss = j.at("is_near_miss").get<bool>();
      if (p.s1.empty() || p.s2.empty()) throw Error(ErrorCode::kParseError, "empty sentence", n);
      if (p.s1 == p.s2) throw Error(ErrorCode::kParseError, "identical sentences", n);
      out.push_back(std::move(p));
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kParseError, e.what(), n);
    }
  }
  return out;
}

std::vector<PairRecord> load_pairs_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  return parse_pairs_jsonl(in);
}

void write_pairs_jsonl(std::ostream& out, const std::vector<PairRecord>& pairs) {
  for (const auto& p : pairs) {
    nlohmann::ordered_json j;
    j["s1"] = p.s1;
    j["s2"] = p.s2;
    j["family"] = std::string(to_string(p.family));
    j["is_near_miss"] = p.is_near_miss;
    out << j.dump() << '\n';
  }
}

void write_pairs_jsonl(const std::filesystem::path& path, const std::vector<PairRecord>& pairs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  write_pairs_jsonl(out, pairs);
}

}  // namespace compose
