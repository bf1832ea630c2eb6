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

// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion names
// as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "compose/config.hpp"
#include "compose/evalkit.hpp"
#include "compose/geometry.hpp"
#include "compose/index.hpp"
#include "compose/pipeline.hpp"
#include "compose/train.hpp"
#include "compose/verifiers.hpp"

namespace fs = std::filesystem;
using namespace compose;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Collects individual checks; the criterion passes when all of them hold.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }
  void note(const std::string& text) { notes_.push_back(text); }
  bool ok() const { return failures_.empty(); }
  std::string summary() const {
    std::string s;
    for (const auto& n : notes_) s += (s.empty() ? "" : "; ") + n;
    for (const auto& f : failures_) s += (s.empty() ? "failed: " : "; failed: ") + f;
    return s;
  }

 private:
  std::vector<std::string> failures_;
  std::vector<std::string> notes_;
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  return buf;
}

Matrix random_map(std::mt19937_64& rng, int rows, int cols) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = u(rng);
  }
  return m;
}

Matrix permute_columns(const Matrix& m, const std::vector<int>& perm) {
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index j = 0; j < m.cols(); ++j) out.col(j) = m.col(perm[static_cast<std::size_t>(j)]);
  return out;
}

// ---- Verifier identities ---------------------------------------------------

void verifier_identities(Checks& c) {
  Matrix m(2, 2);
  m << 0.2, 0.9, 0.5, 0.1;
  const auto near = [](double a, double b) { return std::abs(a - b) <= 1e-9; };
  c.expect(near(f0(Matrix::Ones(2, 3)), 1.0), "f0 all-ones");
  c.expect(near(f0(m), 0.425), "f0 2x2 = 0.425");
  c.expect(near(f1(m), 0.7), "f1 2x2 = 0.7");
  c.expect(near(f1(Matrix::Identity(4, 4)), 1.0), "f1 identity");
  c.expect(near(f2(Matrix::Ones(3, 3), {0.1, 0.1}), 1.0), "f2 all-ones");
  const Matrix a = soft_align(Matrix::Zero(1, 2), {0.0, 1.0});
  c.expect(near(a(0, 0), 0.5) && near(a(0, 1), 0.5), "soft_align uniform row");
  for (double v : {-0.6, 0.0, 0.35, 1.0}) {
    const Matrix k = Matrix::Constant(3, 4, v);
    c.expect(f0(k) == v && f1(k) == v && f2(k, {0.1, 0.1}) == v, "constant map " + fmt(v));
  }

  std::mt19937_64 rng(20260101);
  int f0_bad = 0, f1_bad = 0;
  for (int t = 0; t < 1000; ++t) {
    const int rows = 1 + static_cast<int>(rng() % 12);
    const int cols = 2 + static_cast<int>(rng() % 12);
    const Matrix x = random_map(rng, rows, cols);
    std::vector<int> perm(static_cast<std::size_t>(cols));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const Matrix p = permute_columns(x, perm);
    f0_bad += f0(p) != f0(x);
    f1_bad += f1(p) != f1(x);
  }
  c.expect(f0_bad == 0, "f0 permutation invariance (" + std::to_string(f0_bad) + " of 1000 differ)");
  c.expect(f1_bad == 0, "f1 permutation invariance (" + std::to_string(f1_bad) + " of 1000 differ)");

  Matrix w(4, 4);
  w << 0.9, 0.2, 0.1, 0.0,  //
      0.1, 0.8, 0.3, 0.2,   //
      0.0, 0.2, 0.9, 0.1,   //
      0.2, 0.1, 0.3, 0.7;
  const Matrix ws = permute_columns(w, {1, 0, 2, 3});
  const double before = f2(w, {0.5, 0.1}), after = f2(ws, {0.5, 0.1});
  c.note("f2 witness " + fmt(before) + " vs " + fmt(after));
  c.expect(before != after, "f2 lambda=0.5 permutation sensitivity");
}

// ---- Gradient suite ----------------------------------------------------------

void gradient_suite(Checks& c) {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (GradComponent comp : {GradComponent::kMnrl, GradComponent::kEncoder, GradComponent::kF3,
                             GradComponent::kF4, GradComponent::kEndToEnd}) {
    const GradCheckResult r = grad_check(comp, 42);
    worst = std::max(worst, r.max_rel_error);
    c.note(std::string(to_string(comp)) + " " + std::to_string(r.checked) + " coords rel " +
           fmt(r.max_rel_error * 1e6) + "e-6");
    c.expect(r.checked > 0 && r.max_rel_error <= 1e-4, std::string(to_string(comp)) + " rel error <= 1e-4");
  }
  const double secs = seconds_since(t0);
  c.note("time " + fmt(secs) + " s");
  c.expect(secs < 60.0, "runtime under one minute");
}

// ---- Metric oracle -------------------------------------------------------------

double oracle_ndcg(const RankedRun& run, const QRels& qrels, std::size_t k) {
  double total = 0.0;
  int counted = 0;
  for (const auto& [q, judged] : qrels.all()) {
    std::vector<int> grades;
    for (const auto& [d, g] : judged) grades.push_back(g);
    if (*std::max_element(grades.begin(), grades.end()) <= 0) continue;
    ++counted;
    std::sort(grades.rbegin(), grades.rend());
    double ideal = 0.0, dcg = 0.0;
    for (std::size_t r = 0; r < std::min(k, grades.size()); ++r) {
      ideal += (std::pow(2.0, grades[r]) - 1.0) / std::log2(r + 2.0);
    }
    if (auto it = run.find(q); it != run.end()) {
      for (std::size_t r = 0; r < std::min(k, it->second.size()); ++r) {
        const auto g = judged.find(it->second[r].id);
        dcg += (std::pow(2.0, g == judged.end() ? 0 : g->second) - 1.0) / std::log2(r + 2.0);
      }
    }
    total += dcg / ideal;
  }
  return total / counted;
}

double oracle_acc(const RankedRun& run, const QRels& qrels) {
  int hits = 0, counted = 0;
  for (const auto& [q, judged] : qrels.all()) {
    int best = 0;
    for (const auto& [d, g] : judged) best = std::max(best, g);
    if (best <= 0) continue;
    ++counted;
    auto it = run.find(q);
    if (it == run.end() || it->second.empty()) continue;
    auto g = judged.find(it->second.front().id);
    hits += g != judged.end() && g->second >= 1;
  }
  return static_cast<double>(hits) / counted;
}

void metric_oracle(Checks& c) {
  std::mt19937_64 rng(7);
  int ndcg_bad = 0, acc_bad = 0;
  for (int t = 0; t < 1000; ++t) {
    QRels qrels;
    RankedRun run;
    const int queries = 1 + static_cast<int>(rng() % 8);
    const int docs = 2 + static_cast<int>(rng() % 30);
    for (int qi = 0; qi < queries; ++qi) {
      const std::string q = "q" + std::to_string(qi);
      for (int d = 0; d < docs; ++d) {
        if (rng() % 3 == 0) qrels.add(q, "d" + std::to_string(d), static_cast<int>(rng() % 4));
      }
      qrels.add(q, "d" + std::to_string(rng() % docs), 1 + static_cast<int>(rng() % 3));
      if (rng() % 10 == 0) continue;
      std::vector<int> order(static_cast<std::size_t>(docs));
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      const int len = static_cast<int>(rng() % (docs + 1));
      for (int r = 0; r < len; ++r) run[q].push_back({"d" + std::to_string(order[r]), 1.0 - r * 0.01});
    }
    const std::size_t k = 1 + rng() % 15;
    ndcg_bad += std::abs(ndcg_at_k(run, qrels, k) - oracle_ndcg(run, qrels, k)) > 1e-9;
    acc_bad += std::abs(acc_at_1(run, qrels) - oracle_acc(run, qrels)) > 1e-9;
  }
  c.expect(ndcg_bad == 0, "ndcg_at_k oracle (" + std::to_string(ndcg_bad) + " of 1000 differ)");
  c.expect(acc_bad == 0, "acc_at_1 oracle (" + std::to_string(acc_bad) + " of 1000 differ)");

  int topk_bad = 0;
  std::normal_distribution<double> n(0.0, 1.0);
  const auto unit = [&](std::size_t d) {
    Vector v(static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = n(rng);
    return PooledKey::normalized(v);
  };
  for (int t = 0; t < 200; ++t) {
    const std::size_t count = 20 + rng() % 300, d = 2 + rng() % 20;
    std::vector<std::pair<std::string, PooledKey>> keys;
    for (std::size_t i = 0; i < count; ++i) {
      // Repeat some keys so ties are exercised.
      keys.push_back({"d" + std::to_string(i), (i > 0 && rng() % 8 == 0) ? keys[rng() % i].second : unit(d)});
    }
    const auto idx = PooledIndex::build(keys);
    const PooledKey q = unit(d);
    SearchConfig cfg;
    cfg.k = 1 + rng() % count;
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t i = 0; i < count; ++i) all.push_back({unit_cosine(q, keys[i].second), i});
    std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    const auto hits = idx.top_k(q, cfg);
    bool same = hits.size() == cfg.k;
    for (std::size_t r = 0; same && r < cfg.k; ++r) same = hits[r].id == keys[all[r].second].first;
    topk_bad += !same;
  }
  c.expect(topk_bad == 0, "top_k full-sort oracle (" + std::to_string(topk_bad) + " of 200 differ)");
}

// ---- Geometry ----------------------------------------------------------------

void geometry_witness(Checks& c) {
  const RunConfig cfg;
  const auto space = ConceptSpace::create(cfg.geo_concepts, cfg.geo_dim, cfg.seed, cfg.noise_angle);
  const GeoFamily order[] = {GeoFamily::kOrder};
  const auto inst = build_identity_instances(space, cfg.geo_count, order);
  bool exact = true;
  for (const auto& x : inst) exact = exact && cosine(x.anchor, *x.near_miss) == 1.0;
  c.expect(exact, "order-swap cosine exactly 1.0");
  const MarginReport r = threshold_sweep(inst, 0.001);
  const FamilyMargin* m = r.find(GeoFamily::kOrder);
  if (m == nullptr) {
    c.expect(false, "order family present");
    return;
  }
  c.note("gamma " + fmt(m->gamma) + ", min FA+FR " + fmt(m->min_error) + ", grid " +
         std::to_string(m->curve.size()));
  c.expect(m->gamma <= 0.0, "gamma <= 0");
  c.expect(m->min_error >= 1.0, "min(FA+FR) >= 1");
  bool never = m->curve.size() == 2001;
  for (const auto& p : m->curve) never = never && (p.false_accept > 0.0 || p.false_reject > 0.0);
  c.expect(never && m->separating_taus == 0, "no separating threshold on the 0.001 grid");
}

// ---- Retrieval-composition tension -------------------------------------------

void composition_tension(Checks& c) {
  const auto t0 = Clock::now();
  const RunConfig cfg;
  const DataBundle data = generate_data(cfg);
  std::map<Regime, std::vector<double>> ndcg, neg, spatial;
  for (std::uint64_t seed : cfg.seeds) {
    for (Regime regime : {Regime::kEncoderA, Regime::kEncoderB}) {
      const EncoderOutcome r = run_encoder(cfg, data, regime, seed);
      ndcg[regime].push_back(r.generic.ndcg10);
      neg[regime].push_back(r.nearmiss.find(Family::kNegation)->stats.mean);
      spatial[regime].push_back(r.nearmiss.find(Family::kSpatial)->stats.mean);
    }
  }
  const auto mean = [](const std::vector<double>& v) { return mean_std(v).mean; };
  const auto A = Regime::kEncoderA, B = Regime::kEncoderB;
  c.note("nDCG@10 A " + fmt(mean(ndcg[A])) + " B " + fmt(mean(ndcg[B])));
  c.note("negation cos A " + fmt(mean(neg[A])) + " B " + fmt(mean(neg[B])));
  c.note("spatial cos A " + fmt(mean(spatial[A])) + " B " + fmt(mean(spatial[B])));
  c.expect(mean(ndcg[B]) <= mean(ndcg[A]), "B generic nDCG@10 <= A");
  c.expect(mean(neg[B]) < mean(neg[A]), "B negation cosine < A");
  c.expect(mean(spatial[B]) < mean(spatial[A]), "B spatial cosine < A");
  const double secs = seconds_since(t0);
  c.note("time " + fmt(secs) + " s");
  c.expect(secs < 900.0, "runtime under 15 minutes");
}

// ---- Verifier mismatch ---------------------------------------------------------

// Seed-42 runs shared by the mismatch criterion and the toy pipeline checks.
struct VerifierRuns {
  RunConfig cfg;
  DataBundle data;
  EncoderOutcome model_a;
  RankedRun base;
  std::optional<VerifierOutcome> f1, f2, f4_e2e, f4_frozen;

  VerifierRuns() : data(generate_data(cfg)), model_a(run_encoder(cfg, data, Regime::kEncoderA, cfg.seed)) {
    SearchConfig search;
    search.k = cfg.k;
    base = stage1(data.generic, model_a.encoder, tokenizer_config(cfg), search);
  }
  const VerifierOutcome& get(std::optional<VerifierOutcome>& slot, VerifierKind kind, Regime regime) {
    if (!slot) slot = run_verifier(cfg, data, model_a.encoder, base, kind, regime, cfg.seed);
    return *slot;
  }
};

VerifierRuns& verifier_runs() {
  static VerifierRuns runs;
  return runs;
}

void verifier_mismatch(Checks& c) {
  const auto t0 = Clock::now();
  VerifierRuns& v = verifier_runs();
  const auto& f1 = v.get(v.f1, VerifierKind::kF1, Regime::kVerifierFrozen);
  const auto& f2 = v.get(v.f2, VerifierKind::kF2, Regime::kVerifierFrozen);
  const auto& f4 = v.get(v.f4_e2e, VerifierKind::kF4, Regime::kEndToEnd);
  const double f1_auc = f1.nearmiss.auc.value_or(-1.0), f4_auc = f4.nearmiss.auc.value_or(-1.0);
  c.note("stage1 nDCG@10 " + fmt(score_run(v.base, v.data.generic.qrels).ndcg10));
  c.note("rerank nDCG@10 F1 " + fmt(f1.rerank.ndcg10) + " F2 " + fmt(f2.rerank.ndcg10) + " F4e2e " +
         fmt(f4.rerank.ndcg10));
  c.note("AUC F1 " + fmt(f1_auc) + " F2 " + fmt(f2.nearmiss.auc.value_or(-1.0)) + " F4e2e " + fmt(f4_auc));
  c.expect(f1.rerank.ndcg10 >= f2.rerank.ndcg10, "F1 rerank nDCG@10 >= frozen F2");
  c.expect(f1_auc < f4_auc, "F1 AUC < end-to-end F4 AUC");
  c.expect(f4_auc >= 0.9, "end-to-end F4 AUC >= 0.9");
  const double secs = seconds_since(t0);
  c.note("time " + fmt(secs) + " s");
  c.expect(secs < 900.0, "runtime under 15 minutes");
}

// Mean verifier score over every held-out near-miss pair.
double nearmiss_mean(const NearMissReport& r) {
  double sum = 0.0;
  double n = 0.0;
  for (const auto& f : r.families) {
    if (f.family == Family::kParaphrase) continue;
    sum += f.stats.mean * static_cast<double>(f.stats.count);
    n += static_cast<double>(f.stats.count);
  }
  return sum / n;
}

void toy_pipeline(Checks& c) {
  VerifierRuns& v = verifier_runs();
  const auto& f2 = v.get(v.f2, VerifierKind::kF2, Regime::kVerifierFrozen);
  const auto& e2e = v.get(v.f4_e2e, VerifierKind::kF4, Regime::kEndToEnd);
  const auto& frozen = v.get(v.f4_frozen, VerifierKind::kF4, Regime::kVerifierFrozen);
  c.note("rerank nDCG@10 F4e2e " + fmt(e2e.rerank.ndcg10) + " F2 " + fmt(f2.rerank.ndcg10));
  c.note("near-miss mean F4e2e " + fmt(nearmiss_mean(e2e.nearmiss)) + " F4 frozen " +
         fmt(nearmiss_mean(frozen.nearmiss)));
  c.expect(e2e.rerank.ndcg10 >= f2.rerank.ndcg10, "end-to-end F4 rerank nDCG@10 >= frozen F2");
  c.expect(nearmiss_mean(e2e.nearmiss) < nearmiss_mean(frozen.nearmiss),
           "end-to-end F4 near-miss mean < frozen F4");
}

// ---- Determinism ---------------------------------------------------------------

void determinism(Checks& c) {
  const fs::path out = fs::temp_directory_path() / "compose-acceptance-reproduce";
  RunConfig cfg;
  cfg.out = out.string();
  cfg.seeds = {42, 43};
  cfg.standard_triplets = 1500;
  cfg.pairs_per_family = 200;
  cfg.bench_docs = 300;
  cfg.bench_queries = 40;
  cfg.steps = 150;
  cfg.verifier_steps = 12;
  cfg.f2_fit = true;
  cfg.align_steps = 10;
  cfg.log_every = 25;
  c.note("seeds 42,43, reduced counts and steps");
  std::vector<std::string> reports;
  for (int run = 0; run < 2; ++run) {
    fs::remove_all(out);
    reports.push_back(reproduce(cfg));
    std::ifstream in(out / "report.json", std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    c.expect(ss.str() == reports.back(), "report.json matches the returned text");
  }
  fs::remove_all(out);
  c.note("report " + std::to_string(reports[0].size()) + " bytes");
  c.expect(reports[0] == reports[1], "byte-identical report JSON");
}

struct Criterion {
  const char* name;
  std::function<void(Checks&)> run;
  bool primary = true;  // extra checks run only when named
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {"verifier-identities", verifier_identities},
      {"gradient-suite", gradient_suite},
      {"metric-oracle", metric_oracle},
      {"geometry-witness", geometry_witness},
      {"retrieval-composition-tension", composition_tension},
      {"verifier-mismatch", verifier_mismatch},
      {"determinism", determinism},
      {"toy-pipeline", toy_pipeline, false},
  };
  std::vector<std::string> wanted(argv + 1, argv + argc);
  int failed = 0;
  for (const auto& cr : criteria) {
    const bool named = std::find(wanted.begin(), wanted.end(), cr.name) != wanted.end();
    if (wanted.empty() ? !cr.primary : !named) continue;
    Checks checks;
    const auto t0 = Clock::now();
    try {
      cr.run(checks);
    } catch (const std::exception& e) {
      checks.expect(false, std::string("exception: ") + e.what());
    }
    failed += !checks.ok();
    std::cout << (checks.ok() ? "PASS " : "FAIL ") << cr.name << " (" << fmt(seconds_since(t0)) << " s) "
              << checks.summary() << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
