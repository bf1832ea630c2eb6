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

#include "compose/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_map>

#include "compose/error.hpp"
#include "compose/optim.hpp"
#include "compose/simmap.hpp"

namespace compose {

MnrlResult mnrl_loss(const Matrix& scores, double temperature) {
  if (!(temperature > 0.0)) throw Error(ErrorCode::kInvalidArgument, "temperature must be > 0");
  const Eigen::Index b = scores.rows();
  if (b == 0 || scores.cols() < b || (b < 2 && scores.cols() == b)) {
    throw Error(ErrorCode::kInvalidArgument, "MNRL needs B >= 2 or at least one hard negative");
  }
  MnrlResult r;
  r.grad.resize(b, scores.cols());
  const double inv_b = 1.0 / static_cast<double>(b);
  for (Eigen::Index i = 0; i < b; ++i) {
    const auto z = scores.row(i) / temperature;
    const double mx = z.maxCoeff();
    const auto e = (z.array() - mx).exp();
    const double sum = e.sum();
    r.loss += (std::log(sum) + mx - z(i)) * inv_b;
    r.grad.row(i) = (e / sum).matrix();
    r.grad(i, i) -= 1.0;
  }
  r.grad *= inv_b / temperature;
  return r;
}

std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::kEncoderA: return "encoder_A";
    case Regime::kEncoderB: return "encoder_B";
    case Regime::kVerifierFrozen: return "verifier_frozen";
    case Regime::kEndToEnd: return "end_to_end";
  }
  return "?";
}

Regime parse_regime(std::string_view text) {
  if (text == "encoder_A" || text == "A") return Regime::kEncoderA;
  if (text == "encoder_B" || text == "B") return Regime::kEncoderB;
  if (text == "verifier_frozen" || text == "frozen") return Regime::kVerifierFrozen;
  if (text == "end_to_end" || text == "e2e") return Regime::kEndToEnd;
  throw Error(ErrorCode::kInvalidArgument, "unknown regime '" + std::string(text) + "'");
}

void TrainConfig::validate() const {
  if (!(temperature > 0.0)) throw Error(ErrorCode::kInvalidArgument, "temperature must be > 0");
  if (lr_encoder < 0.0 || lr_verifier < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "learning rates must be >= 0");
  }
  if (weight_decay < 0.0) throw Error(ErrorCode::kInvalidArgument, "weight_decay must be >= 0");
  if (warmup_ratio < 0.0 || warmup_ratio > 1.0) {
    throw Error(ErrorCode::kInvalidArgument, "warmup_ratio must be in [0, 1]");
  }
  if (batch_size < 2) throw Error(ErrorCode::kInvalidArgument, "batch_size must be >= 2");
  if (log_every == 0) throw Error(ErrorCode::kInvalidArgument, "log_every must be >= 1");
  tokenizer.validate();
}

nlohmann::ordered_json TrainConfig::to_json() const {
  nlohmann::ordered_json j;
  j["regime"] = std::string(to_string(regime));
  j["temperature"] = temperature;
  j["lr_encoder"] = lr_encoder;
  j["lr_verifier"] = lr_verifier;
  j["weight_decay"] = weight_decay;
  j["warmup_ratio"] = warmup_ratio;
  j["batch_size"] = batch_size;
  j["steps"] = steps;
  j["seed"] = seed;
  j["log_every"] = log_every;
  j["patience"] = patience;
  j["lowercase"] = tokenizer.lowercase;
  j["vocab_buckets"] = tokenizer.vocab_buckets;
  j["max_len"] = tokenizer.max_len;
  return j;
}

std::string TrainLog::to_jsonl() const {
  std::ostringstream out;
  out << nlohmann::ordered_json{{"config", header}}.dump() << '\n';
  for (const auto& e : entries) {
    nlohmann::ordered_json j;
    j["step"] = e.step;
    j["loss"] = e.loss;
    j["ndcg10"] = e.eval ? nlohmann::ordered_json(e.eval->ndcg10) : nlohmann::ordered_json();
    j["acc1"] = e.eval ? nlohmann::ordered_json(e.eval->acc1) : nlohmann::ordered_json();
    out << j.dump() << '\n';
  }
  return out.str();
}

void TrainLog::write_jsonl(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << to_jsonl();
}

namespace {

// Triplets with their texts interned and tokenized once.
struct Prepared {
  std::vector<std::vector<std::uint32_t>> ids;  // per unique text
  struct Row {
    std::size_t anchor, positive, negative;
    bool structural;
  };
  std::vector<Row> rows;
};

Prepared prepare(const TripletSet& data, const TokenizerConfig& tok) {
  if (data.empty()) throw Error(ErrorCode::kDataEmpty, "no training triplets");
  Prepared p;
  std::unordered_map<std::string, std::size_t> index;
  const auto intern = [&](const std::string& text) {
    const auto [it, fresh] = index.try_emplace(text, p.ids.size());
    if (fresh) p.ids.push_back(tokenize(text, tok));
    return it->second;
  };
  for (const auto& t : data) {
    p.rows.push_back({intern(t.anchor), intern(t.positive), intern(t.negative),
                      t.family != Family::kStandard});
  }
  return p;
}

// Seeded Fisher-Yates per epoch; a batch never spans two epochs.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::size_t batch, std::uint64_t seed)
      : n_(n), batch_(std::min(batch, n)), rng_(derive_seed(seed, "batches")) {
    if (batch_ < 2) throw Error(ErrorCode::kDataEmpty, "need at least 2 triplets per batch");
    order_.resize(n_);
    cursor_ = n_;
  }

  std::vector<std::size_t> next() {
    if (cursor_ + batch_ > n_) reshuffle();
    std::vector<std::size_t> out(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                 order_.begin() + static_cast<std::ptrdiff_t>(cursor_ + batch_));
    cursor_ += batch_;
    return out;
  }

 private:
  void reshuffle() {
    for (std::size_t i = 0; i < n_; ++i) order_[i] = i;
    for (std::size_t i = n_; i-- > 1;) std::swap(order_[i], order_[uniform_index(rng_, i + 1)]);
    cursor_ = 0;
  }

  std::size_t n_, batch_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_;
};

// One batch: anchors against positives plus structural hard negatives, with
// texts deduplicated into `texts`.
struct BatchLayout {
  std::vector<std::size_t> texts;    // global text ids, first-seen order
  std::vector<std::size_t> anchors;  // local ids, B
  std::vector<std::size_t> columns;  // local ids, B + H
};

BatchLayout layout(const Prepared& p, const std::vector<std::size_t>& picks) {
  BatchLayout l;
  std::unordered_map<std::size_t, std::size_t> local;
  const auto id = [&](std::size_t global) {
    const auto [it, fresh] = local.try_emplace(global, l.texts.size());
    if (fresh) l.texts.push_back(global);
    return it->second;
  };
  for (std::size_t k : picks) l.anchors.push_back(id(p.rows[k].anchor));
  for (std::size_t k : picks) l.columns.push_back(id(p.rows[k].positive));
  for (std::size_t k : picks) {
    if (p.rows[k].structural) l.columns.push_back(id(p.rows[k].negative));
  }
  return l;
}

AdamWConfig adam_for(const TrainConfig& cfg, double lr) {
  AdamWConfig a;
  a.lr = lr;
  a.weight_decay = cfg.weight_decay;
  a.total_steps = cfg.steps;
  a.warmup_ratio = cfg.warmup_ratio;
  return a;
}

// Shared loop bookkeeping: loss averaging, logging, evaluation and early
// stopping with a best-parameter snapshot.
class Tracker {
 public:
  Tracker(const TrainConfig& cfg, const EvalHook& hook) : cfg_(cfg), hook_(hook) {
    log.header = cfg.to_json();
  }

  // Returns false when training should stop.
  bool record(std::size_t step, double loss, const EncoderParams& enc, const Verifier* ver) {
    log.step_losses.push_back(loss);
    log.steps_run = step;
    window_ += loss;
    ++window_n_;
    if (step % cfg_.log_every != 0 && step != cfg_.steps) return true;
    LogEntry e{step, window_ / static_cast<double>(window_n_), std::nullopt};
    window_ = 0.0;
    window_n_ = 0;
    bool keep_going = true;
    if (hook_) {
      e.eval = hook_(enc, ver);
      if (!best_ || e.eval->ndcg10 > best_score_) {
        best_score_ = e.eval->ndcg10;
        best_step_ = step;
        best_ = std::make_pair(enc, ver ? std::optional<Verifier>(*ver) : std::nullopt);
      } else if (cfg_.patience > 0 && step - best_step_ >= cfg_.patience) {
        keep_going = false;
      }
    }
    log.entries.push_back(e);
    return keep_going;
  }

  // Best snapshot when early stopping is active, otherwise nothing.
  const std::optional<std::pair<EncoderParams, std::optional<Verifier>>>& best() const {
    static const std::optional<std::pair<EncoderParams, std::optional<Verifier>>> none;
    return (cfg_.patience > 0 && hook_) ? best_ : none;
  }

  TrainLog log;

 private:
  const TrainConfig& cfg_;
  const EvalHook& hook_;
  double window_ = 0.0;
  std::size_t window_n_ = 0;
  double best_score_ = 0.0;
  std::size_t best_step_ = 0;
  std::optional<std::pair<EncoderParams, std::optional<Verifier>>> best_;
};

// Verifier-scored batch shared by the frozen and joint regimes. Fills the
// map gradients when `d_maps` is non-null.
double verifier_step(const Verifier& verifier, const BatchLayout& l,
                     const std::vector<TokenMatrix>& rows, double temperature,
                     Gradients& vgrads, std::vector<Matrix>* d_maps) {
  const std::size_t b = l.anchors.size();
  const std::size_t c = l.columns.size();
  std::vector<SimMap> maps;
  maps.reserve(b * c);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      maps.push_back(build_sim_map(rows[l.anchors[i]], rows[l.columns[j]]));
    }
  }
  VerifierTape tape;
  const std::vector<double> s = verifier.forward(maps, tape);
  const Matrix scores = Eigen::Map<const Matrix>(s.data(), static_cast<Eigen::Index>(b),
                                                 static_cast<Eigen::Index>(c));
  const MnrlResult res = mnrl_loss(scores, temperature);
  const std::vector<double> upstream(res.grad.data(), res.grad.data() + res.grad.size());
  verifier.backward(tape, upstream, vgrads, d_maps);
  return res.loss;
}

JointTrainResult run_verifier_training(const TripletSet& data, const EncoderParams& encoder,
                                       const Verifier& init, const TrainConfig& cfg,
                                       const EvalHook& hook, bool joint) {
  cfg.validate();
  if (!init.learnable()) {
    throw Error(ErrorCode::kNonLearnableKind,
                std::string(to_string(init.kind())) + " has no trainable parameters");
  }
  const Prepared p = prepare(data, cfg.tokenizer);
  BatchSampler sampler(p.rows.size(), cfg.batch_size, cfg.seed);
  JointTrainResult out{encoder, init, {}};
  Gradients vgrads(out.verifier.params());
  AdamW vopt(out.verifier.params(), adam_for(cfg, cfg.lr_verifier));
  Gradients egrads(out.encoder.params());
  AdamW eopt(out.encoder.params(), adam_for(cfg, cfg.lr_encoder));
  Tracker tracker(cfg, hook);

  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    const BatchLayout l = layout(p, sampler.next());
    std::vector<TokenMatrix> rows;
    std::vector<EncodedText> caches;
    rows.reserve(l.texts.size());
    for (std::size_t g : l.texts) {
      if (joint) {
        caches.push_back(encode_with_cache(p.ids[g], out.encoder));
        rows.push_back(caches.back().rows);
      } else {
        rows.push_back(encode_tokens(p.ids[g], out.encoder));
      }
    }
    std::vector<Matrix> d_maps;
    const double loss = verifier_step(out.verifier, l, rows, cfg.temperature, vgrads,
                                      joint ? &d_maps : nullptr);
    vopt.step(out.verifier.params(), vgrads);
    out.verifier.project();
    vgrads.zero();
    if (joint) {
      std::vector<Matrix> d_rows;
      for (const auto& r : rows) d_rows.push_back(Matrix::Zero(r.values().rows(), r.values().cols()));
      const std::size_t c = l.columns.size();
      for (std::size_t i = 0; i < l.anchors.size(); ++i) {
        for (std::size_t j = 0; j < c; ++j) {
          const Matrix& dm = d_maps[i * c + j];
          const std::size_t a = l.anchors[i], col = l.columns[j];
          d_rows[a].noalias() += dm * rows[col].values();
          d_rows[col].noalias() += dm.transpose() * rows[a].values();
        }
      }
      for (std::size_t u = 0; u < caches.size(); ++u) {
        encoder_backward(caches[u], &d_rows[u], nullptr, out.encoder, egrads);
      }
      eopt.step(out.encoder.params(), egrads);
      egrads.zero();
    }
    if (!tracker.record(step, loss, out.encoder, &out.verifier)) break;
  }
  if (const auto& best = tracker.best()) {
    out.encoder = best->first;
    out.verifier = *best->second;
  }
  out.log = std::move(tracker.log);
  return out;
}

}  // namespace

EncoderTrainResult train_encoder(const TripletSet& data, const EncoderParams& init,
                                 const TrainConfig& cfg, const EvalHook& hook) {
  cfg.validate();
  const Prepared p = prepare(data, cfg.tokenizer);
  BatchSampler sampler(p.rows.size(), cfg.batch_size, cfg.seed);
  EncoderTrainResult out{init, {}};
  Gradients grads(out.encoder.params());
  AdamW opt(out.encoder.params(), adam_for(cfg, cfg.lr_encoder));
  Tracker tracker(cfg, hook);

  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    const BatchLayout l = layout(p, sampler.next());
    std::vector<EncodedText> caches;
    caches.reserve(l.texts.size());
    const auto d = static_cast<Eigen::Index>(out.encoder.dim());
    Matrix keys(static_cast<Eigen::Index>(l.texts.size()), d);
    for (std::size_t u = 0; u < l.texts.size(); ++u) {
      caches.push_back(encode_with_cache(p.ids[l.texts[u]], out.encoder));
      keys.row(static_cast<Eigen::Index>(u)) = caches.back().key.values().transpose();
    }
    const auto b = static_cast<Eigen::Index>(l.anchors.size());
    const auto c = static_cast<Eigen::Index>(l.columns.size());
    Matrix scores(b, c);
    for (Eigen::Index i = 0; i < b; ++i) {
      for (Eigen::Index j = 0; j < c; ++j) {
        scores(i, j) = keys.row(static_cast<Eigen::Index>(l.anchors[static_cast<std::size_t>(i)]))
                           .dot(keys.row(static_cast<Eigen::Index>(l.columns[static_cast<std::size_t>(j)])));
      }
    }
    const MnrlResult res = mnrl_loss(scores, cfg.temperature);
    Matrix gkeys = Matrix::Zero(keys.rows(), d);
    for (Eigen::Index i = 0; i < b; ++i) {
      const auto a = static_cast<Eigen::Index>(l.anchors[static_cast<std::size_t>(i)]);
      for (Eigen::Index j = 0; j < c; ++j) {
        const auto col = static_cast<Eigen::Index>(l.columns[static_cast<std::size_t>(j)]);
        gkeys.row(a) += res.grad(i, j) * keys.row(col);
        gkeys.row(col) += res.grad(i, j) * keys.row(a);
      }
    }
    for (std::size_t u = 0; u < caches.size(); ++u) {
      const Vector gk = gkeys.row(static_cast<Eigen::Index>(u)).transpose();
      encoder_backward(caches[u], nullptr, &gk, out.encoder, grads);
    }
    opt.step(out.encoder.params(), grads);
    grads.zero();
    if (!tracker.record(static_cast<std::size_t>(step), res.loss, out.encoder, nullptr)) break;
  }
  if (const auto& best = tracker.best()) out.encoder = best->first;
  out.log = std::move(tracker.log);
  return out;
}

VerifierTrainResult train_verifier(const TripletSet& data, const EncoderParams& encoder,
                                   const Verifier& init, const TrainConfig& cfg,
                                   const EvalHook& hook) {
  JointTrainResult r = run_verifier_training(data, encoder, init, cfg, hook, /*joint=*/false);
  return {std::move(r.verifier), std::move(r.log)};
}

JointTrainResult train_end_to_end(const TripletSet& data, const EncoderParams& encoder,
                                  const Verifier& init, const TrainConfig& cfg,
                                  const EvalHook& hook) {
  return run_verifier_training(data, encoder, init, cfg, hook, /*joint=*/true);
}

// ---- Finite differences ------------------------------------------------------

namespace {

void fold(GradCheckResult& r, double analytic, double numeric, double floor) {
  const double abs_err = std::abs(analytic - numeric);
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  r.max_abs_error = std::max(r.max_abs_error, abs_err);
  r.max_rel_error = std::max(r.max_rel_error, abs_err / denom);
  ++r.checked;
}

double central(double& x, const std::function<double()>& loss, double step) {
  const double saved = x;
  x = saved + step;
  const double up = loss();
  x = saved - step;
  const double down = loss();
  x = saved;
  return (up - down) / (2.0 * step);
}

}  // namespace

GradCheckResult grad_check(ParamSet& params, const std::function<double()>& loss,
                           const Gradients& analytic, double step, double floor) {
  GradCheckResult r;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& v = params.value(i);
    for (Eigen::Index k = 0; k < v.size(); ++k) {
      fold(r, analytic[i].data()[k], central(v.data()[k], loss, step), floor);
    }
  }
  return r;
}

GradCheckResult grad_check(Matrix& input, const std::function<double()>& loss,
                           const Matrix& analytic, double step, double floor) {
  GradCheckResult r;
  for (Eigen::Index k = 0; k < input.size(); ++k) {
    fold(r, analytic.data()[k], central(input.data()[k], loss, step), floor);
  }
  return r;
}

std::string_view to_string(GradComponent c) {
  switch (c) {
    case GradComponent::kEncoder: return "encoder";
    case GradComponent::kMnrl: return "mnrl";
    case GradComponent::kF2: return "f2";
    case GradComponent::kF3: return "f3";
    case GradComponent::kF4: return "f4";
    case GradComponent::kEndToEnd: return "end_to_end";
  }
  return "?";
}

namespace {

GradCheckResult merge(GradCheckResult a, const GradCheckResult& b) {
  a.max_rel_error = std::max(a.max_rel_error, b.max_rel_error);
  a.max_abs_error = std::max(a.max_abs_error, b.max_abs_error);
  a.checked += b.checked;
  return a;
}

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, double stddev, std::mt19937_64& rng) {
  Matrix m(rows, cols);
  fill_normal(m, stddev, rng);
  return m;
}

// Cosine map between two random sets of unit rows.
SimMap random_map(Eigen::Index m, Eigen::Index n, std::mt19937_64& rng) {
  const TokenMatrix q(normalize_rows(TokenMatrix(random_matrix(m, 6, 1.0, rng))));
  const TokenMatrix c(normalize_rows(TokenMatrix(random_matrix(n, 6, 1.0, rng))));
  return build_sim_map(q, c);
}

// Full depth and head count, narrower width, so exhaustive differencing of
// every weight stays fast.
TransformerShape small_transformer() {
  TransformerShape sh;
  sh.side = 16;
  sh.patch = 4;
  sh.d_model = 16;
  sh.ffn = 32;
  return sh;
}

GradCheckResult check_verifier(Verifier& v, SimMap map) {
  VerifierTape tape;
  const SimMap one[] = {map};
  v.forward(one, tape);
  Gradients g(v.params());
  std::vector<Matrix> d_maps;
  const double up[] = {1.0};
  v.backward(tape, up, g, &d_maps);
  const auto loss = [&] { return v.score(map); };
  return merge(grad_check(v.params(), loss, g), grad_check(map, loss, d_maps[0]));
}

}  // namespace

GradCheckResult grad_check(GradComponent component, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  switch (component) {
    case GradComponent::kEncoder: {
      const std::size_t d = 8;
      Matrix table = random_matrix(16, d, 1.0 / std::sqrt(8.0), rng);
      Matrix mix = Matrix::Identity(d, d) + random_matrix(d, d, 0.3, rng);
      EncoderParams enc = EncoderParams::from_values(std::move(table), std::move(mix));
      const std::vector<std::uint32_t> ids = {3, 7, 11};
      const Matrix w_rows = random_matrix(3, d, 1.0, rng);
      const Vector w_key = random_matrix(d, 1, 1.0, rng).col(0);
      const auto loss = [&] {
        const EncodedText e = encode_with_cache(ids, enc);
        return (e.rows.values().array() * w_rows.array()).sum() + e.key.values().dot(w_key);
      };
      Gradients g(enc.params());
      encoder_backward(encode_with_cache(ids, enc), &w_rows, &w_key, enc, g);
      return grad_check(enc.params(), loss, g);
    }
    case GradComponent::kMnrl: {
      Matrix scores = random_matrix(4, 6, 0.5, rng);
      const Matrix g = mnrl_loss(scores, 0.1).grad;
      return grad_check(scores, [&] { return mnrl_loss(scores, 0.1).loss; }, g);
    }
    case GradComponent::kF2: {
      VerifierConfig cfg;
      cfg.kind = VerifierKind::kF2;
      Verifier v = Verifier::create(cfg, seed);
      return check_verifier(v, random_map(8, 8, rng));
    }
    case GradComponent::kF3: {
      VerifierConfig cfg;
      cfg.kind = VerifierKind::kF3;
      cfg.cnn.side = 8;
      Verifier v = Verifier::create(cfg, seed);
      return check_verifier(v, random_map(8, 8, rng));
    }
    case GradComponent::kF4: {
      VerifierConfig cfg;
      cfg.kind = VerifierKind::kF4;
      cfg.transformer = small_transformer();
      Verifier v = Verifier::create(cfg, seed);
      return check_verifier(v, random_map(12, 10, rng));
    }
    case GradComponent::kEndToEnd: {
      const std::size_t d = 8;
      EncoderParams enc = EncoderParams::from_values(
          random_matrix(16, d, 1.0 / std::sqrt(8.0), rng),
          Matrix(Matrix::Identity(d, d) + random_matrix(d, d, 0.3, rng)));
      VerifierConfig cfg;
      cfg.kind = VerifierKind::kF4;
      cfg.transformer = small_transformer();
      const Verifier v = Verifier::create(cfg, seed);
      const std::vector<std::uint32_t> q = {1, 4, 9, 12};
      const std::vector<std::uint32_t> c = {2, 4, 5, 9, 15};
      const auto loss = [&] {
        return v.score(build_sim_map(encode_tokens(q, enc), encode_tokens(c, enc)));
      };
      const EncodedText eq = encode_with_cache(q, enc);
      const EncodedText ec = encode_with_cache(c, enc);
      const SimMap map[] = {build_sim_map(eq.rows, ec.rows)};
      VerifierTape tape;
      v.forward(map, tape);
      Gradients vg(v.params());
      std::vector<Matrix> d_maps;
      const double up[] = {1.0};
      v.backward(tape, up, vg, &d_maps);
      const Matrix dq = d_maps[0] * ec.rows.values();
      const Matrix dc = d_maps[0].transpose() * eq.rows.values();
      Gradients g(enc.params());
      encoder_backward(eq, &dq, nullptr, enc, g);
      encoder_backward(ec, &dc, nullptr, enc, g);
      return grad_check(enc.params(), loss, g);
    }
  }
  return {};
}

}  // namespace compose
