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

#include "compose/verifiers.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <random>
#include <utility>
#include <vector>

#include "compose/binio.hpp"
#include "compose/error.hpp"
#include "compose/parallel.hpp"

namespace compose {

namespace {

constexpr double kMinTau = 1e-3;

void check_map(const SimMap& m) {
  if (m.rows() == 0 || m.cols() == 0) throw Error(ErrorCode::kShapeMismatch, "empty similarity map");
}

// Rounds every parameter to single precision so freshly created verifiers
// survive a VRF1 round trip unchanged.
void round_to_float(ParamSet& params) {
  for (auto& t : params) t.value = t.value.cast<float>().cast<double>();
}

std::size_t chunk_count(std::size_t n) { return (n + kVerifierChunk - 1) / kVerifierChunk; }

std::span<const SimMap> chunk_of(std::span<const SimMap> maps, std::size_t c) {
  const std::size_t lo = c * kVerifierChunk;
  return maps.subspan(lo, std::min(kVerifierChunk, maps.size() - lo));
}

Matrix cnn_input(const SimMap& m, const CnnShape& sh) { return pad_or_truncate(phi(m), sh.side); }

Matrix transformer_input(const SimMap& m, const TransformerShape& sh) {
  return psi(phi(m), sh.side, sh.patch).patches;
}

// Mean of `values` summed in sorted order relative to the minimum: invariant
// to the order of `values` and exact when they are all equal.
double shifted_mean(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const double ref = values.front();
  double s = 0.0;
  for (double x : values) s += x - ref;
  return ref + s / static_cast<double>(values.size());
}

}  // namespace

std::string_view to_string(VerifierKind kind) {
  switch (kind) {
    case VerifierKind::kF0: return "f0";
    case VerifierKind::kF1: return "f1";
    case VerifierKind::kF2: return "f2";
    case VerifierKind::kF3: return "f3";
    case VerifierKind::kF4: return "f4";
  }
  return "?";
}

VerifierKind parse_verifier_kind(std::string_view text) {
  std::string lower(text);
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (auto k : {VerifierKind::kF0, VerifierKind::kF1, VerifierKind::kF2, VerifierKind::kF3,
                 VerifierKind::kF4}) {
    if (lower == to_string(k)) return k;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown verifier kind '" + std::string(text) + "'");
}

void AlignmentConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorCode::kInvalidArgument, "lambda must be >= 0");
  }
  if (!(tau_align > 0.0) || !std::isfinite(tau_align)) {
    throw Error(ErrorCode::kInvalidArgument, "tau_align must be > 0");
  }
}

double f0(const SimMap& m) {
  check_map(m);
  return shifted_mean(std::vector<double>(m.data(), m.data() + m.size()));
}

double f1(const SimMap& m) {
  check_map(m);
  const Vector best = m.rowwise().maxCoeff();
  return shifted_mean(std::vector<double>(best.data(), best.data() + best.size()));
}

Matrix soft_align(const SimMap& m, const AlignmentConfig& cfg) {
  check_map(m);
  cfg.validate();
  Matrix a(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      a(i, j) = (m(i, j) - cfg.lambda * static_cast<double>(std::abs(i - j))) / cfg.tau_align;
    }
  }
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double mx = a.row(i).maxCoeff();
    a.row(i) = (a.row(i).array() - mx).exp().matrix();
    a.row(i) /= a.row(i).sum();
  }
  return a;
}

double f2(const SimMap& m, const AlignmentConfig& cfg) {
  const Matrix a = soft_align(m, cfg);
  // Attention rows sum to 1, so shifting by the row max leaves the value
  // unchanged and makes constant rows exact.
  std::vector<double> rows(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double ref = m.row(i).maxCoeff();
    rows[static_cast<std::size_t>(i)] = ref + (a.row(i).array() * (m.row(i).array() - ref)).sum();
  }
  return shifted_mean(std::move(rows));
}

F2Gradient f2_backward(const SimMap& m, const AlignmentConfig& cfg, double upstream) {
  const Matrix a = soft_align(m, cfg);
  const double inv_m = upstream / static_cast<double>(m.rows());
  const Vector r = (a.array() * m.array()).rowwise().sum();
  F2Gradient g;
  g.d_map.resize(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double dist = static_cast<double>(std::abs(i - j));
      const double z = (m(i, j) - cfg.lambda * dist) / cfg.tau_align;
      const double dz = inv_m * a(i, j) * (m(i, j) - r(i));
      g.d_map(i, j) = inv_m * a(i, j) + dz / cfg.tau_align;
      g.d_lambda -= dz * dist / cfg.tau_align;
      g.d_tau -= dz * z / cfg.tau_align;
    }
  }
  return g;
}

Verifier Verifier::create(const VerifierConfig& cfg, std::uint64_t seed) {
  Verifier v;
  v.cfg_ = cfg;
  std::mt19937_64 rng(seed);
  switch (cfg.kind) {
    case VerifierKind::kF0:
    case VerifierKind::kF1:
      break;
    case VerifierKind::kF2: {
      cfg.align.validate();
      v.params_.value(v.params_.add("lambda", {1}))(0, 0) = cfg.align.lambda;
      v.params_.value(v.params_.add("tau", {1}))(0, 0) = cfg.align.tau_align;
      break;
    }
    case VerifierKind::kF3:
      cnn_init(v.params_, cfg.cnn, rng);
      break;
    case VerifierKind::kF4:
      transformer_init(v.params_, cfg.transformer, rng);
      break;
  }
  round_to_float(v.params_);
  return v;
}

AlignmentConfig Verifier::alignment() const {
  if (cfg_.kind != VerifierKind::kF2) return cfg_.align;
  return {params_.value(0)(0, 0), params_.value(1)(0, 0)};
}

void Verifier::project() {
  if (cfg_.kind != VerifierKind::kF2) return;
  params_.value(0)(0, 0) = std::max(params_.value(0)(0, 0), 0.0);
  params_.value(1)(0, 0) = std::max(params_.value(1)(0, 0), kMinTau);
}

double Verifier::score(const SimMap& m) const {
  const SimMap one[] = {m};
  return score_batch(one).front();
}

std::vector<double> Verifier::score_batch(std::span<const SimMap> maps) const {
  std::vector<double> out(maps.size());
  const std::size_t chunks = chunk_count(maps.size());
  parallel_for(chunks, [&](std::size_t c) {
    const auto part = chunk_of(maps, c);
    const std::size_t lo = c * kVerifierChunk;
    switch (cfg_.kind) {
      case VerifierKind::kF0:
        for (std::size_t i = 0; i < part.size(); ++i) out[lo + i] = f0(part[i]);
        break;
      case VerifierKind::kF1:
        for (std::size_t i = 0; i < part.size(); ++i) out[lo + i] = f1(part[i]);
        break;
      case VerifierKind::kF2: {
        const AlignmentConfig a = alignment();
        for (std::size_t i = 0; i < part.size(); ++i) out[lo + i] = f2(part[i], a);
        break;
      }
      case VerifierKind::kF3: {
        std::vector<Matrix> in;
        for (const auto& m : part) in.push_back(cnn_input(m, cfg_.cnn));
        const auto s = cnn_forward(params_, cfg_.cnn, in, nullptr);
        std::copy(s.begin(), s.end(), out.begin() + static_cast<std::ptrdiff_t>(lo));
        break;
      }
      case VerifierKind::kF4: {
        std::vector<Matrix> in;
        for (const auto& m : part) in.push_back(transformer_input(m, cfg_.transformer));
        const auto s = transformer_forward(params_, cfg_.transformer, in, nullptr);
        std::copy(s.begin(), s.end(), out.begin() + static_cast<std::ptrdiff_t>(lo));
        break;
      }
    }
  });
  return out;
}

std::vector<double> Verifier::forward(std::span<const SimMap> maps, VerifierTape& tape) const {
  tape.maps.assign(maps.begin(), maps.end());
  tape.cnn.clear();
  tape.transformer.clear();
  const std::size_t chunks = chunk_count(maps.size());
  if (cfg_.kind == VerifierKind::kF3) tape.cnn.resize(chunks);
  if (cfg_.kind == VerifierKind::kF4) tape.transformer.resize(chunks);
  if (cfg_.kind != VerifierKind::kF3 && cfg_.kind != VerifierKind::kF4) return score_batch(maps);

  std::vector<double> out(maps.size());
  parallel_for(chunks, [&](std::size_t c) {
    const auto part = chunk_of(maps, c);
    std::vector<Matrix> in;
    std::vector<double> s;
    if (cfg_.kind == VerifierKind::kF3) {
      for (const auto& m : part) in.push_back(cnn_input(m, cfg_.cnn));
      s = cnn_forward(params_, cfg_.cnn, in, &tape.cnn[c]);
    } else {
      for (const auto& m : part) in.push_back(transformer_input(m, cfg_.transformer));
      s = transformer_forward(params_, cfg_.transformer, in, &tape.transformer[c]);
    }
    std::copy(s.begin(), s.end(), out.begin() + static_cast<std::ptrdiff_t>(c * kVerifierChunk));
  });
  return out;
}

void Verifier::backward(const VerifierTape& tape, std::span<const double> upstream,
                        Gradients& grads, std::vector<Matrix>* d_maps) const {
  const std::size_t n = tape.maps.size();
  if (upstream.size() != n) throw Error(ErrorCode::kShapeMismatch, "upstream size differs from batch");
  if (d_maps) d_maps->assign(n, Matrix());
  const std::size_t chunks = chunk_count(n);
  std::vector<Gradients> partial(chunks);
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t lo = c * kVerifierChunk;
    const std::size_t len = std::min(kVerifierChunk, n - lo);
    const auto up = upstream.subspan(lo, len);
    Gradients& g = partial[c];
    g = Gradients(params_);
    std::vector<Matrix> d_in;
    switch (cfg_.kind) {
      case VerifierKind::kF0:
        if (d_maps) {
          for (std::size_t i = 0; i < len; ++i) {
            const SimMap& m = tape.maps[lo + i];
            (*d_maps)[lo + i] =
                Matrix::Constant(m.rows(), m.cols(), up[i] / static_cast<double>(m.size()));
          }
        }
        return;
      case VerifierKind::kF1:
        if (d_maps) {
          for (std::size_t i = 0; i < len; ++i) {
            const SimMap& m = tape.maps[lo + i];
            Matrix d = Matrix::Zero(m.rows(), m.cols());
            for (Eigen::Index r = 0; r < m.rows(); ++r) {
              Eigen::Index arg = 0;
              m.row(r).maxCoeff(&arg);
              d(r, arg) = up[i] / static_cast<double>(m.rows());
            }
            (*d_maps)[lo + i] = std::move(d);
          }
        }
        return;
      case VerifierKind::kF2: {
        const AlignmentConfig a = alignment();
        for (std::size_t i = 0; i < len; ++i) {
          F2Gradient fg = f2_backward(tape.maps[lo + i], a, up[i]);
          g[0](0, 0) += fg.d_lambda;
          g[1](0, 0) += fg.d_tau;
          if (d_maps) (*d_maps)[lo + i] = std::move(fg.d_map);
        }
        return;
      }
      case VerifierKind::kF3:
        cnn_backward(params_, cfg_.cnn, tape.cnn[c], up, g, d_maps ? &d_in : nullptr);
        if (d_maps) {
          for (std::size_t i = 0; i < len; ++i) {
            const SimMap& m = tape.maps[lo + i];
            (*d_maps)[lo + i] = phi_backward(
                m, pad_or_truncate_backward(d_in[i], static_cast<std::size_t>(m.rows()),
                                            static_cast<std::size_t>(m.cols())));
          }
        }
        return;
      case VerifierKind::kF4:
        transformer_backward(params_, cfg_.transformer, tape.transformer[c], up, g,
                             d_maps ? &d_in : nullptr);
        if (d_maps) {
          const auto& sh = cfg_.transformer;
          for (std::size_t i = 0; i < len; ++i) {
            const SimMap& m = tape.maps[lo + i];
            const Matrix full = unpatch(d_in[i], sh.side, sh.patch);
            (*d_maps)[lo + i] = phi_backward(
                m, pad_or_truncate_backward(full, static_cast<std::size_t>(m.rows()),
                                            static_cast<std::size_t>(m.cols())));
          }
        }
        return;
    }
  });
  for (const auto& g : partial) grads.accumulate(g);
}

void Verifier::save(const std::filesystem::path& path) const {
  auto out = open_for_write(path);
  BinaryWriter w(out);
  w.magic("VRF1");
  w.u8(static_cast<std::uint8_t>(cfg_.kind));
  const auto& c = cfg_.cnn;
  const auto& t = cfg_.transformer;
  for (std::size_t v : {c.side, c.channels1, c.channels2, c.pool, c.hidden, t.side, t.patch,
                        t.d_model, t.heads, t.layers, t.ffn}) {
    w.u32(static_cast<std::uint32_t>(v));
  }
  w.u32(static_cast<std::uint32_t>(params_.size()));
  for (const auto& p : params_) {
    w.u16(static_cast<std::uint16_t>(p.name.size()));
    w.bytes(p.name);
    w.u8(static_cast<std::uint8_t>(p.shape.size()));
    for (std::size_t d : p.shape) w.u32(static_cast<std::uint32_t>(d));
  }
  for (const auto& p : params_) {
    const double* v = p.value.data();
    for (Eigen::Index k = 0; k < p.value.size(); ++k) w.f32(static_cast<float>(v[k]));
  }
}

Verifier Verifier::load(const std::filesystem::path& path) {
  auto in = open_for_read(path);
  BinaryReader r(in);
  r.expect_magic("VRF1");
  const std::uint8_t tag = r.u8();
  if (tag > 4) throw Error(ErrorCode::kShapeMismatch, "unknown verifier kind tag");
  VerifierConfig cfg;
  cfg.kind = static_cast<VerifierKind>(tag);
  auto& c = cfg.cnn;
  auto& t = cfg.transformer;
  for (std::size_t* v : {&c.side, &c.channels1, &c.channels2, &c.pool, &c.hidden, &t.side,
                         &t.patch, &t.d_model, &t.heads, &t.layers, &t.ffn}) {
    *v = r.u32();
  }
  // Build the expected layout, then demand the file's table matches it.
  Verifier v = create(cfg, 0);
  const std::uint32_t count = r.u32();
  if (count != v.params_.size()) throw Error(ErrorCode::kShapeMismatch, "tensor count mismatch");
  for (const auto& p : v.params_) {
    const std::uint16_t len = r.u16();
    const std::string name = r.bytes(len);
    const std::uint8_t rank = r.u8();
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = r.u32();
    if (name != p.name || shape != p.shape) {
      throw Error(ErrorCode::kShapeMismatch, "tensor '" + name + "' does not match layout");
    }
  }
  for (auto& p : v.params_) {
    double* d = p.value.data();
    for (Eigen::Index k = 0; k < p.value.size(); ++k) d[k] = static_cast<double>(r.f32());
  }
  if (!r.at_end()) throw Error(ErrorCode::kShapeMismatch, "trailing bytes in VRF1 file");
  if (cfg.kind == VerifierKind::kF2) {
    v.cfg_.align = v.alignment();
  }
  return v;
}

Verifier Verifier::load(VerifierKind expected, const std::filesystem::path& path) {
  Verifier v = load(path);
  if (v.kind() != expected) {
    throw Error(ErrorCode::kShapeMismatch, "file holds " + std::string(to_string(v.kind())) +
                                               ", expected " + std::string(to_string(expected)));
  }
  return v;
}

bool operator==(const Verifier& a, const Verifier& b) {
  return a.cfg_.kind == b.cfg_.kind && a.params_ == b.params_;
}

}  // namespace compose
