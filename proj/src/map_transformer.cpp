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

#include "compose/map_transformer.hpp"

#include <cmath>
#include <string>

#include "compose/error.hpp"
#include "compose/simmap.hpp"
#include "nn_ops.hpp"

namespace compose {

namespace {

enum : std::size_t { kPatchW, kPatchB, kCls, kPos, kFirstLayer };
enum : std::size_t {
  kLn1G, kLn1B, kQkvW, kQkvB, kOutW, kOutB, kLn2G, kLn2B, kFf1W, kFf1B, kFf2W, kFf2B, kPerLayer
};

std::size_t layer_param(std::size_t layer, std::size_t which) {
  return kFirstLayer + layer * kPerLayer + which;
}

std::size_t final_param(const TransformerShape& sh, std::size_t which) {
  return kFirstLayer + sh.layers * kPerLayer + which;
}

void check_shapes(const ParamSet& p, const TransformerShape& sh) {
  sh.validate();
  const auto d = static_cast<Eigen::Index>(sh.d_model);
  const auto pp = static_cast<Eigen::Index>(sh.patch * sh.patch);
  const bool ok = p.size() == kFirstLayer + sh.layers * kPerLayer + 4 &&
                  p.value(kPatchW).rows() == pp && p.value(kPatchW).cols() == d &&
                  p.value(kPos).rows() == static_cast<Eigen::Index>(sh.seq_len()) &&
                  p.value(kPos).cols() == d &&
                  (sh.layers == 0 ||
                   p.value(layer_param(0, kFf1W)).cols() == static_cast<Eigen::Index>(sh.ffn));
  if (!ok) {
    throw Error(ErrorCode::kShapeMismatch, "Transformer parameters do not match the declared shape");
  }
}

}  // namespace

void TransformerShape::validate() const {
  check_patch_size(side, patch);
  if (d_model == 0 || heads == 0 || d_model % heads != 0 || ffn == 0) {
    throw Error(ErrorCode::kInvalidArgument, "head count must divide d_model");
  }
}

void transformer_init(ParamSet& params, const TransformerShape& sh, std::mt19937_64& rng) {
  sh.validate();
  const std::size_t d = sh.d_model;
  const auto weight = [&](const std::string& name, std::size_t rows, std::size_t cols) {
    const std::size_t i = params.add(name, {rows, cols});
    fill_normal(params.value(i), 1.0 / std::sqrt(static_cast<double>(rows)), rng);
  };
  const auto ones = [&](const std::string& name, std::size_t n) {
    const std::size_t i = params.add(name, {n});
    params.value(i).setOnes();
  };
  const auto zeros = [&](const std::string& name, std::size_t n) { params.add(name, {n}); };
  weight("patch.w", sh.patch * sh.patch, d);
  zeros("patch.b", d);
  // The CLS row enters the first layer norm alone, so it starts at unit scale.
  const std::size_t cls = params.add("cls", {d});
  fill_normal(params.value(cls), 1.0, rng);
  const std::size_t pos = params.add("pos", {sh.seq_len(), d});
  fill_normal(params.value(pos), 0.1, rng);
  for (std::size_t l = 0; l < sh.layers; ++l) {
    const std::string pre = "layer" + std::to_string(l) + ".";
    ones(pre + "ln1.g", d);
    zeros(pre + "ln1.b", d);
    weight(pre + "qkv.w", d, 3 * d);
    zeros(pre + "qkv.b", 3 * d);
    weight(pre + "out.w", d, d);
    zeros(pre + "out.b", d);
    ones(pre + "ln2.g", d);
    zeros(pre + "ln2.b", d);
    weight(pre + "ff1.w", d, sh.ffn);
    zeros(pre + "ff1.b", sh.ffn);
    weight(pre + "ff2.w", sh.ffn, d);
    zeros(pre + "ff2.b", d);
  }
  ones("lnf.g", d);
  zeros("lnf.b", d);
  weight("head.w", d, 1);
  zeros("head.b", 1);
}

std::vector<double> transformer_forward(const ParamSet& p, const TransformerShape& sh,
                                        std::span<const Matrix> patch_rows,
                                        TransformerTape* tape) {
  check_shapes(p, sh);
  const auto count = static_cast<Eigen::Index>(patch_rows.size());
  const auto tp = static_cast<Eigen::Index>(sh.patch_count());
  const auto t_len = static_cast<Eigen::Index>(sh.seq_len());
  const auto d = static_cast<Eigen::Index>(sh.d_model);
  const auto heads = static_cast<Eigen::Index>(sh.heads);
  const Eigen::Index dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  TransformerTape local;
  TransformerTape& t = tape ? *tape : local;
  t.count = patch_rows.size();
  t.patches.resize(count * tp, static_cast<Eigen::Index>(sh.patch * sh.patch));
  for (Eigen::Index n = 0; n < count; ++n) {
    const Matrix& pr = patch_rows[static_cast<std::size_t>(n)];
    if (pr.rows() != tp || pr.cols() != t.patches.cols()) {
      throw Error(ErrorCode::kShapeMismatch, "patch grid does not match the declared shape");
    }
    t.patches.middleRows(n * tp, tp) = pr;
  }
  const Matrix emb = (t.patches * p.value(kPatchW)).rowwise() + p.value(kPatchB).row(0);
  const Matrix& pos = p.value(kPos);
  Matrix x(count * t_len, d);
  for (Eigen::Index n = 0; n < count; ++n) {
    x.row(n * t_len) = p.value(kCls).row(0) + pos.row(0);
    x.middleRows(n * t_len + 1, tp) = emb.middleRows(n * tp, tp) + pos.bottomRows(tp);
  }

  t.layers.assign(sh.layers, {});
  for (std::size_t l = 0; l < sh.layers; ++l) {
    auto& lt = t.layers[l];
    const auto P = [&](std::size_t which) -> const Matrix& { return p.value(layer_param(l, which)); };
    lt.x_in = x;
    nn::LayerNormCache c1;
    lt.y1 = nn::layer_norm(x, P(kLn1G), P(kLn1B), &c1);
    lt.ln1_xhat = std::move(c1.xhat);
    lt.ln1_rstd = std::move(c1.rstd);
    lt.qkv = (lt.y1 * P(kQkvW)).rowwise() + P(kQkvB).row(0);
    lt.attn_cat.resize(count * t_len, d);
    lt.probs.resize(static_cast<std::size_t>(count * heads));
    for (Eigen::Index n = 0; n < count; ++n) {
      for (Eigen::Index h = 0; h < heads; ++h) {
        const auto q = lt.qkv.block(n * t_len, h * dh, t_len, dh);
        const auto k = lt.qkv.block(n * t_len, d + h * dh, t_len, dh);
        const auto v = lt.qkv.block(n * t_len, 2 * d + h * dh, t_len, dh);
        Matrix s = (q * k.transpose()) * scale;
        nn::softmax_rows(s);
        lt.attn_cat.block(n * t_len, h * dh, t_len, dh) = s * v;
        lt.probs[static_cast<std::size_t>(n * heads + h)] = std::move(s);
      }
    }
    lt.x_mid = x + ((lt.attn_cat * P(kOutW)).rowwise() + P(kOutB).row(0));
    nn::LayerNormCache c2;
    lt.y2 = nn::layer_norm(lt.x_mid, P(kLn2G), P(kLn2B), &c2);
    lt.ln2_xhat = std::move(c2.xhat);
    lt.ln2_rstd = std::move(c2.rstd);
    lt.ff_pre = (lt.y2 * P(kFf1W)).rowwise() + P(kFf1B).row(0);
    lt.ff_act = nn::gelu(lt.ff_pre);
    x = lt.x_mid + ((lt.ff_act * P(kFf2W)).rowwise() + P(kFf2B).row(0));
  }
  t.x_final = x;
  Matrix cls_rows(count, d);
  for (Eigen::Index n = 0; n < count; ++n) cls_rows.row(n) = x.row(n * t_len);
  nn::LayerNormCache cf;
  t.cls_norm = nn::layer_norm(cls_rows, p.value(final_param(sh, 0)), p.value(final_param(sh, 1)), &cf);
  t.cls_xhat = std::move(cf.xhat);
  t.cls_rstd = std::move(cf.rstd);
  const Vector z = (t.cls_norm * p.value(final_param(sh, 2))).col(0).array() +
                   p.value(final_param(sh, 3))(0, 0);
  t.out = z.array().tanh();
  return {t.out.data(), t.out.data() + t.out.size()};
}

void transformer_backward(const ParamSet& p, const TransformerShape& sh, const TransformerTape& t,
                          std::span<const double> upstream, Gradients& g,
                          std::vector<Matrix>* d_patches) {
  const auto count = static_cast<Eigen::Index>(t.count);
  if (static_cast<Eigen::Index>(upstream.size()) != count) {
    throw Error(ErrorCode::kShapeMismatch, "upstream size differs from batch size");
  }
  const auto tp = static_cast<Eigen::Index>(sh.patch_count());
  const auto t_len = static_cast<Eigen::Index>(sh.seq_len());
  const auto d = static_cast<Eigen::Index>(sh.d_model);
  const auto heads = static_cast<Eigen::Index>(sh.heads);
  const Eigen::Index dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Vector dz(count);
  for (Eigen::Index n = 0; n < count; ++n) {
    dz(n) = upstream[static_cast<std::size_t>(n)] * (1.0 - t.out(n) * t.out(n));
  }
  g[final_param(sh, 2)].col(0) += t.cls_norm.transpose() * dz;
  g[final_param(sh, 3)](0, 0) += dz.sum();
  const Matrix dcls_norm = dz * p.value(final_param(sh, 2)).col(0).transpose();
  const nn::LayerNormCache cf{t.cls_xhat, t.cls_rstd};
  const Matrix dcls = nn::layer_norm_backward(cf, p.value(final_param(sh, 0)), dcls_norm,
                                              g[final_param(sh, 0)], g[final_param(sh, 1)]);
  Matrix dx = Matrix::Zero(count * t_len, d);
  for (Eigen::Index n = 0; n < count; ++n) dx.row(n * t_len) = dcls.row(n);

  for (std::size_t li = sh.layers; li-- > 0;) {
    const auto& lt = t.layers[li];
    const auto P = [&](std::size_t which) -> const Matrix& { return p.value(layer_param(li, which)); };
    const auto G = [&](std::size_t which) -> Matrix& { return g[layer_param(li, which)]; };
    // x_out = x_mid + ff2(gelu(ff1(ln2(x_mid))))
    G(kFf2W).noalias() += lt.ff_act.transpose() * dx;
    G(kFf2B).row(0) += dx.colwise().sum();
    const Matrix dff_pre = nn::gelu_backward(lt.ff_pre, dx * P(kFf2W).transpose());
    G(kFf1W).noalias() += lt.y2.transpose() * dff_pre;
    G(kFf1B).row(0) += dff_pre.colwise().sum();
    const Matrix dy2 = dff_pre * P(kFf1W).transpose();
    const nn::LayerNormCache c2{lt.ln2_xhat, lt.ln2_rstd};
    Matrix dx_mid = dx + nn::layer_norm_backward(c2, P(kLn2G), dy2, G(kLn2G), G(kLn2B));
    // x_mid = x_in + out(attn(ln1(x_in)))
    G(kOutW).noalias() += lt.attn_cat.transpose() * dx_mid;
    G(kOutB).row(0) += dx_mid.colwise().sum();
    const Matrix dcat = dx_mid * P(kOutW).transpose();
    Matrix dqkv(count * t_len, 3 * d);
    for (Eigen::Index n = 0; n < count; ++n) {
      for (Eigen::Index h = 0; h < heads; ++h) {
        const Matrix& prob = lt.probs[static_cast<std::size_t>(n * heads + h)];
        const auto q = lt.qkv.block(n * t_len, h * dh, t_len, dh);
        const auto k = lt.qkv.block(n * t_len, d + h * dh, t_len, dh);
        const auto v = lt.qkv.block(n * t_len, 2 * d + h * dh, t_len, dh);
        const auto dout = dcat.block(n * t_len, h * dh, t_len, dh);
        const Matrix dprob = dout * v.transpose();
        dqkv.block(n * t_len, 2 * d + h * dh, t_len, dh) = prob.transpose() * dout;
        // Softmax backward per row: ds = p * (dp - sum(dp * p)).
        const Vector rowdot = (dprob.array() * prob.array()).rowwise().sum();
        const Matrix ds = (prob.array() * (dprob.colwise() - rowdot).array()).matrix() * scale;
        dqkv.block(n * t_len, h * dh, t_len, dh) = ds * k;
        dqkv.block(n * t_len, d + h * dh, t_len, dh) = ds.transpose() * q;
      }
    }
    G(kQkvW).noalias() += lt.y1.transpose() * dqkv;
    G(kQkvB).row(0) += dqkv.colwise().sum();
    const Matrix dy1 = dqkv * P(kQkvW).transpose();
    const nn::LayerNormCache c1{lt.ln1_xhat, lt.ln1_rstd};
    dx = dx_mid + nn::layer_norm_backward(c1, P(kLn1G), dy1, G(kLn1G), G(kLn1B));
  }

  Matrix demb(count * tp, d);
  for (Eigen::Index n = 0; n < count; ++n) {
    g[kCls].row(0) += dx.row(n * t_len);
    g[kPos].row(0) += dx.row(n * t_len);
    g[kPos].bottomRows(tp) += dx.middleRows(n * t_len + 1, tp);
    demb.middleRows(n * tp, tp) = dx.middleRows(n * t_len + 1, tp);
  }
  g[kPatchW].noalias() += t.patches.transpose() * demb;
  g[kPatchB].row(0) += demb.colwise().sum();
  if (d_patches) {
    const Matrix dp = demb * p.value(kPatchW).transpose();
    d_patches->clear();
    for (Eigen::Index n = 0; n < count; ++n) d_patches->push_back(dp.middleRows(n * tp, tp));
  }
}

}  // namespace compose
