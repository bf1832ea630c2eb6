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

// Tiny pre-norm Transformer over the patches of a similarity map: linear
// patch embedding, a learned CLS token, learned positions, encoder layers
// with multi-head self-attention and a GELU feed-forward block, a final
// layer norm on CLS, and a linear head with tanh output.

#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "compose/params.hpp"
#include "compose/tensor.hpp"

namespace compose {

struct TransformerShape {
  std::size_t side = 64;
  std::size_t patch = 8;
  std::size_t d_model = 64;
  std::size_t heads = 4;
  std::size_t layers = 2;
  std::size_t ffn = 128;

  std::size_t patch_count() const { return (side / patch) * (side / patch); }
  std::size_t seq_len() const { return patch_count() + 1; }
  // Throws BadPatchSize / InvalidArgument for inconsistent shapes.
  void validate() const;
};

// Tensor order: patch.w, patch.b, cls, pos, then per layer ln1.g, ln1.b,
// qkv.w, qkv.b, out.w, out.b, ln2.g, ln2.b, ff1.w, ff1.b, ff2.w, ff2.b, then
// lnf.g, lnf.b, head.w, head.b.
void transformer_init(ParamSet& params, const TransformerShape& shape, std::mt19937_64& rng);

struct TransformerLayerTape {
  Matrix x_in;
  Matrix ln1_xhat, y1, qkv, attn_cat, x_mid, ln2_xhat, y2, ff_pre, ff_act;
  Vector ln1_rstd, ln2_rstd;
  std::vector<Matrix> probs;  // count * heads attention matrices
};

struct TransformerTape {
  std::size_t count = 0;
  Matrix patches;  // count*patch_count x patch^2
  std::vector<TransformerLayerTape> layers;
  Matrix x_final;  // count*seq_len x d_model
  Matrix cls_xhat;
  Vector cls_rstd;
  Matrix cls_norm;
  Vector out;
};

// `patch_rows` holds one patch_count x patch^2 matrix per input (see psi).
std::vector<double> transformer_forward(const ParamSet& params, const TransformerShape& shape,
                                        std::span<const Matrix> patch_rows,
                                        TransformerTape* tape);

// Accumulates parameter gradients; `d_patches` (optional) receives one
// patch_count x patch^2 gradient per input.
void transformer_backward(const ParamSet& params, const TransformerShape& shape,
                          const TransformerTape& tape, std::span<const double> upstream,
                          Gradients& grads, std::vector<Matrix>* d_patches);

}  // namespace compose
