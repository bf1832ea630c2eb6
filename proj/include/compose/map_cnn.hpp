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

// Tiny CNN over a padded similarity map: two 3x3 same-padding convolutions
// with GELU, adaptive mean pooling to a fixed grid, and a two-layer head with
// a tanh output. Activations are channels-last, one row per pixel.

#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "compose/params.hpp"
#include "compose/tensor.hpp"

namespace compose {

struct CnnShape {
  std::size_t side = 64;     // input is side x side
  std::size_t channels1 = 8;
  std::size_t channels2 = 16;
  std::size_t pool = 4;      // adaptive pool output is pool x pool
  std::size_t hidden = 64;

  std::size_t flat() const { return pool * pool * channels2; }
};

// Tensor order: conv1.w (9 x c1), conv1.b, conv2.w (9*c1 x c2), conv2.b,
// fc1.w (flat x hidden), fc1.b, fc2.w (hidden x 1), fc2.b.
void cnn_init(ParamSet& params, const CnnShape& shape, std::mt19937_64& rng);

struct CnnTape {
  std::size_t count = 0;
  Matrix cols1, z1, a1, cols2, z2, a2;
  Matrix pooled, h_pre, h;
  Vector out;  // tanh outputs
};

// `inputs` are side x side maps. Returns one score per input.
std::vector<double> cnn_forward(const ParamSet& params, const CnnShape& shape,
                                std::span<const Matrix> inputs, CnnTape* tape);

// Accumulates parameter gradients for upstream d(score). When `d_inputs` is
// non-null it receives one side x side gradient per input.
void cnn_backward(const ParamSet& params, const CnnShape& shape, const CnnTape& tape,
                  std::span<const double> upstream, Gradients& grads,
                  std::vector<Matrix>* d_inputs);

}  // namespace compose
