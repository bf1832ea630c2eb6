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

// Small dense building blocks shared by the learned verifiers. Internal to
// the library.

#pragma once

#include <cmath>

#include "compose/tensor.hpp"

namespace compose::nn {

// tanh approximation of GELU; smooth everywhere, which keeps finite
// differences honest.
inline double gelu(double x) {
  constexpr double k = 0.7978845608028654;  // sqrt(2 / pi)
  return 0.5 * x * (1.0 + std::tanh(k * (x + 0.044715 * x * x * x)));
}

inline double gelu_grad(double x) {
  constexpr double k = 0.7978845608028654;
  const double u = k * (x + 0.044715 * x * x * x);
  const double t = std::tanh(u);
  const double du = k * (1.0 + 3.0 * 0.044715 * x * x);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

inline Matrix gelu(const Matrix& x) {
  return x.unaryExpr([](double v) { return gelu(v); });
}

inline Matrix gelu_backward(const Matrix& pre, const Matrix& grad) {
  return pre.binaryExpr(grad, [](double v, double g) { return gelu_grad(v) * g; });
}

inline constexpr double kLayerNormEps = 1e-5;

struct LayerNormCache {
  Matrix xhat;
  Vector rstd;
};

// Row-wise layer norm with affine gamma/beta (both 1 x d).
inline Matrix layer_norm(const Matrix& x, const Matrix& gamma, const Matrix& beta,
                         LayerNormCache* cache) {
  const double d = static_cast<double>(x.cols());
  const Vector mean = x.rowwise().mean();
  Matrix xc = x.colwise() - mean;
  const Vector var = xc.rowwise().squaredNorm() / d;
  const Vector rstd = (var.array() + kLayerNormEps).rsqrt();
  Matrix xhat = xc.array().colwise() * rstd.array();
  Matrix y = (xhat.array().rowwise() * gamma.row(0).array()).rowwise() + beta.row(0).array();
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->rstd = rstd;
  }
  return y;
}

// Returns dX and accumulates dgamma/dbeta (1 x d each).
inline Matrix layer_norm_backward(const LayerNormCache& cache, const Matrix& gamma,
                                  const Matrix& dy, Matrix& dgamma, Matrix& dbeta) {
  dgamma.row(0) += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  dbeta.row(0) += dy.colwise().sum();
  const Matrix dxhat = dy.array().rowwise() * gamma.row(0).array();
  const Vector mean_d = dxhat.rowwise().mean();
  const Vector mean_dx =
      (dxhat.array() * cache.xhat.array()).rowwise().sum().matrix() / static_cast<double>(dy.cols());
  Matrix dx = dxhat.colwise() - mean_d;
  dx -= (cache.xhat.array().colwise() * mean_dx.array()).matrix();
  return dx.array().colwise() * cache.rstd.array();
}

// In-place row softmax with max subtraction.
template <typename Derived>
void softmax_rows(Eigen::MatrixBase<Derived>& z) {
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double mx = z.row(i).maxCoeff();
    z.row(i) = (z.row(i).array() - mx).exp().matrix();
    z.row(i) /= z.row(i).sum();
  }
}

}  // namespace compose::nn
