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

#include "compose/map_cnn.hpp"

#include <cmath>

#include "compose/error.hpp"
#include "nn_ops.hpp"

namespace compose {

namespace {

enum : std::size_t { kConv1W, kConv1B, kConv2W, kConv2B, kFc1W, kFc1B, kFc2W, kFc2B };

// 3x3 same-padding patches of channels-last activations (count*S*S x C) into
// rows of 9*C, column = (ky*3 + kx)*C + c.
Matrix im2col(const Matrix& a, std::size_t count, std::size_t side) {
  const auto s = static_cast<Eigen::Index>(side);
  const Eigen::Index c = a.cols();
  Matrix cols = Matrix::Zero(a.rows(), 9 * c);
  for (Eigen::Index n = 0; n < static_cast<Eigen::Index>(count); ++n) {
    const Eigen::Index base = n * s * s;
    for (Eigen::Index y = 0; y < s; ++y) {
      for (Eigen::Index x = 0; x < s; ++x) {
        auto row = cols.row(base + y * s + x);
        for (Eigen::Index ky = 0; ky < 3; ++ky) {
          const Eigen::Index yy = y + ky - 1;
          if (yy < 0 || yy >= s) continue;
          for (Eigen::Index kx = 0; kx < 3; ++kx) {
            const Eigen::Index xx = x + kx - 1;
            if (xx < 0 || xx >= s) continue;
            row.segment((ky * 3 + kx) * c, c) = a.row(base + yy * s + xx);
          }
        }
      }
    }
  }
  return cols;
}

Matrix col2im(const Matrix& cols, std::size_t count, std::size_t side, Eigen::Index c) {
  const auto s = static_cast<Eigen::Index>(side);
  Matrix a = Matrix::Zero(cols.rows(), c);
  for (Eigen::Index n = 0; n < static_cast<Eigen::Index>(count); ++n) {
    const Eigen::Index base = n * s * s;
    for (Eigen::Index y = 0; y < s; ++y) {
      for (Eigen::Index x = 0; x < s; ++x) {
        const auto row = cols.row(base + y * s + x);
        for (Eigen::Index ky = 0; ky < 3; ++ky) {
          const Eigen::Index yy = y + ky - 1;
          if (yy < 0 || yy >= s) continue;
          for (Eigen::Index kx = 0; kx < 3; ++kx) {
            const Eigen::Index xx = x + kx - 1;
            if (xx < 0 || xx >= s) continue;
            a.row(base + yy * s + xx) += row.segment((ky * 3 + kx) * c, c);
          }
        }
      }
    }
  }
  return a;
}

// Adaptive pooling bin [start, end) for output cell i of `pool` over `side`.
std::pair<Eigen::Index, Eigen::Index> bin(std::size_t i, std::size_t pool, std::size_t side) {
  const auto start = static_cast<Eigen::Index>((i * side) / pool);
  const auto end = static_cast<Eigen::Index>(((i + 1) * side + pool - 1) / pool);
  return {start, end};
}

void check_shapes(const ParamSet& p, const CnnShape& sh) {
  const auto c1 = static_cast<Eigen::Index>(sh.channels1);
  const auto c2 = static_cast<Eigen::Index>(sh.channels2);
  const auto f = static_cast<Eigen::Index>(sh.flat());
  const auto h = static_cast<Eigen::Index>(sh.hidden);
  const bool ok = p.size() == 8 && p.value(kConv1W).rows() == 9 && p.value(kConv1W).cols() == c1 &&
                  p.value(kConv2W).rows() == 9 * c1 && p.value(kConv2W).cols() == c2 &&
                  p.value(kFc1W).rows() == f && p.value(kFc1W).cols() == h &&
                  p.value(kFc2W).rows() == h && p.value(kFc2W).cols() == 1;
  if (!ok) throw Error(ErrorCode::kShapeMismatch, "CNN parameters do not match the declared shape");
}

}  // namespace

void cnn_init(ParamSet& params, const CnnShape& sh, std::mt19937_64& rng) {
  if (sh.side < sh.pool || sh.pool == 0) {
    throw Error(ErrorCode::kInvalidArgument, "CNN side must be >= pool size");
  }
  const auto add = [&](const char* name, std::size_t rows, std::size_t cols, double fan_in) {
    const std::size_t i = params.add(name, {rows, cols});
    fill_normal(params.value(i), 1.0 / std::sqrt(fan_in), rng);
  };
  const auto bias = [&](const char* name, std::size_t n) { params.add(name, {n}); };
  add("conv1.w", 9, sh.channels1, 9.0);
  bias("conv1.b", sh.channels1);
  add("conv2.w", 9 * sh.channels1, sh.channels2, 9.0 * static_cast<double>(sh.channels1));
  bias("conv2.b", sh.channels2);
  add("fc1.w", sh.flat(), sh.hidden, static_cast<double>(sh.flat()));
  bias("fc1.b", sh.hidden);
  add("fc2.w", sh.hidden, 1, static_cast<double>(sh.hidden));
  bias("fc2.b", 1);
}

std::vector<double> cnn_forward(const ParamSet& p, const CnnShape& sh,
                                std::span<const Matrix> inputs, CnnTape* tape) {
  check_shapes(p, sh);
  const std::size_t count = inputs.size();
  const auto s = static_cast<Eigen::Index>(sh.side);
  const Eigen::Index px = s * s;
  Matrix x(static_cast<Eigen::Index>(count) * px, 1);
  for (std::size_t n = 0; n < count; ++n) {
    if (inputs[n].rows() != s || inputs[n].cols() != s) {
      throw Error(ErrorCode::kShapeMismatch, "CNN input must be side x side");
    }
    x.block(static_cast<Eigen::Index>(n) * px, 0, px, 1) =
        Eigen::Map<const Vector>(inputs[n].data(), px);
  }
  CnnTape local;
  CnnTape& t = tape ? *tape : local;
  t.count = count;
  t.cols1 = im2col(x, count, sh.side);
  t.z1 = (t.cols1 * p.value(kConv1W)).rowwise() + p.value(kConv1B).row(0);
  t.a1 = nn::gelu(t.z1);
  t.cols2 = im2col(t.a1, count, sh.side);
  t.z2 = (t.cols2 * p.value(kConv2W)).rowwise() + p.value(kConv2B).row(0);
  t.a2 = nn::gelu(t.z2);

  const auto c2 = static_cast<Eigen::Index>(sh.channels2);
  t.pooled = Matrix::Zero(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(sh.flat()));
  for (Eigen::Index n = 0; n < static_cast<Eigen::Index>(count); ++n) {
    for (std::size_t by = 0; by < sh.pool; ++by) {
      const auto [y0, y1] = bin(by, sh.pool, sh.side);
      for (std::size_t bx = 0; bx < sh.pool; ++bx) {
        const auto [x0, x1] = bin(bx, sh.pool, sh.side);
        const Eigen::Index cell = static_cast<Eigen::Index>(by * sh.pool + bx);
        auto dst = t.pooled.row(n).segment(cell * c2, c2);
        for (Eigen::Index y = y0; y < y1; ++y) {
          for (Eigen::Index xx = x0; xx < x1; ++xx) dst += t.a2.row(n * px + y * s + xx);
        }
        dst /= static_cast<double>((y1 - y0) * (x1 - x0));
      }
    }
  }
  t.h_pre = (t.pooled * p.value(kFc1W)).rowwise() + p.value(kFc1B).row(0);
  t.h = nn::gelu(t.h_pre);
  const Vector z = (t.h * p.value(kFc2W)).col(0).array() + p.value(kFc2B)(0, 0);
  t.out = z.array().tanh();
  return {t.out.data(), t.out.data() + t.out.size()};
}

void cnn_backward(const ParamSet& p, const CnnShape& sh, const CnnTape& t,
                  std::span<const double> upstream, Gradients& g, std::vector<Matrix>* d_inputs) {
  const auto count = static_cast<Eigen::Index>(t.count);
  if (static_cast<Eigen::Index>(upstream.size()) != count) {
    throw Error(ErrorCode::kShapeMismatch, "upstream size differs from batch size");
  }
  const auto s = static_cast<Eigen::Index>(sh.side);
  const Eigen::Index px = s * s;
  const auto c2 = static_cast<Eigen::Index>(sh.channels2);

  Vector dz(count);
  for (Eigen::Index n = 0; n < count; ++n) {
    dz(n) = upstream[static_cast<std::size_t>(n)] * (1.0 - t.out(n) * t.out(n));
  }
  g[kFc2W].col(0) += t.h.transpose() * dz;
  g[kFc2B](0, 0) += dz.sum();
  const Matrix dh = dz * p.value(kFc2W).col(0).transpose();
  const Matrix dh_pre = nn::gelu_backward(t.h_pre, dh);
  g[kFc1W].noalias() += t.pooled.transpose() * dh_pre;
  g[kFc1B].row(0) += dh_pre.colwise().sum();
  const Matrix dpooled = dh_pre * p.value(kFc1W).transpose();

  Matrix da2 = Matrix::Zero(t.a2.rows(), t.a2.cols());
  for (Eigen::Index n = 0; n < count; ++n) {
    for (std::size_t by = 0; by < sh.pool; ++by) {
      const auto [y0, y1] = bin(by, sh.pool, sh.side);
      for (std::size_t bx = 0; bx < sh.pool; ++bx) {
        const auto [x0, x1] = bin(bx, sh.pool, sh.side);
        const Eigen::Index cell = static_cast<Eigen::Index>(by * sh.pool + bx);
        const auto src = dpooled.row(n).segment(cell * c2, c2) /
                         static_cast<double>((y1 - y0) * (x1 - x0));
        for (Eigen::Index y = y0; y < y1; ++y) {
          for (Eigen::Index xx = x0; xx < x1; ++xx) da2.row(n * px + y * s + xx) += src;
        }
      }
    }
  }
  const Matrix dz2 = nn::gelu_backward(t.z2, da2);
  g[kConv2W].noalias() += t.cols2.transpose() * dz2;
  g[kConv2B].row(0) += dz2.colwise().sum();
  const Matrix da1 = col2im(dz2 * p.value(kConv2W).transpose(), t.count, sh.side,
                            static_cast<Eigen::Index>(sh.channels1));
  const Matrix dz1 = nn::gelu_backward(t.z1, da1);
  g[kConv1W].noalias() += t.cols1.transpose() * dz1;
  g[kConv1B].row(0) += dz1.colwise().sum();
  if (d_inputs) {
    const Matrix dx = col2im(dz1 * p.value(kConv1W).transpose(), t.count, sh.side, 1);
    d_inputs->clear();
    for (Eigen::Index n = 0; n < count; ++n) {
      Matrix d(s, s);
      Eigen::Map<Vector>(d.data(), px) = dx.block(n * px, 0, px, 1);
      d_inputs->push_back(std::move(d));
    }
  }
}

}  // namespace compose
