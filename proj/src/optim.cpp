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

#include "compose/optim.hpp"

#include <algorithm>
#include <cmath>

#include "compose/error.hpp"

namespace compose {

LinearSchedule::LinearSchedule(double base_lr, std::size_t total_steps,
                               double warmup_ratio)
    : base_(base_lr),
      total_(std::max<std::size_t>(total_steps, 1)),
      warmup_(static_cast<std::size_t>(std::ceil(warmup_ratio * static_cast<double>(total_steps)))) {
  if (base_lr < 0.0) throw Error(ErrorCode::kInvalidArgument, "negative learning rate");
}

double LinearSchedule::lr(std::size_t step) const {
  if (step < warmup_) {
    return base_ * static_cast<double>(step) / static_cast<double>(std::max<std::size_t>(warmup_, 1));
  }
  if (step >= total_) return 0.0;
  return base_ * static_cast<double>(total_ - step) /
         static_cast<double>(std::max<std::size_t>(total_ - warmup_, 1));
}

AdamW::AdamW(const ParamSet& params, AdamWConfig cfg)
    : cfg_(cfg), schedule_(cfg.lr, cfg.total_steps, cfg.warmup_ratio) {
  for (const auto& t : params) {
    m_.push_back(Matrix::Zero(t.value.rows(), t.value.cols()));
    v_.push_back(Matrix::Zero(t.value.rows(), t.value.cols()));
  }
}

void AdamW::update_row(double* p, double* m, double* v, const double* g,
                       Eigen::Index n, double lr, double bc1, double bc2) const {
  const double b1 = cfg_.beta1, b2 = cfg_.beta2;
  for (Eigen::Index k = 0; k < n; ++k) {
    m[k] = b1 * m[k] + (1.0 - b1) * g[k];
    v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
  }
  // lr == 0 must leave parameters bitwise untouched.
  if (lr == 0.0) return;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double mhat = m[k] / bc1;
    const double vhat = v[k] / bc2;
    p[k] -= lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * p[k]);
  }
}

void AdamW::step(ParamSet& params, const Gradients& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw Error(ErrorCode::kShapeMismatch, "optimizer state does not match parameters");
  }
  const double lr = schedule_.lr(step_);
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& p = params.value(i);
    const Matrix& g = grads[i];
    if (grads.row_sparse(i)) {
      const Eigen::Index cols = p.cols();
      for (std::size_t r : grads.touched_rows(i)) {
        const Eigen::Index off = static_cast<Eigen::Index>(r) * cols;
        update_row(p.data() + off, m_[i].data() + off, v_[i].data() + off,
                   g.data() + off, cols, lr, bc1, bc2);
      }
    } else {
      update_row(p.data(), m_[i].data(), v_[i].data(), g.data(), p.size(), lr, bc1, bc2);
    }
  }
}

}  // namespace compose
