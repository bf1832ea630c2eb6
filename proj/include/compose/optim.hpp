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

#pragma once

#include <cstddef>
#include <vector>

#include "compose/params.hpp"

namespace compose {

// Linear warmup to `base_lr` over warmup_ratio * total_steps, then linear
// decay to zero. Step indices are 0-based, so the very first update runs at
// lr 0 when warmup is non-empty.
class LinearSchedule {
 public:
  LinearSchedule(double base_lr, std::size_t total_steps, double warmup_ratio);
  double lr(std::size_t step) const;
  std::size_t warmup_steps() const { return warmup_; }

 private:
  double base_;
  std::size_t total_;
  std::size_t warmup_;
};

struct AdamWConfig {
  double lr = 2e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  std::size_t total_steps = 2000;
  double warmup_ratio = 0.1;
};

// Decoupled weight decay Adam. Row-sparse tensors are updated only on rows
// that carry gradient in the current step (moments and decay included).
class AdamW {
 public:
  AdamW(const ParamSet& params, AdamWConfig cfg);

  void step(ParamSet& params, const Gradients& grads);
  std::size_t steps_taken() const { return step_; }
  double current_lr() const { return schedule_.lr(step_); }
  const AdamWConfig& config() const { return cfg_; }

 private:
  void update_row(double* p, double* m, double* v, const double* g,
                  Eigen::Index n, double lr, double bc1, double bc2) const;

  AdamWConfig cfg_;
  LinearSchedule schedule_;
  std::size_t step_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

}  // namespace compose
