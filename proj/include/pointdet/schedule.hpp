/* Copyright 2026 The pointdet Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

#include <cstdint>
#include <vector>

#include "pointdet/errors.hpp"

namespace pointdet {

// Piecewise learning-rate schedule: a linear warmup from base_lr/1000 to
// base_lr, then multiplicative decay at fractional milestones of the total
// iteration count. Milestones land on whole iterations via llround of
// fraction * total.
struct TrainingSchedule {
  double base_lr = 0.001;
  std::int64_t total_iterations = 40000;
  std::int64_t warmup_iterations = 1000;
  std::vector<double> decay_milestones = {0.90, 0.95, 0.995};  // fractions of total
  double decay_factor = 0.1;
  double warmup_start_factor = 0.001;  // lr at iteration 0 = base_lr * this
  double momentum = 0.9;
  double weight_decay = 0.0005;
  int batch_size = 1;
  double max_grad_norm = 5.0;  // global-norm clip; <= 0 disables

  void validate() const;
  std::int64_t milestone_iteration(std::size_t index) const;
};

/// Learning rate at a given iteration (0-based). Out-of-range iterations are
/// rejected with std::out_of_range.
double lr_at(const TrainingSchedule& schedule, std::int64_t iteration);

// Default two-phase protocol: pre-training at 0.001 and fine-tuning at
// 0.0005, 40 epochs x 1000 iterations each, warmup over the first 1000.
inline TrainingSchedule default_pretrain_schedule() { return {}; }

inline TrainingSchedule default_finetune_schedule() {
  TrainingSchedule schedule;
  schedule.base_lr = 0.0005;
  return schedule;
}

}  // namespace pointdet
