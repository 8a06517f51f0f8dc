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
#include "pointdet/schedule.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace pointdet {

void TrainingSchedule::validate() const {
  if (base_lr <= 0.0 || !std::isfinite(base_lr)) {
    throw UsageError("schedule: base_lr must be positive");
  }
  if (total_iterations < 1) {
    throw UsageError("schedule: total_iterations must be >= 1");
  }
  if (warmup_iterations < 0 || warmup_iterations >= total_iterations) {
    throw UsageError("schedule: warmup_iterations must lie in [0, total)");
  }
  double prev = 0.0;
  for (double m : decay_milestones) {
    if (!(m > prev && m <= 1.0)) {
      throw UsageError("schedule: milestones must be strictly increasing in (0, 1]");
    }
    prev = m;
  }
  if (decay_factor <= 0.0 || decay_factor > 1.0) {
    throw UsageError("schedule: decay_factor must lie in (0, 1]");
  }
  if (batch_size < 1) throw UsageError("schedule: batch_size must be >= 1");
}

std::int64_t TrainingSchedule::milestone_iteration(std::size_t index) const {
  return static_cast<std::int64_t>(
      std::llround(decay_milestones[index] * static_cast<double>(total_iterations)));
}

double lr_at(const TrainingSchedule& schedule, std::int64_t iteration) {
  if (iteration < 0 || iteration >= schedule.total_iterations) {
    throw std::out_of_range("lr_at: iteration " + std::to_string(iteration) +
                            " outside [0, " +
                            std::to_string(schedule.total_iterations) + ")");
  }
  if (iteration < schedule.warmup_iterations) {
    const double progress = static_cast<double>(iteration) /
                            static_cast<double>(schedule.warmup_iterations);
    return schedule.base_lr *
           (schedule.warmup_start_factor +
            (1.0 - schedule.warmup_start_factor) * progress);
  }
  double lr = schedule.base_lr;
  for (std::size_t i = 0; i < schedule.decay_milestones.size(); ++i) {
    if (iteration >= schedule.milestone_iteration(i)) lr *= schedule.decay_factor;
  }
  return lr;
}

}  // namespace pointdet
