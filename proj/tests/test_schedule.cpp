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
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "pointdet/schedule.hpp"

using namespace pointdet;

namespace {

TrainingSchedule finetune_schedule() {
  TrainingSchedule schedule;
  schedule.base_lr = 0.0005;
  schedule.total_iterations = 40000;
  schedule.warmup_iterations = 1000;
  return schedule;
}

bool rel_close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b));
}

}  // namespace

TEST_CASE("fine-tune schedule hits the published values") {
  const TrainingSchedule s = finetune_schedule();
  CHECK(rel_close(lr_at(s, 0), 5e-7, 1e-15));       // base / 1000
  CHECK(lr_at(s, 1000) == 0.0005);                  // exactly base at warmup end
  CHECK(rel_close(lr_at(s, 36000), 5e-5, 1e-15));   // one decay at 90%
  CHECK(rel_close(lr_at(s, 38000), 5e-6, 1e-15));   // two decays at 95%
  CHECK(rel_close(lr_at(s, 39801), 5e-7, 1e-15));   // three decays past 99.5%
}

TEST_CASE("warmup ramps linearly from base/1000") {
  const TrainingSchedule s = finetune_schedule();
  const double expected_mid = 0.0005 * (0.001 + 0.999 * 0.5);
  CHECK(lr_at(s, 500) == doctest::Approx(expected_mid).epsilon(1e-14));
  // Strictly increasing through warmup.
  for (int i = 1; i < 1000; i += 7) {
    CHECK(lr_at(s, i) > lr_at(s, i - 1));
  }
}

TEST_CASE("lr is non-increasing after warmup and piecewise constant between milestones") {
  const TrainingSchedule s = finetune_schedule();
  double prev = lr_at(s, s.warmup_iterations);
  for (std::int64_t i = s.warmup_iterations; i < s.total_iterations; i += 97) {
    const double lr = lr_at(s, i);
    CHECK(lr <= prev);
    prev = lr;
  }
  CHECK(lr_at(s, 2000) == lr_at(s, 35999));
  CHECK(lr_at(s, 36000) == lr_at(s, 37999));
  CHECK(lr_at(s, 38000) == lr_at(s, 39799));
  CHECK(lr_at(s, 39800) == lr_at(s, 39999));
}

TEST_CASE("out-of-range iterations are rejected") {
  const TrainingSchedule s = finetune_schedule();
  CHECK_THROWS_AS(lr_at(s, -1), std::out_of_range);
  CHECK_THROWS_AS(lr_at(s, 40000), std::out_of_range);
}

TEST_CASE("schedule validation rejects malformed configurations") {
  TrainingSchedule s = finetune_schedule();
  s.validate();  // baseline is fine

  TrainingSchedule bad = s;
  bad.warmup_iterations = 40000;
  CHECK_THROWS_AS(bad.validate(), UsageError);

  bad = s;
  bad.decay_milestones = {0.95, 0.90};
  CHECK_THROWS_AS(bad.validate(), UsageError);

  bad = s;
  bad.decay_milestones = {0.5, 1.5};
  CHECK_THROWS_AS(bad.validate(), UsageError);

  bad = s;
  bad.base_lr = 0.0;
  CHECK_THROWS_AS(bad.validate(), UsageError);
}

TEST_CASE("a scaled-down schedule keeps the same shape") {
  TrainingSchedule s;
  s.base_lr = 0.02;
  s.total_iterations = 400;  // 2 epochs x 200 iterations
  s.warmup_iterations = 40;
  CHECK(rel_close(lr_at(s, 0), 0.02 * 0.001, 1e-15));
  CHECK(lr_at(s, 40) == 0.02);
  CHECK(rel_close(lr_at(s, 360), 0.002, 1e-15));   // 90% of 400
  CHECK(rel_close(lr_at(s, 399), 2e-5, 1e-12));    // after 95% and 99.5%
}
