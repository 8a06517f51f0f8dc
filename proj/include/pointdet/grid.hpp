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

#include <filesystem>

#include "pointdet/evaluator.hpp"
#include "pointdet/trainer.hpp"

namespace pointdet {

// One ablation row: pre-training on/off plus the two copy-paste mask modes.
struct GridRowSpec {
  bool pretrain = false;
  NovelMaskMode novel_mask = NovelMaskMode::none;
  BaseMaskMode base_mask = BaseMaskMode::none;

  friend bool operator==(const GridRowSpec&, const GridRowSpec&) = default;
};

struct GridSpec {
  std::vector<std::string> backends{"toy"};
  std::vector<GridRowSpec> rows;
  std::vector<std::size_t> sizes{50};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  TrainingSchedule pretrain_schedule = default_pretrain_schedule();
  TrainingSchedule finetune_schedule = default_finetune_schedule();
  AugmentationConfig augmentation;  // mask modes are overridden per row
  int resize_shorter_side = 96;
  std::string novel_label;
  double iou_threshold = 0.5;

  void validate(const SplitManifest& manifest) const;
  nlohmann::json to_json() const;
  static GridSpec from_json(const nlohmann::json& j);
};

struct GridRunRecord {
  CellKey cell;
  std::uint64_t seed = 0;
  std::filesystem::path artifact_dir;
  std::string status;  // completed | resumed | failed: <reason>
  std::optional<double> ap;
};

struct GridOutcome {
  std::vector<GridRunRecord> runs;
  std::vector<EvalResult> results;  // one per cell with at least one finished run
};

/// Runs every (row x size x backend x seed) combination: fine-tunes, runs
/// inference on the test split, and scores AP@IoU. Pre-training checkpoints
/// are shared across cells per (backend, seed). Artifact directories are
/// content-addressed by config hash; a run whose result.json already exists
/// is resumed, and a failed run is recorded and skipped in aggregation but
/// never dropped silently. Writes results.json, results.csv and table.txt
/// under artifact_root.
GridOutcome run_experiment_grid(const GridSpec& spec, const Dataset& novel_dataset,
                                const Dataset& base_dataset,
                                const SplitManifest& manifest,
                                const std::filesystem::path& artifact_root);

/// The eight-row grid of the ablation study (pretrain x novel-mask x
/// base-mask combinations).
std::vector<GridRowSpec> standard_grid_rows();

}  // namespace pointdet
