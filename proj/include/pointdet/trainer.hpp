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
#include <map>
#include <memory>
#include <optional>

#include "pointdet/augment.hpp"
#include "pointdet/backend.hpp"
#include "pointdet/dataset.hpp"
#include "pointdet/evaluator.hpp"
#include "pointdet/schedule.hpp"

namespace pointdet {

enum class TrainMode { pretrain, finetune };

std::string to_string(TrainMode mode);

struct TrainRunConfig {
  TrainMode mode = TrainMode::pretrain;
  std::string backend = "toy";
  TrainingSchedule schedule;
  std::vector<int> frozen_stages;  // finetune convention: {1, 2, 3}
  AugmentationConfig augmentation;
  int resize_shorter_side = 96;
  std::uint64_t seed = 0;
  std::string novel_class_label;  // finetune only

  void validate(int backend_stages) const;
  nlohmann::json to_json() const;
  static TrainRunConfig from_json(const nlohmann::json& j);
};

struct Checkpoint {
  std::string backend_name;
  std::string backend_version;
  std::vector<std::string> class_vocabulary;  // index -> label
  std::map<std::string, int> stage_tags;
  nlohmann::json state;  // opaque backend parameters
  std::int64_t completed_iterations = 0;
  std::string rng_state;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Rebuilds the backend a checkpoint was saved from and restores its
/// parameters; stage tags are verified against the fresh instance.
std::unique_ptr<DetectorBackend> backend_from_checkpoint(const Checkpoint& checkpoint);

struct RunLog {
  std::vector<double> loss_trace;  // one entry per iteration
  std::vector<double> lr_trace;
  std::vector<std::uint64_t> sample_digests;  // augmentation provenance
  std::int64_t completed_iterations = 0;
  bool aborted_non_finite = false;
};

struct TrainResult {
  Checkpoint checkpoint;
  RunLog log;
};

/// Rescales an image so its shorter side equals `target` (aspect preserved,
/// nearest-neighbour resampling) and scales every annotation by the same
/// factors. Identity when the shorter side already matches.
AnnotatedImage resize_shorter_side(const AnnotatedImage& image, int target);

/// Pre-training on the base classes: every parameter group is updated, flips
/// are the only augmentation, and the class vocabulary is the dataset's
/// sorted label set. Aborts on non-finite loss, returning the last finite
/// state. When artifact_dir is given, writes config.json, trace.csv,
/// provenance.jsonl and checkpoint.json there.
TrainResult pretrain(DetectorBackend& backend, const Dataset& base_dataset,
                     const TrainRunConfig& config,
                     const std::optional<std::filesystem::path>& artifact_dir = {});

/// Fine-tuning on the novel class: the head is replaced for exactly one
/// class, the configured backbone stages are frozen bit-exactly, and every
/// training sample is drawn through the two-way copy-paste augmentor when
/// enabled. `source` is the pre-training checkpoint; pass nullopt to start
/// from a freshly initialized backend (the no-pre-train ablation rows).
/// train_image_ids selects the novel training split.
TrainResult finetune(const std::optional<Checkpoint>& source,
                     const Dataset& novel_dataset,
                     const std::vector<std::string>& train_image_ids,
                     const Dataset* base_dataset, const TrainRunConfig& config,
                     const std::optional<std::filesystem::path>& artifact_dir = {});

/// Runs inference over images at the training resolution and maps boxes back
/// to original image coordinates. Labels come from the vocabulary.
std::vector<Detection> run_inference(const DetectorBackend& backend,
                                     const std::vector<std::string>& class_vocabulary,
                                     const std::vector<const AnnotatedImage*>& images,
                                     int resize_target);

void write_trace_csv(const RunLog& log, const std::filesystem::path& path);

}  // namespace pointdet
