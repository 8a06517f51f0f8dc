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
#include "pointdet/grid.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "pointdet/hash.hpp"

namespace pointdet {

namespace {

SplitName split_for_size(std::size_t size) {
  switch (size) {
    case 50:
      return SplitName::train_50;
    case 100:
      return SplitName::train_100;
    case 200:
      return SplitName::train_200;
    default:
      throw UsageError("grid: no training split for sample size " +
                       std::to_string(size));
  }
}

nlohmann::json schedule_to_json(const TrainingSchedule& s) {
  return nlohmann::json{{"base_lr", s.base_lr},
                        {"total_iterations", s.total_iterations},
                        {"warmup_iterations", s.warmup_iterations},
                        {"decay_milestones", s.decay_milestones},
                        {"decay_factor", s.decay_factor},
                        {"warmup_start_factor", s.warmup_start_factor},
                        {"momentum", s.momentum},
                        {"weight_decay", s.weight_decay},
                        {"batch_size", s.batch_size},
                        {"max_grad_norm", s.max_grad_norm}};
}

TrainingSchedule schedule_from_json(const nlohmann::json& j, TrainingSchedule base) {
  base.base_lr = j.value("base_lr", base.base_lr);
  base.total_iterations = j.value("total_iterations", base.total_iterations);
  base.warmup_iterations = j.value("warmup_iterations", base.warmup_iterations);
  base.decay_milestones = j.value("decay_milestones", base.decay_milestones);
  base.decay_factor = j.value("decay_factor", base.decay_factor);
  base.warmup_start_factor = j.value("warmup_start_factor", base.warmup_start_factor);
  base.momentum = j.value("momentum", base.momentum);
  base.weight_decay = j.value("weight_decay", base.weight_decay);
  base.batch_size = j.value("batch_size", base.batch_size);
  base.max_grad_norm = j.value("max_grad_norm", base.max_grad_norm);
  return base;
}

}  // namespace

void GridSpec::validate(const SplitManifest& manifest) const {
  if (rows.empty()) throw UsageError("grid: no rows configured");
  if (backends.empty()) throw UsageError("grid: no backends configured");
  if (sizes.empty()) throw UsageError("grid: no sample sizes configured");
  if (seeds.empty()) throw UsageError("grid: no seeds configured");
  if (novel_label.empty()) throw UsageError("grid: novel_label missing");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw UsageError("grid: seeds must be distinct");
  }
  const auto registered = registered_backends();
  for (const std::string& backend : backends) {
    if (std::find(registered.begin(), registered.end(), backend) == registered.end()) {
      throw UsageError("grid: unknown backend '" + backend + "'");
    }
  }
  for (std::size_t size : sizes) {
    if (!manifest.find(split_for_size(size))) {
      throw UsageError("grid: split manifest lacks a train_" + std::to_string(size) +
                       " split");
    }
  }
  if (!manifest.find(SplitName::test)) {
    throw UsageError("grid: split manifest lacks a test split");
  }
  pretrain_schedule.validate();
  finetune_schedule.validate();
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
    throw UsageError("grid: IoU threshold must lie in (0, 1]");
  }
}

nlohmann::json GridSpec::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const GridRowSpec& row : rows) {
    rows_json.push_back({{"pretrain", row.pretrain},
                         {"novel_mask", to_string(row.novel_mask)},
                         {"base_mask", to_string(row.base_mask)}});
  }
  return nlohmann::json{{"backends", backends},
                        {"rows", std::move(rows_json)},
                        {"sizes", sizes},
                        {"seeds", seeds},
                        {"pretrain_schedule", schedule_to_json(pretrain_schedule)},
                        {"finetune_schedule", schedule_to_json(finetune_schedule)},
                        {"augmentation", augmentation_config_to_json(augmentation)},
                        {"resize_shorter_side", resize_shorter_side},
                        {"novel_label", novel_label},
                        {"iou_threshold", iou_threshold}};
}

GridSpec GridSpec::from_json(const nlohmann::json& j) {
  GridSpec spec;
  spec.backends = j.value("backends", spec.backends);
  if (j.contains("rows")) {
    spec.rows.clear();
    for (const auto& row : j.at("rows")) {
      spec.rows.push_back(
          {row.value("pretrain", false),
           novel_mask_mode_from_string(row.value("novel_mask", std::string("none"))),
           base_mask_mode_from_string(row.value("base_mask", std::string("none")))});
    }
  }
  spec.sizes = j.value("sizes", spec.sizes);
  spec.seeds = j.value("seeds", spec.seeds);
  if (j.contains("pretrain_schedule")) {
    spec.pretrain_schedule =
        schedule_from_json(j.at("pretrain_schedule"), spec.pretrain_schedule);
  }
  if (j.contains("finetune_schedule")) {
    spec.finetune_schedule =
        schedule_from_json(j.at("finetune_schedule"), spec.finetune_schedule);
  }
  if (j.contains("augmentation")) {
    // Mask modes come from rows; the shared block carries the knobs.
    spec.augmentation = augmentation_config_from_json(j.at("augmentation"));
  }
  spec.resize_shorter_side = j.value("resize_shorter_side", spec.resize_shorter_side);
  spec.novel_label = j.value("novel_label", spec.novel_label);
  spec.iou_threshold = j.value("iou_threshold", spec.iou_threshold);
  return spec;
}

std::vector<GridRowSpec> standard_grid_rows() {
  return {{false, NovelMaskMode::none, BaseMaskMode::none},
          {false, NovelMaskMode::none, BaseMaskMode::segmentation},
          {false, NovelMaskMode::bounding_box, BaseMaskMode::segmentation},
          {false, NovelMaskMode::segmentation, BaseMaskMode::segmentation},
          {true, NovelMaskMode::none, BaseMaskMode::none},
          {true, NovelMaskMode::none, BaseMaskMode::segmentation},
          {true, NovelMaskMode::bounding_box, BaseMaskMode::segmentation},
          {true, NovelMaskMode::segmentation, BaseMaskMode::segmentation}};
}

namespace {

AugmentationConfig row_augmentation(const GridSpec& spec, const GridRowSpec& row) {
  AugmentationConfig config = spec.augmentation;
  config.novel_mask_mode = row.novel_mask;
  config.base_mask_mode = row.base_mask;
  config.copy_paste_enabled =
      row.novel_mask != NovelMaskMode::none || row.base_mask != BaseMaskMode::none;
  return config;
}

TrainRunConfig finetune_config_for(const GridSpec& spec, const GridRowSpec& row,
                                   const std::string& backend, std::uint64_t seed) {
  TrainRunConfig config;
  config.mode = TrainMode::finetune;
  config.backend = backend;
  config.schedule = spec.finetune_schedule;
  config.frozen_stages = row.pretrain ? std::vector<int>{1, 2, 3} : std::vector<int>{};
  config.augmentation = row_augmentation(spec, row);
  config.resize_shorter_side = spec.resize_shorter_side;
  config.seed = seed;
  config.novel_class_label = spec.novel_label;
  return config;
}

std::string short_hash(const nlohmann::json& j) {
  return hex64(fnv1a64(j.dump())).substr(0, 8);
}

std::string row_slug(const GridRowSpec& row) {
  auto mask_slug = [](const std::string& s) {
    return s == "none" ? "none" : (s == "bounding_box" ? "bbox" : "seg");
  };
  return std::string(row.pretrain ? "pre" : "nopre") + "_" +
         mask_slug(to_string(row.novel_mask)) + "_" + mask_slug(to_string(row.base_mask));
}

}  // namespace

GridOutcome run_experiment_grid(const GridSpec& spec, const Dataset& novel_dataset,
                                const Dataset& base_dataset,
                                const SplitManifest& manifest,
                                const std::filesystem::path& artifact_root) {
  namespace fs = std::filesystem;
  spec.validate(manifest);
  fs::create_directories(artifact_root);
  {
    std::ofstream echo(artifact_root / "grid_config.json");
    if (!echo) throw PipelineError("cannot write grid config echo");
    echo << spec.to_json().dump(1) << "\n";
  }

  const DatasetSplit* test_split = manifest.find(SplitName::test);
  std::vector<const AnnotatedImage*> test_images;
  std::vector<AnnotatedImage> test_copies;
  for (const std::string& id : test_split->image_ids) {
    const AnnotatedImage* image = novel_dataset.find_image(id);
    if (!image) throw DataError("test split references unknown image '" + id + "'");
    test_images.push_back(image);
    test_copies.push_back(*image);
  }

  const bool any_pretrain =
      std::any_of(spec.rows.begin(), spec.rows.end(),
                  [](const GridRowSpec& row) { return row.pretrain; });

  // Shared pre-training checkpoints per (backend, seed).
  std::map<std::pair<std::string, std::uint64_t>, Checkpoint> pretrained;
  GridOutcome outcome;
  if (any_pretrain) {
    for (const std::string& backend_name : spec.backends) {
      for (std::uint64_t seed : spec.seeds) {
        TrainRunConfig config;
        config.mode = TrainMode::pretrain;
        config.backend = backend_name;
        config.schedule = spec.pretrain_schedule;
        config.augmentation.flip_probability = spec.augmentation.flip_probability;
        config.resize_shorter_side = spec.resize_shorter_side;
        config.seed = seed;

        const fs::path dir =
            artifact_root / ("pretrain_" + backend_name + "_s" + std::to_string(seed) +
                             "_" + short_hash(config.to_json()));
        const fs::path checkpoint_path = dir / "checkpoint.json";
        if (fs::exists(checkpoint_path)) {
          pretrained.emplace(std::make_pair(backend_name, seed),
                             load_checkpoint(checkpoint_path));
          continue;
        }
        fs::create_directories(dir);
        auto backend = make_backend(
            backend_name, static_cast<int>(base_dataset.class_vocabulary.size()), seed);
        const TrainResult result = pretrain(*backend, base_dataset, config, dir);
        pretrained.emplace(std::make_pair(backend_name, seed), result.checkpoint);
      }
    }
  }

  std::map<CellKey, std::vector<double>> cell_values;
  for (const GridRowSpec& row : spec.rows) {
    for (std::size_t size : spec.sizes) {
      const DatasetSplit* train_split = manifest.find(split_for_size(size));
      for (const std::string& backend_name : spec.backends) {
        const CellKey cell{backend_name, row.pretrain, row.novel_mask, row.base_mask,
                           size};
        for (std::uint64_t seed : spec.seeds) {
          const TrainRunConfig config =
              finetune_config_for(spec, row, backend_name, seed);
          const fs::path dir =
              artifact_root / (backend_name + "_" + row_slug(row) + "_n" +
                               std::to_string(size) + "_s" + std::to_string(seed) +
                               "_" + short_hash(config.to_json()));
          GridRunRecord record{cell, seed, dir, "", std::nullopt};

          const fs::path result_path = dir / "result.json";
          try {
            if (fs::exists(result_path)) {
              std::ifstream in(result_path);
              nlohmann::json j;
              in >> j;
              record.ap = j.at("ap").get<double>();
              record.status = "resumed";
            } else {
              fs::create_directories(dir);
              std::optional<Checkpoint> source;
              if (row.pretrain) {
                source = pretrained.at({backend_name, seed});
              }
              const TrainResult trained =
                  finetune(source, novel_dataset, train_split->image_ids,
                           &base_dataset, config, dir);
              const auto model = backend_from_checkpoint(trained.checkpoint);
              const std::vector<Detection> detections =
                  run_inference(*model, trained.checkpoint.class_vocabulary,
                                test_images, spec.resize_shorter_side);
              save_detections_jsonl(detections, dir / "detections.jsonl");
              const EvaluationReport report = evaluate_detections(
                  detections, test_copies, spec.novel_label, spec.iou_threshold);
              record.ap = report.ap;
              record.status = "completed";
              std::ofstream out(result_path);
              out << nlohmann::json{{"ap", report.ap},
                                    {"seed", seed},
                                    {"backend", backend_name},
                                    {"pretrain", row.pretrain},
                                    {"novel_mask", to_string(row.novel_mask)},
                                    {"base_mask", to_string(row.base_mask)},
                                    {"sample_size", size},
                                    {"total_ground_truth", report.total_ground_truth},
                                    {"detections", report.detections}}
                         .dump(1)
                  << "\n";
            }
          } catch (const std::exception& e) {
            record.status = std::string("failed: ") + e.what();
          }
          if (record.ap) cell_values[cell].push_back(*record.ap);
          outcome.runs.push_back(std::move(record));
        }
      }
    }
  }

  for (const auto& [cell, values] : cell_values) {
    outcome.results.push_back(make_eval_result(cell, values));
  }
  std::sort(outcome.results.begin(), outcome.results.end(),
            [](const EvalResult& a, const EvalResult& b) { return a.key < b.key; });

  save_results_json(outcome.results, artifact_root / "results.json");
  save_results_csv(outcome.results, artifact_root / "results.csv");
  {
    std::ofstream table(artifact_root / "table.txt");
    table << render_results_table(outcome.results);
  }
  {
    std::ofstream runs(artifact_root / "runs.jsonl");
    for (const GridRunRecord& record : outcome.runs) {
      runs << nlohmann::json{{"backend", record.cell.backend},
                             {"pretrain", record.cell.pretrain},
                             {"novel_mask", to_string(record.cell.novel_mask)},
                             {"base_mask", to_string(record.cell.base_mask)},
                             {"sample_size", record.cell.sample_size},
                             {"seed", record.seed},
                             {"artifact_dir", record.artifact_dir.string()},
                             {"status", record.status},
                             {"ap", record.ap ? nlohmann::json(*record.ap)
                                              : nlohmann::json()}}
                  .dump()
           << "\n";
    }
  }
  return outcome;
}

}  // namespace pointdet
