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

// pointdet: point annotations -> segmentation -> splits -> pre-train ->
// fine-tune -> AP evaluation, end to end. One subcommand per pipeline stage;
// exit codes: 0 ok (possibly with warnings), 1 usage/config, 2 data,
// 3 runtime.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "pointdet/dataset.hpp"
#include "pointdet/grid.hpp"
#include "pointdet/hash.hpp"
#include "pointdet/image_io.hpp"
#include "pointdet/segmenter.hpp"
#include "pointdet/synth.hpp"
#include "pointdet/trainer.hpp"

namespace fs = std::filesystem;
using namespace pointdet;

namespace {

struct PipelineConfig {
  fs::path config_dir;
  fs::path novel_dataset;
  fs::path base_dataset;
  fs::path split_manifest;
  fs::path artifact_root = "runs";
  GridSpec grid;
};

// Artifact root precedence: --artifact-root flag, then the config file,
// then $POINTDET_ARTIFACT_ROOT, then ./runs.
PipelineConfig load_pipeline_config(const fs::path& path,
                                    const fs::path& artifact_root_flag) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file: " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("config file is not valid JSON: " + std::string(e.what()));
  }
  PipelineConfig config;
  config.config_dir = path.parent_path();
  auto resolve = [&](const std::string& key) -> fs::path {
    if (!doc.contains(key)) return {};
    const fs::path p = doc.at(key).get<std::string>();
    return p.is_absolute() ? p : config.config_dir / p;
  };
  config.novel_dataset = resolve("novel_dataset");
  config.base_dataset = resolve("base_dataset");
  config.split_manifest = resolve("split_manifest");
  if (!artifact_root_flag.empty()) {
    config.artifact_root = artifact_root_flag;
  } else if (doc.contains("artifact_root")) {
    config.artifact_root = resolve("artifact_root");
  } else if (const char* env = std::getenv("POINTDET_ARTIFACT_ROOT")) {
    config.artifact_root = env;
  }
  config.grid = GridSpec::from_json(doc);
  if (doc.contains("novel_class")) {
    config.grid.novel_label = doc.at("novel_class").get<std::string>();
  }
  return config;
}

void require_exists(const fs::path& path, const std::string& what) {
  if (path.empty()) throw UsageError("config is missing the " + what + " path");
  if (!fs::exists(path)) throw DataError(what + " not found: " + path.string());
}

void forbid_inplace(const fs::path& in, const fs::path& out) {
  std::error_code ec;
  if (fs::exists(out) && fs::equivalent(in, out, ec) && !ec) {
    throw UsageError("output would overwrite the input file: " + out.string());
  }
}

std::set<std::string> parse_class_filter(const std::string& classes) {
  std::set<std::string> filter;
  std::string token;
  std::istringstream stream(classes);
  while (std::getline(stream, token, ',')) {
    if (!token.empty()) filter.insert(token);
  }
  return filter;
}

void print_segmentation_summary(const SegmentationSummary& summary) {
  std::cout << "segmentation summary:\n";
  for (const auto& [label, stats] : summary.per_class) {
    std::printf("  %-16s attempted %4zu  failed %4zu  poor %4zu  failure rate %.3f\n",
                label.c_str(), stats.attempted, stats.failed, stats.poor,
                stats.failure_rate());
  }
  std::printf("  overall failure rate %.3f\n", summary.failure_rate());
  for (const std::string& image_id : summary.transport_failures) {
    std::cout << "warning: transport failure on image " << image_id << "\n";
  }
}

int cmd_synth(const fs::path& out, int novel_images, int base_images,
              std::uint64_t seed, const std::string& novel_label) {
  SynthConfig config;
  config.novel_images = novel_images;
  config.base_images = base_images;
  config.seed = seed;
  if (!novel_label.empty()) config.novel_label = novel_label;
  const SynthOutput output = generate_synthetic_dataset(out, config);
  std::cout << "wrote " << output.novel_csv.string() << "\n";
  std::cout << "wrote " << output.base_csv.string() << "\n";
  return 0;
}

int cmd_ingest(const fs::path& csv, const fs::path& images_root, const fs::path& out,
               fs::path rejects_path) {
  require_exists(csv, "point CSV");
  forbid_inplace(csv, out);
  IngestResult result = ingest_point_csv(csv);
  if (!images_root.empty()) result.dataset.root_dir = images_root;
  save_dataset(result.dataset, out);
  if (rejects_path.empty()) rejects_path = out.string() + ".rejects.jsonl";
  write_rejects(result.rejects, rejects_path);

  std::size_t annotations = 0;
  for (const auto& image : result.dataset.images) annotations += image.annotations.size();
  std::cout << "ingested " << result.dataset.images.size() << " images, " << annotations
            << " annotations, " << result.rejects.size() << " rejected rows\n";
  std::cout << "wrote " << out.string() << "\n";
  if (!result.rejects.empty()) {
    std::cout << "warning: see rejects report " << rejects_path.string() << "\n";
  }
  return 0;
}

int cmd_segment(const fs::path& dataset_path, const fs::path& out,
                const std::string& segmenter_name, const std::string& classes) {
  require_exists(dataset_path, "dataset");
  forbid_inplace(dataset_path, out);
  if (segmenter_name != "reference") {
    throw UsageError("unknown segmenter '" + segmenter_name +
                     "' (available: reference)");
  }
  Dataset dataset = load_dataset(dataset_path, /*load_pixels=*/true);
  ReferenceSegmenter segmenter;
  const SegmentationSummary summary =
      segment_dataset(segmenter, dataset.images, parse_class_filter(classes));
  save_dataset(dataset, out);
  print_segmentation_summary(summary);
  std::cout << "wrote " << out.string() << "\n";
  return 0;
}

int cmd_correct(const fs::path& dataset_path, const fs::path& corrections_path,
                const fs::path& out) {
  require_exists(dataset_path, "dataset");
  require_exists(corrections_path, "corrections file");
  forbid_inplace(dataset_path, out);
  Dataset dataset = load_dataset(dataset_path);
  const auto corrections = load_corrections(corrections_path);
  const CorrectionAudit audit = apply_corrections(dataset.images, corrections);
  save_dataset(dataset, out);
  std::cout << "applied " << audit.applied_count() << " corrections, rejected "
            << audit.rejected_count() << "\n";
  for (const CorrectionAuditEntry& entry : audit.entries) {
    if (!entry.applied) {
      std::cout << "warning: correction for " << entry.image_id << "/"
                << entry.annotation_id << " rejected: " << entry.detail << "\n";
    }
  }
  std::cout << "wrote " << out.string() << "\n";
  return 0;
}

int cmd_validate(const fs::path& dataset_path, bool strict) {
  require_exists(dataset_path, "dataset");
  const Dataset dataset = load_dataset(dataset_path);
  const ValidationReport report = validate_dataset(dataset.images);
  if (report.clean()) {
    std::cout << "dataset is clean (" << dataset.images.size() << " images)\n";
    return 0;
  }
  for (const ValidationIssue& issue : report.issues) {
    std::cout << "violation: " << issue.kind << " image=" << issue.image_id;
    if (!issue.annotation_id.empty()) std::cout << " annotation=" << issue.annotation_id;
    if (!issue.detail.empty()) std::cout << " (" << issue.detail << ")";
    std::cout << "\n";
  }
  std::cout << report.issues.size() << " violations found\n";
  return strict ? 2 : 0;
}

int cmd_split(const fs::path& dataset_path, std::size_t n_test,
              const std::vector<std::size_t>& sizes, std::size_t n_validation,
              std::uint64_t seed, const fs::path& out) {
  require_exists(dataset_path, "dataset");
  forbid_inplace(dataset_path, out);
  const Dataset dataset = load_dataset(dataset_path);
  const SplitManifest manifest = make_splits(dataset, n_test, sizes, n_validation, seed);
  save_split_manifest(manifest, out);
  for (const DatasetSplit& split : manifest.splits) {
    std::printf("  %-12s %4zu images\n", to_string(split.name).c_str(),
                split.image_ids.size());
  }
  std::cout << "wrote " << out.string() << "\n";
  return 0;
}

fs::path pretrain_dir_for(const PipelineConfig& pipeline, const std::string& backend,
                          std::uint64_t seed, TrainRunConfig* out_config) {
  TrainRunConfig config;
  config.mode = TrainMode::pretrain;
  config.backend = backend;
  config.schedule = pipeline.grid.pretrain_schedule;
  config.augmentation.flip_probability = pipeline.grid.augmentation.flip_probability;
  config.resize_shorter_side = pipeline.grid.resize_shorter_side;
  config.seed = seed;
  if (out_config) *out_config = config;
  return pipeline.artifact_root /
         ("pretrain_" + backend + "_s" + std::to_string(seed) + "_" +
          hex64(fnv1a64(config.to_json().dump())).substr(0, 8));
}

int cmd_pretrain(const fs::path& config_path, const fs::path& artifact_root,
                 std::string backend, std::optional<std::uint64_t> seed_flag) {
  const PipelineConfig pipeline = load_pipeline_config(config_path, artifact_root);
  require_exists(pipeline.base_dataset, "base dataset");
  if (backend.empty()) backend = pipeline.grid.backends.at(0);
  const std::uint64_t seed = seed_flag.value_or(pipeline.grid.seeds.at(0));

  TrainRunConfig config;
  const fs::path dir = pretrain_dir_for(pipeline, backend, seed, &config);
  if (fs::exists(dir / "checkpoint.json")) {
    std::cout << "checkpoint already present: " << (dir / "checkpoint.json").string()
              << "\n";
    return 0;
  }
  fs::create_directories(dir);
  Dataset base = load_dataset(pipeline.base_dataset, /*load_pixels=*/true);
  auto detector =
      make_backend(backend, static_cast<int>(base.class_vocabulary.size()), seed);
  const TrainResult result = pretrain(*detector, base, config, dir);
  std::printf("pretrain done: %lld iterations, final loss %.4f\n",
              static_cast<long long>(result.log.completed_iterations),
              result.log.loss_trace.back());
  std::cout << "checkpoint: " << (dir / "checkpoint.json").string() << "\n";
  return 0;
}

int cmd_finetune(const fs::path& config_path, const fs::path& artifact_root,
                 std::string backend, std::optional<std::uint64_t> seed_flag,
                 std::size_t row_index, std::optional<std::size_t> size_flag,
                 const std::string& pretrain_source) {
  const PipelineConfig pipeline = load_pipeline_config(config_path, artifact_root);
  require_exists(pipeline.novel_dataset, "novel dataset");
  require_exists(pipeline.split_manifest, "split manifest");
  if (backend.empty()) backend = pipeline.grid.backends.at(0);
  const std::uint64_t seed = seed_flag.value_or(pipeline.grid.seeds.at(0));
  if (row_index >= pipeline.grid.rows.size()) {
    throw UsageError("row index " + std::to_string(row_index) +
                     " outside the configured grid rows");
  }
  const GridRowSpec row = pipeline.grid.rows[row_index];
  const std::size_t size = size_flag.value_or(pipeline.grid.sizes.at(0));

  TrainRunConfig config;
  config.mode = TrainMode::finetune;
  config.backend = backend;
  config.schedule = pipeline.grid.finetune_schedule;
  config.frozen_stages = row.pretrain ? std::vector<int>{1, 2, 3} : std::vector<int>{};
  config.augmentation = pipeline.grid.augmentation;
  config.augmentation.novel_mask_mode = row.novel_mask;
  config.augmentation.base_mask_mode = row.base_mask;
  config.augmentation.copy_paste_enabled =
      row.novel_mask != NovelMaskMode::none || row.base_mask != BaseMaskMode::none;
  config.resize_shorter_side = pipeline.grid.resize_shorter_side;
  config.seed = seed;
  config.novel_class_label = pipeline.grid.novel_label;

  std::optional<Checkpoint> source;
  if (pretrain_source == "auto") {
    if (row.pretrain) {
      const fs::path dir = pretrain_dir_for(pipeline, backend, seed, nullptr);
      require_exists(dir / "checkpoint.json", "pre-training checkpoint (run pretrain first)");
      source = load_checkpoint(dir / "checkpoint.json");
    }
  } else if (pretrain_source != "none") {
    source = load_checkpoint(pretrain_source);
  }

  Dataset novel = load_dataset(pipeline.novel_dataset, /*load_pixels=*/true);
  Dataset base;
  const Dataset* base_ptr = nullptr;
  if (config.augmentation.copy_paste_enabled) {
    require_exists(pipeline.base_dataset, "base dataset");
    base = load_dataset(pipeline.base_dataset, /*load_pixels=*/true);
    base_ptr = &base;
  }
  const SplitManifest manifest = load_split_manifest(pipeline.split_manifest);
  SplitName split_name;
  switch (size) {
    case 50:
      split_name = SplitName::train_50;
      break;
    case 100:
      split_name = SplitName::train_100;
      break;
    case 200:
      split_name = SplitName::train_200;
      break;
    default:
      throw UsageError("no training split for sample size " + std::to_string(size));
  }
  const DatasetSplit* split = manifest.find(split_name);
  if (!split) throw DataError("split manifest lacks " + to_string(split_name));

  const fs::path dir =
      pipeline.artifact_root /
      (backend + "_row" + std::to_string(row_index) + "_n" + std::to_string(size) +
       "_s" + std::to_string(seed) + "_" +
       hex64(fnv1a64(config.to_json().dump())).substr(0, 8));
  fs::create_directories(dir);
  const TrainResult result =
      finetune(source, novel, split->image_ids, base_ptr, config, dir);
  std::printf("finetune done: %lld iterations, final loss %.4f\n",
              static_cast<long long>(result.log.completed_iterations),
              result.log.loss_trace.back());
  std::cout << "checkpoint: " << (dir / "checkpoint.json").string() << "\n";
  return 0;
}

int cmd_grid(const fs::path& config_path, const fs::path& artifact_root) {
  const PipelineConfig pipeline = load_pipeline_config(config_path, artifact_root);
  require_exists(pipeline.novel_dataset, "novel dataset");
  require_exists(pipeline.base_dataset, "base dataset");
  require_exists(pipeline.split_manifest, "split manifest");

  Dataset novel = load_dataset(pipeline.novel_dataset, /*load_pixels=*/true);
  Dataset base = load_dataset(pipeline.base_dataset, /*load_pixels=*/true);
  const SplitManifest manifest = load_split_manifest(pipeline.split_manifest);

  const GridOutcome outcome = run_experiment_grid(pipeline.grid, novel, base, manifest,
                                                  pipeline.artifact_root);
  std::size_t failed = 0;
  for (const GridRunRecord& record : outcome.runs) {
    if (record.status.starts_with("failed:")) {
      ++failed;
      std::cout << "warning: run " << record.artifact_dir.filename().string() << " "
                << record.status << "\n";
    }
  }
  std::cout << render_results_table(outcome.results);
  std::printf("%zu runs (%zu failed); artifacts under %s\n", outcome.runs.size(),
              failed, pipeline.artifact_root.string().c_str());
  if (failed == outcome.runs.size() && !outcome.runs.empty()) {
    throw PipelineError("every grid run failed");
  }
  return 0;
}

int cmd_evaluate(const fs::path& dataset_path, const fs::path& manifest_path,
                 const std::string& split_name_str, const fs::path& detections_path,
                 const fs::path& run_dir, const std::string& novel_label,
                 double iou_threshold, double confidence, const fs::path& out,
                 int resize_target) {
  require_exists(dataset_path, "dataset");
  require_exists(manifest_path, "split manifest");
  const Dataset dataset = load_dataset(dataset_path, /*load_pixels=*/!run_dir.empty());
  const SplitManifest manifest = load_split_manifest(manifest_path);
  const DatasetSplit* split = manifest.find(split_name_from_string(split_name_str));
  if (!split) throw DataError("split manifest lacks " + split_name_str);

  std::vector<AnnotatedImage> split_images;
  std::vector<const AnnotatedImage*> split_pointers;
  for (const std::string& id : split->image_ids) {
    const AnnotatedImage* image = dataset.find_image(id);
    if (!image) throw DataError("split references unknown image '" + id + "'");
    split_images.push_back(*image);
    split_pointers.push_back(image);
  }

  std::string label = novel_label;
  std::vector<Detection> detections;
  if (!run_dir.empty()) {
    require_exists(run_dir / "checkpoint.json", "run checkpoint");
    const Checkpoint checkpoint = load_checkpoint(run_dir / "checkpoint.json");
    const auto model = backend_from_checkpoint(checkpoint);
    detections = run_inference(*model, checkpoint.class_vocabulary, split_pointers,
                               resize_target);
    save_detections_jsonl(detections, run_dir / "detections.jsonl");
    if (label.empty()) label = checkpoint.class_vocabulary.at(0);
  } else {
    require_exists(detections_path, "detections file");
    detections = load_detections_jsonl(detections_path);
    if (label.empty()) {
      throw UsageError("--novel-class is required when evaluating a detections file");
    }
  }

  const EvaluationReport report =
      evaluate_detections(detections, split_images, label, iou_threshold, confidence);
  std::printf("AP@%.2f = %.4f  (%zu detections, %zu ground truth)\n", iou_threshold,
              report.ap, report.detections, report.total_ground_truth);
  std::printf("operating point @ confidence %.2f: precision %.3f recall %.3f "
              "(tp %zu fp %zu fn %zu)\n",
              confidence, report.operating_point.precision,
              report.operating_point.recall, report.operating_point.true_positives,
              report.operating_point.false_positives,
              report.operating_point.false_negatives);
  if (!out.empty()) {
    std::ofstream f(out);
    if (!f) throw PipelineError("cannot write report: " + out.string());
    f << nlohmann::json{{"ap", report.ap},
                        {"iou_threshold", iou_threshold},
                        {"class_label", label},
                        {"total_ground_truth", report.total_ground_truth},
                        {"detections", report.detections},
                        {"operating_point",
                         {{"confidence_threshold", confidence},
                          {"precision", report.operating_point.precision},
                          {"recall", report.operating_point.recall},
                          {"true_positives", report.operating_point.true_positives},
                          {"false_positives", report.operating_point.false_positives},
                          {"false_negatives", report.operating_point.false_negatives}}}}
             .dump(1)
      << "\n";
    std::cout << "wrote " << out.string() << "\n";
  }
  return 0;
}

int cmd_report(const fs::path& results_path, const fs::path& out_csv,
               const fs::path& out_json) {
  require_exists(results_path, "results file");
  const std::vector<EvalResult> results = load_results_json(results_path);
  std::cout << render_results_table(results);
  if (!out_csv.empty()) {
    save_results_csv(results, out_csv);
    std::cout << "wrote " << out_csv.string() << "\n";
  }
  if (!out_json.empty()) {
    save_results_json(results, out_json);
    std::cout << "wrote " << out_json.string() << "\n";
  }
  return 0;
}

int cmd_augment_preview(const fs::path& novel_path, const fs::path& base_path,
                        const fs::path& out, int count, std::uint64_t seed,
                        const std::string& novel_mask, const std::string& base_mask,
                        double apply_probability, const std::string& novel_label) {
  require_exists(novel_path, "novel dataset");
  Dataset novel = load_dataset(novel_path, /*load_pixels=*/true);

  AugmentationConfig config;
  config.novel_mask_mode = novel_mask_mode_from_string(novel_mask);
  config.base_mask_mode = base_mask_mode_from_string(base_mask);
  config.copy_paste_enabled = config.novel_mask_mode != NovelMaskMode::none ||
                              config.base_mask_mode != BaseMaskMode::none;
  config.apply_probability = apply_probability;

  Dataset base;
  std::vector<const AnnotatedImage*> base_pool;
  if (config.copy_paste_enabled) {
    require_exists(base_path, "base dataset");
    base = load_dataset(base_path, /*load_pixels=*/true);
    for (const auto& image : base.images) base_pool.push_back(&image);
  }
  std::vector<const AnnotatedImage*> novel_pool;
  for (const auto& image : novel.images) novel_pool.push_back(&image);

  std::string label = novel_label;
  if (label.empty() && !novel.class_vocabulary.empty()) {
    label = novel.class_vocabulary.front().label;
  }

  fs::create_directories(out);
  for (int i = 0; i < count; ++i) {
    const AugmentedSample sample = make_training_sample(
        novel_pool, base_pool, config, label, derive_seed(seed, i));
    char name[32];
    std::snprintf(name, sizeof(name), "sample_%04d", i);
    write_preview(sample, out / name);
  }
  std::cout << "wrote " << count << " previews under " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pointdet: few-shot detector training from point annotations"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic shape dataset");
  fs::path synth_out;
  int synth_novel = 120, synth_base = 30;
  std::uint64_t synth_seed = 7;
  std::string synth_label;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--novel-images", synth_novel, "novel image count");
  synth->add_option("--base-images", synth_base, "base image count");
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--novel-label", synth_label, "novel class label");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "ingest a point-annotation CSV");
  fs::path ingest_csv, ingest_root, ingest_out, ingest_rejects;
  ingest->add_option("--csv", ingest_csv, "point CSV export")->required();
  ingest->add_option("--images-root", ingest_root, "directory pixel paths resolve against");
  ingest->add_option("--out", ingest_out, "dataset JSON output")->required();
  ingest->add_option("--rejects", ingest_rejects, "rejects report path");

  // segment
  auto* segment = app.add_subcommand("segment", "derive boundaries from points");
  fs::path segment_dataset_path, segment_out;
  std::string segment_name = "reference", segment_classes;
  segment->add_option("--dataset", segment_dataset_path, "dataset JSON")->required();
  segment->add_option("--out", segment_out, "output dataset JSON")->required();
  segment->add_option("--segmenter", segment_name, "segmenter adapter (reference)");
  segment->add_option("--classes", segment_classes, "comma-separated class filter");

  // correct
  auto* correct = app.add_subcommand("correct", "apply manual boundary corrections");
  fs::path correct_dataset, correct_file, correct_out;
  correct->add_option("--dataset", correct_dataset, "dataset JSON")->required();
  correct->add_option("--corrections", correct_file, "corrections JSON")->required();
  correct->add_option("--out", correct_out, "output dataset JSON")->required();

  // validate
  auto* validate = app.add_subcommand("validate", "check dataset invariants");
  fs::path validate_dataset_path;
  bool validate_strict = false;
  validate->add_option("--dataset", validate_dataset_path, "dataset JSON")->required();
  validate->add_flag("--strict", validate_strict, "exit nonzero on violations");

  // split
  auto* split = app.add_subcommand("split", "build test/validation/train splits");
  fs::path split_dataset, split_out;
  std::size_t split_n_test = 42, split_n_validation = 42;
  std::vector<std::size_t> split_sizes{50, 100, 200};
  std::uint64_t split_seed = 1;
  split->add_option("--dataset", split_dataset, "dataset JSON")->required();
  split->add_option("--n-test", split_n_test, "test set size (most recent images)");
  split->add_option("--sizes", split_sizes, "training subset sizes")->delimiter(',');
  split->add_option("--n-validation", split_n_validation, "validation set size");
  split->add_option("--seed", split_seed, "sampling seed");
  split->add_option("--out", split_out, "split manifest output")->required();

  // pretrain
  auto* pretrain_cmd = app.add_subcommand("pretrain", "pre-train on the base classes");
  fs::path pretrain_config;
  std::string pretrain_backend;
  std::optional<std::uint64_t> pretrain_seed;
  fs::path pretrain_root;
  pretrain_cmd->add_option("--config", pretrain_config, "pipeline config JSON")->required();
  pretrain_cmd->add_option("--backend", pretrain_backend, "detector backend");
  pretrain_cmd->add_option("--seed", pretrain_seed, "run seed");
  pretrain_cmd->add_option("--artifact-root", pretrain_root, "artifact directory");

  // finetune
  auto* finetune_cmd = app.add_subcommand("finetune", "fine-tune on the novel class");
  fs::path finetune_config;
  std::string finetune_backend, finetune_source = "auto";
  std::optional<std::uint64_t> finetune_seed;
  std::optional<std::size_t> finetune_size;
  std::size_t finetune_row = 0;
  finetune_cmd->add_option("--config", finetune_config, "pipeline config JSON")->required();
  finetune_cmd->add_option("--backend", finetune_backend, "detector backend");
  finetune_cmd->add_option("--seed", finetune_seed, "run seed");
  finetune_cmd->add_option("--row", finetune_row, "grid row index");
  finetune_cmd->add_option("--size", finetune_size, "training sample size");
  finetune_cmd->add_option("--pretrain-checkpoint", finetune_source,
                           "auto | none | path to checkpoint");
  fs::path finetune_root;
  finetune_cmd->add_option("--artifact-root", finetune_root, "artifact directory");

  // grid
  auto* grid_cmd = app.add_subcommand("grid", "run the full ablation grid");
  fs::path grid_config, grid_root;
  grid_cmd->add_option("--config", grid_config, "pipeline config JSON")->required();
  grid_cmd->add_option("--artifact-root", grid_root, "artifact directory");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "score detections at AP@IoU");
  fs::path eval_dataset, eval_manifest, eval_detections, eval_run, eval_out;
  std::string eval_split = "test", eval_label;
  double eval_iou = 0.5, eval_confidence = 0.5;
  int eval_resize = 96;
  evaluate->add_option("--dataset", eval_dataset, "dataset JSON")->required();
  evaluate->add_option("--split-manifest", eval_manifest, "split manifest")->required();
  evaluate->add_option("--split", eval_split, "split name (default test)");
  evaluate->add_option("--detections", eval_detections, "detections JSONL");
  evaluate->add_option("--run", eval_run, "run artifact dir (runs inference)");
  evaluate->add_option("--novel-class", eval_label, "class label to evaluate");
  evaluate->add_option("--iou", eval_iou, "IoU threshold");
  evaluate->add_option("--confidence", eval_confidence, "operating point threshold");
  evaluate->add_option("--resize", eval_resize, "inference shorter-side resize");
  evaluate->add_option("--out", eval_out, "JSON report output");

  // report
  auto* report = app.add_subcommand("report", "render a results table");
  fs::path report_results, report_csv, report_json;
  report->add_option("--results", report_results, "results.json")->required();
  report->add_option("--out-csv", report_csv, "CSV export");
  report->add_option("--out-json", report_json, "JSON re-export");

  // augment-preview
  auto* preview = app.add_subcommand("augment-preview", "write augmented sample previews");
  fs::path preview_novel, preview_base, preview_out;
  int preview_count = 8;
  std::uint64_t preview_seed = 0;
  std::string preview_novel_mask = "none", preview_base_mask = "segmentation";
  std::string preview_label;
  double preview_apply = 1.0;
  preview->add_option("--novel", preview_novel, "novel dataset JSON")->required();
  preview->add_option("--base", preview_base, "base dataset JSON");
  preview->add_option("--out", preview_out, "output directory")->required();
  preview->add_option("--count", preview_count, "sample count");
  preview->add_option("--seed", preview_seed, "master seed");
  preview->add_option("--novel-mask", preview_novel_mask, "none|bounding_box|segmentation");
  preview->add_option("--base-mask", preview_base_mask, "none|segmentation");
  preview->add_option("--apply-probability", preview_apply, "copy-paste probability");
  preview->add_option("--novel-class", preview_label, "novel class label");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed()) {
      return cmd_synth(synth_out, synth_novel, synth_base, synth_seed, synth_label);
    }
    if (ingest->parsed()) {
      return cmd_ingest(ingest_csv, ingest_root, ingest_out, ingest_rejects);
    }
    if (segment->parsed()) {
      return cmd_segment(segment_dataset_path, segment_out, segment_name,
                         segment_classes);
    }
    if (correct->parsed()) {
      return cmd_correct(correct_dataset, correct_file, correct_out);
    }
    if (validate->parsed()) {
      return cmd_validate(validate_dataset_path, validate_strict);
    }
    if (split->parsed()) {
      return cmd_split(split_dataset, split_n_test, split_sizes, split_n_validation,
                       split_seed, split_out);
    }
    if (pretrain_cmd->parsed()) {
      return cmd_pretrain(pretrain_config, pretrain_root, pretrain_backend,
                          pretrain_seed);
    }
    if (finetune_cmd->parsed()) {
      return cmd_finetune(finetune_config, finetune_root, finetune_backend,
                          finetune_seed, finetune_row, finetune_size,
                          finetune_source);
    }
    if (grid_cmd->parsed()) {
      return cmd_grid(grid_config, grid_root);
    }
    if (evaluate->parsed()) {
      return cmd_evaluate(eval_dataset, eval_manifest, eval_split, eval_detections,
                          eval_run, eval_label, eval_iou, eval_confidence, eval_out,
                          eval_resize);
    }
    if (report->parsed()) {
      return cmd_report(report_results, report_csv, report_json);
    }
    if (preview->parsed()) {
      return cmd_augment_preview(preview_novel, preview_base, preview_out,
                                 preview_count, preview_seed, preview_novel_mask,
                                 preview_base_mask, preview_apply, preview_label);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
