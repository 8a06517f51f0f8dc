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
#include "pointdet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "pointdet/hash.hpp"

namespace pointdet {

std::string to_string(TrainMode mode) {
  return mode == TrainMode::pretrain ? "pretrain" : "finetune";
}

void TrainRunConfig::validate(int backend_stages) const {
  schedule.validate();
  augmentation.validate();
  if (resize_shorter_side < 8) {
    throw UsageError("resize_shorter_side must be at least 8 pixels");
  }
  if (mode == TrainMode::pretrain) {
    if (!frozen_stages.empty()) {
      throw UsageError("pretrain updates every stage; frozen_stages must be empty");
    }
    if (augmentation.copy_paste_enabled) {
      throw UsageError("copy-paste augmentation applies to fine-tuning only");
    }
  } else {
    if (novel_class_label.empty()) {
      throw UsageError("finetune requires novel_class_label");
    }
    for (int stage : frozen_stages) {
      if (stage < 1 || stage > backend_stages) {
        throw UsageError("frozen stage " + std::to_string(stage) +
                         " outside backbone range 1.." + std::to_string(backend_stages));
      }
    }
  }
}

nlohmann::json TrainRunConfig::to_json() const {
  return nlohmann::json{
      {"mode", to_string(mode)},
      {"backend", backend},
      {"schedule",
       {{"base_lr", schedule.base_lr},
        {"total_iterations", schedule.total_iterations},
        {"warmup_iterations", schedule.warmup_iterations},
        {"decay_milestones", schedule.decay_milestones},
        {"decay_factor", schedule.decay_factor},
        {"warmup_start_factor", schedule.warmup_start_factor},
        {"momentum", schedule.momentum},
        {"weight_decay", schedule.weight_decay},
        {"batch_size", schedule.batch_size},
        {"max_grad_norm", schedule.max_grad_norm}}},
      {"frozen_stages", frozen_stages},
      {"augmentation", augmentation_config_to_json(augmentation)},
      {"resize_shorter_side", resize_shorter_side},
      {"seed", seed},
      {"novel_class_label", novel_class_label}};
}

TrainRunConfig TrainRunConfig::from_json(const nlohmann::json& j) {
  TrainRunConfig config;
  const std::string mode = j.value("mode", std::string("pretrain"));
  if (mode == "pretrain") {
    config.mode = TrainMode::pretrain;
  } else if (mode == "finetune") {
    config.mode = TrainMode::finetune;
  } else {
    throw UsageError("unknown training mode: '" + mode + "'");
  }
  config.backend = j.value("backend", std::string("toy"));
  if (j.contains("schedule")) {
    const auto& s = j.at("schedule");
    config.schedule.base_lr = s.value("base_lr", config.schedule.base_lr);
    config.schedule.total_iterations =
        s.value("total_iterations", config.schedule.total_iterations);
    config.schedule.warmup_iterations =
        s.value("warmup_iterations", config.schedule.warmup_iterations);
    config.schedule.decay_milestones =
        s.value("decay_milestones", config.schedule.decay_milestones);
    config.schedule.decay_factor = s.value("decay_factor", config.schedule.decay_factor);
    config.schedule.warmup_start_factor =
        s.value("warmup_start_factor", config.schedule.warmup_start_factor);
    config.schedule.momentum = s.value("momentum", config.schedule.momentum);
    config.schedule.weight_decay = s.value("weight_decay", config.schedule.weight_decay);
    config.schedule.batch_size = s.value("batch_size", config.schedule.batch_size);
    config.schedule.max_grad_norm = s.value("max_grad_norm", config.schedule.max_grad_norm);
  }
  config.frozen_stages = j.value("frozen_stages", std::vector<int>{});
  if (j.contains("augmentation")) {
    config.augmentation = augmentation_config_from_json(j.at("augmentation"));
  }
  config.resize_shorter_side = j.value("resize_shorter_side", 96);
  config.seed = j.value("seed", std::uint64_t{0});
  config.novel_class_label = j.value("novel_class_label", std::string());
  return config;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  const nlohmann::json doc{{"format_version", 1},
                           {"backend", checkpoint.backend_name},
                           {"backend_version", checkpoint.backend_version},
                           {"class_vocabulary", checkpoint.class_vocabulary},
                           {"stage_tags", checkpoint.stage_tags},
                           {"completed_iterations", checkpoint.completed_iterations},
                           {"rng_state", checkpoint.rng_state},
                           {"state", checkpoint.state}};
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint: " + path.string());
  out << doc.dump() << "\n";
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint is not valid JSON: " + std::string(e.what()));
  }
  if (doc.at("format_version").get<int>() != 1) {
    throw DataError("unsupported checkpoint format version in " + path.string());
  }
  Checkpoint checkpoint;
  checkpoint.backend_name = doc.at("backend").get<std::string>();
  checkpoint.backend_version = doc.at("backend_version").get<std::string>();
  checkpoint.class_vocabulary =
      doc.at("class_vocabulary").get<std::vector<std::string>>();
  checkpoint.stage_tags = doc.at("stage_tags").get<std::map<std::string, int>>();
  checkpoint.completed_iterations = doc.at("completed_iterations").get<std::int64_t>();
  checkpoint.rng_state = doc.at("rng_state").get<std::string>();
  checkpoint.state = doc.at("state");
  return checkpoint;
}

std::unique_ptr<DetectorBackend> backend_from_checkpoint(const Checkpoint& checkpoint) {
  auto backend = make_backend(checkpoint.backend_name,
                              static_cast<int>(checkpoint.class_vocabulary.size()), 0);
  backend->load_state(checkpoint.state);
  // Stage tags are part of the contract; a drifting backend is a hard error.
  for (const ParameterGroupInfo& info : backend->parameter_groups()) {
    const auto it = checkpoint.stage_tags.find(info.name);
    if (it == checkpoint.stage_tags.end() || it->second != info.stage) {
      throw DataError("checkpoint stage tags do not match backend '" +
                      checkpoint.backend_name + "' (group " + info.name + ")");
    }
  }
  return backend;
}

AnnotatedImage resize_shorter_side(const AnnotatedImage& image, int target) {
  if (target < 1) throw UsageError("resize target must be positive");
  if (!image.has_pixels()) {
    throw PipelineError("resize_shorter_side: image '" + image.image_id +
                        "' has no pixels loaded");
  }
  const int w = image.width;
  const int h = image.height;
  const int shorter = std::min(w, h);
  if (shorter == target) return image;

  const double scale = static_cast<double>(target) / shorter;
  const int new_w = w <= h ? target
                           : static_cast<int>(std::lround(w * scale));
  const int new_h = w <= h ? static_cast<int>(std::lround(h * scale)) : target;
  const double fx = static_cast<double>(new_w) / w;
  const double fy = static_cast<double>(new_h) / h;

  AnnotatedImage out = image;
  out.width = new_w;
  out.height = new_h;
  out.pixels = ImageBuffer(new_w, new_h);
  for (int y = 0; y < new_h; ++y) {
    const int sy = std::clamp(static_cast<int>((y + 0.5) * h / new_h), 0, h - 1);
    for (int x = 0; x < new_w; ++x) {
      const int sx = std::clamp(static_cast<int>((x + 0.5) * w / new_w), 0, w - 1);
      out.pixels.set_rgb(x, y, image.pixels.at(sx, sy, 0), image.pixels.at(sx, sy, 1),
                         image.pixels.at(sx, sy, 2));
    }
  }
  for (InstanceAnnotation& ann : out.annotations) {
    ann.point.x *= fx;
    ann.point.y *= fy;
    if (ann.bbox) {
      ann.bbox->x_min *= fx;
      ann.bbox->x_max *= fx;
      ann.bbox->y_min *= fy;
      ann.bbox->y_max *= fy;
    }
    if (ann.boundary) {
      for (Point& p : ann.boundary->vertices) {
        p.x *= fx;
        p.y *= fy;
      }
    }
  }
  return out;
}

namespace {

// SGD with momentum and classic coupled weight decay, the way detector
// reference implementations do it: v = m*v + g + wd*w; w -= lr * v.
// Gradients are clipped jointly by global norm; frozen groups are skipped
// entirely.
class SgdOptimizer {
 public:
  SgdOptimizer(double momentum, double weight_decay, double max_grad_norm,
               std::set<int> frozen_stages)
      : momentum_(momentum), weight_decay_(weight_decay),
        max_grad_norm_(max_grad_norm), frozen_stages_(std::move(frozen_stages)) {}

  void step(DetectorBackend& backend, double lr, int batch_size) {
    double clip_scale = 1.0;
    if (max_grad_norm_ > 0.0) {
      double sq_norm = 0.0;
      for (const ParameterGroupInfo& info : backend.parameter_groups()) {
        if (info.stage > 0 && frozen_stages_.count(info.stage)) continue;
        for (double g : backend.group_gradients(info.name)) {
          const double scaled = g / batch_size;
          sq_norm += scaled * scaled;
        }
      }
      const double norm = std::sqrt(sq_norm);
      if (norm > max_grad_norm_) clip_scale = max_grad_norm_ / norm;
    }

    for (const ParameterGroupInfo& info : backend.parameter_groups()) {
      if (info.stage > 0 && frozen_stages_.count(info.stage)) continue;
      std::span<double> params = backend.group_parameters(info.name);
      std::span<const double> grads = backend.group_gradients(info.name);
      std::vector<double>& velocity = velocities_[info.name];
      if (velocity.size() != params.size()) velocity.assign(params.size(), 0.0);
      for (std::size_t i = 0; i < params.size(); ++i) {
        const double g =
            clip_scale * grads[i] / batch_size + weight_decay_ * params[i];
        velocity[i] = momentum_ * velocity[i] + g;
        params[i] -= lr * velocity[i];
      }
    }
  }

 private:
  double momentum_;
  double weight_decay_;
  double max_grad_norm_;
  std::set<int> frozen_stages_;
  std::map<std::string, std::vector<double>> velocities_;
};

std::vector<GroundTruthBox> targets_from_annotations(
    const std::vector<InstanceAnnotation>& annotations,
    const std::map<std::string, int>& vocabulary) {
  std::vector<GroundTruthBox> targets;
  for (const InstanceAnnotation& ann : annotations) {
    if (!ann.bbox || !ann.bbox->valid()) continue;
    const auto it = vocabulary.find(ann.class_label);
    if (it == vocabulary.end()) continue;  // off-vocabulary instances are background
    targets.push_back({*ann.bbox, it->second});
  }
  return targets;
}

Checkpoint checkpoint_from_backend(const DetectorBackend& backend,
                                   const std::vector<std::string>& vocabulary,
                                   std::int64_t completed_iterations,
                                   std::uint64_t seed) {
  Checkpoint checkpoint;
  checkpoint.backend_name = backend.name();
  checkpoint.backend_version = backend.version();
  checkpoint.class_vocabulary = vocabulary;
  for (const ParameterGroupInfo& info : backend.parameter_groups()) {
    checkpoint.stage_tags[info.name] = info.stage;
  }
  checkpoint.state = backend.serialize_state();
  checkpoint.completed_iterations = completed_iterations;
  std::ostringstream rng_state;
  rng_state << Rng(derive_seed(seed, static_cast<std::uint64_t>(completed_iterations)))
                   .engine();
  checkpoint.rng_state = rng_state.str();
  return checkpoint;
}

bool all_finite(const DetectorBackend& backend) {
  for (const ParameterGroupInfo& info : backend.parameter_groups()) {
    for (double v : backend.group_parameters(info.name)) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

struct ParamSnapshot {
  std::map<std::string, std::vector<double>> groups;

  static ParamSnapshot take(const DetectorBackend& backend) {
    ParamSnapshot snapshot;
    for (const ParameterGroupInfo& info : backend.parameter_groups()) {
      const auto view = backend.group_parameters(info.name);
      snapshot.groups[info.name].assign(view.begin(), view.end());
    }
    return snapshot;
  }

  void restore(DetectorBackend& backend) const {
    for (const auto& [name, values] : groups) {
      std::span<double> params = backend.group_parameters(name);
      std::copy(values.begin(), values.end(), params.begin());
    }
  }
};

// The shared iteration loop. sample_fn(iteration) produces the training
// sample; vocabulary maps labels to head class indices.
RunLog run_training_loop(DetectorBackend& backend, const TrainRunConfig& config,
                         const std::map<std::string, int>& vocabulary,
                         const std::function<AugmentedSample(std::int64_t)>& sample_fn,
                         const std::optional<std::filesystem::path>& artifact_dir) {
  RunLog log;
  SgdOptimizer optimizer(config.schedule.momentum, config.schedule.weight_decay,
                         config.schedule.max_grad_norm,
                         std::set<int>(config.frozen_stages.begin(),
                                       config.frozen_stages.end()));

  std::ofstream provenance_out;
  if (artifact_dir) {
    provenance_out.open(*artifact_dir / "provenance.jsonl");
    if (!provenance_out) {
      throw PipelineError("cannot write provenance log under " +
                          artifact_dir->string());
    }
  }

  for (std::int64_t iteration = 0; iteration < config.schedule.total_iterations;
       ++iteration) {
    const double lr = lr_at(config.schedule, iteration);
    backend.zero_gradients();

    double loss_sum = 0.0;
    for (int b = 0; b < config.schedule.batch_size; ++b) {
      const std::int64_t sample_index = iteration * config.schedule.batch_size + b;
      const AugmentedSample sample = sample_fn(sample_index);
      const std::uint64_t digest = sample_digest(sample);
      log.sample_digests.push_back(digest);
      if (provenance_out) {
        provenance_out << nlohmann::json{{"iteration", iteration},
                                         {"sample_index", sample_index},
                                         {"seed", sample.provenance.seed},
                                         {"novel_image_id", sample.provenance.novel_image_id},
                                         {"digest", hex64(digest)}}
                              .dump()
                       << "\n";
      }
      loss_sum += backend.forward_backward(
          sample.pixels, targets_from_annotations(sample.annotations, vocabulary));
    }
    const double loss = loss_sum / config.schedule.batch_size;

    if (!std::isfinite(loss)) {
      // Keep the last finite state; do not apply this step.
      log.aborted_non_finite = true;
      break;
    }

    const ParamSnapshot snapshot = ParamSnapshot::take(backend);
    optimizer.step(backend, lr, config.schedule.batch_size);
    if (!all_finite(backend)) {
      snapshot.restore(backend);
      log.aborted_non_finite = true;
      break;
    }

    log.loss_trace.push_back(loss);
    log.lr_trace.push_back(lr);
    log.completed_iterations = iteration + 1;
  }
  return log;
}

void write_artifacts(const std::optional<std::filesystem::path>& artifact_dir,
                     const TrainRunConfig& config, const TrainResult& result) {
  if (!artifact_dir) return;
  {
    std::ofstream out(*artifact_dir / "config.json");
    if (!out) throw PipelineError("cannot write config under " + artifact_dir->string());
    out << config.to_json().dump(1) << "\n";
  }
  write_trace_csv(result.log, *artifact_dir / "trace.csv");
  save_checkpoint(result.checkpoint, *artifact_dir / "checkpoint.json");
}

std::vector<AnnotatedImage> resized_pool(const std::vector<const AnnotatedImage*>& images,
                                         int target) {
  std::vector<AnnotatedImage> out;
  out.reserve(images.size());
  for (const AnnotatedImage* image : images) {
    out.push_back(resize_shorter_side(*image, target));
  }
  return out;
}

std::vector<const AnnotatedImage*> pointers_to(const std::vector<AnnotatedImage>& images) {
  std::vector<const AnnotatedImage*> out;
  out.reserve(images.size());
  for (const AnnotatedImage& image : images) out.push_back(&image);
  return out;
}

}  // namespace

TrainResult pretrain(DetectorBackend& backend, const Dataset& base_dataset,
                     const TrainRunConfig& config,
                     const std::optional<std::filesystem::path>& artifact_dir) {
  if (config.mode != TrainMode::pretrain) {
    throw UsageError("pretrain called with a finetune configuration");
  }
  config.validate(backend.num_stages());

  std::size_t usable_boxes = 0;
  for (const AnnotatedImage& image : base_dataset.images) {
    for (const InstanceAnnotation& ann : image.annotations) {
      if (ann.bbox && ann.bbox->valid()) ++usable_boxes;
    }
  }
  if (usable_boxes == 0) {
    throw DataError("pretrain: base dataset has no usable bounding boxes; run "
                    "segmentation first");
  }

  const std::vector<std::string> vocabulary = base_dataset.class_labels();
  if (static_cast<int>(vocabulary.size()) != backend.num_classes()) {
    throw UsageError("backend was built for " + std::to_string(backend.num_classes()) +
                     " classes but the base dataset has " +
                     std::to_string(vocabulary.size()));
  }
  std::map<std::string, int> vocab_index;
  for (std::size_t i = 0; i < vocabulary.size(); ++i) {
    vocab_index[vocabulary[i]] = static_cast<int>(i);
  }

  std::vector<const AnnotatedImage*> source;
  for (const AnnotatedImage& image : base_dataset.images) source.push_back(&image);
  const std::vector<AnnotatedImage> pool =
      resized_pool(source, config.resize_shorter_side);
  const std::vector<const AnnotatedImage*> pool_ptrs = pointers_to(pool);

  // Pre-training augmentation: flips only.
  AugmentationConfig flips_only;
  flips_only.flip_probability = config.augmentation.flip_probability;

  TrainResult result;
  result.log = run_training_loop(
      backend, config, vocab_index,
      [&](std::int64_t index) {
        return make_training_sample(pool_ptrs, {}, flips_only, "",
                                    derive_seed(config.seed, index));
      },
      artifact_dir);
  result.checkpoint = checkpoint_from_backend(backend, vocabulary,
                                              result.log.completed_iterations,
                                              config.seed);
  write_artifacts(artifact_dir, config, result);
  if (result.log.aborted_non_finite) {
    throw PipelineError("pretrain aborted: non-finite loss at iteration " +
                        std::to_string(result.log.completed_iterations) +
                        (artifact_dir ? "; last finite checkpoint written" : ""));
  }
  return result;
}

TrainResult finetune(const std::optional<Checkpoint>& source,
                     const Dataset& novel_dataset,
                     const std::vector<std::string>& train_image_ids,
                     const Dataset* base_dataset, const TrainRunConfig& config,
                     const std::optional<std::filesystem::path>& artifact_dir) {
  if (config.mode != TrainMode::finetune) {
    throw UsageError("finetune called with a pretrain configuration");
  }
  if (config.augmentation.copy_paste_enabled && base_dataset == nullptr) {
    throw UsageError("copy-paste augmentation requires a base dataset");
  }

  std::unique_ptr<DetectorBackend> backend;
  if (source) {
    if (source->backend_name != config.backend) {
      throw UsageError("checkpoint backend '" + source->backend_name +
                       "' does not match configured backend '" + config.backend + "'");
    }
    backend = backend_from_checkpoint(*source);
  } else {
    // No pre-training: a freshly initialized backend (single-class head).
    backend = make_backend(config.backend, 1, derive_seed(config.seed, 0xF0));
  }
  config.validate(backend->num_stages());

  // Head replacement: the new head detects exactly the novel class.
  backend->replace_head(1, derive_seed(config.seed, 0xF1));
  const std::vector<std::string> vocabulary{config.novel_class_label};
  const std::map<std::string, int> vocab_index{{config.novel_class_label, 0}};

  std::vector<const AnnotatedImage*> novel_source;
  for (const std::string& id : train_image_ids) {
    const AnnotatedImage* image = novel_dataset.find_image(id);
    if (!image) {
      throw DataError("training split references unknown image '" + id + "'");
    }
    novel_source.push_back(image);
  }
  if (novel_source.empty()) throw UsageError("finetune: empty training split");

  std::size_t usable_novel = 0;
  for (const AnnotatedImage* image : novel_source) {
    for (const InstanceAnnotation& ann : image->annotations) {
      if (ann.class_label == config.novel_class_label && ann.bbox) ++usable_novel;
    }
  }
  if (usable_novel == 0) {
    throw DataError("finetune: no usable novel-class boxes in the training split");
  }

  const std::vector<AnnotatedImage> novel_pool =
      resized_pool(novel_source, config.resize_shorter_side);
  const std::vector<const AnnotatedImage*> novel_ptrs = pointers_to(novel_pool);

  std::vector<AnnotatedImage> base_pool;
  std::vector<const AnnotatedImage*> base_ptrs;
  if (base_dataset) {
    std::vector<const AnnotatedImage*> base_source;
    for (const AnnotatedImage& image : base_dataset->images) {
      base_source.push_back(&image);
    }
    base_pool = resized_pool(base_source, config.resize_shorter_side);
    base_ptrs = pointers_to(base_pool);
  }

  TrainResult result;
  result.log = run_training_loop(
      *backend, config, vocab_index,
      [&](std::int64_t index) {
        return make_training_sample(novel_ptrs, base_ptrs, config.augmentation,
                                    config.novel_class_label,
                                    derive_seed(config.seed, index));
      },
      artifact_dir);
  result.checkpoint = checkpoint_from_backend(*backend, vocabulary,
                                              result.log.completed_iterations,
                                              config.seed);
  write_artifacts(artifact_dir, config, result);
  if (result.log.aborted_non_finite) {
    throw PipelineError("finetune aborted: non-finite loss at iteration " +
                        std::to_string(result.log.completed_iterations) +
                        (artifact_dir ? "; last finite checkpoint written" : ""));
  }
  return result;
}

std::vector<Detection> run_inference(const DetectorBackend& backend,
                                     const std::vector<std::string>& class_vocabulary,
                                     const std::vector<const AnnotatedImage*>& images,
                                     int resize_target) {
  if (static_cast<int>(class_vocabulary.size()) != backend.num_classes()) {
    throw UsageError("vocabulary size does not match backend class count");
  }
  std::vector<Detection> detections;
  for (const AnnotatedImage* image : images) {
    const AnnotatedImage resized = resize_shorter_side(*image, resize_target);
    const double fx = static_cast<double>(resized.width) / image->width;
    const double fy = static_cast<double>(resized.height) / image->height;
    for (const RawDetection& raw : backend.detect(resized.pixels)) {
      Detection det;
      det.image_id = image->image_id;
      det.class_label = class_vocabulary[raw.class_index];
      det.bbox = BoundingBox{raw.bbox.x_min / fx, raw.bbox.y_min / fy,
                             raw.bbox.x_max / fx, raw.bbox.y_max / fy};
      det.confidence = raw.confidence;
      detections.push_back(std::move(det));
    }
  }
  return detections;
}

void write_trace_csv(const RunLog& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw PipelineError("cannot write trace: " + path.string());
  out << "iteration,loss,lr\n";
  char buf[64];
  for (std::size_t i = 0; i < log.loss_trace.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g", i, log.loss_trace[i],
                  log.lr_trace[i]);
    out << buf << "\n";
  }
}

}  // namespace pointdet
