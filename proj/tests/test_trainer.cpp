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
#include <filesystem>
#include <numeric>

#include "pointdet/dataset.hpp"
#include "pointdet/segmenter.hpp"
#include "pointdet/synth.hpp"
#include "pointdet/trainer.hpp"

using namespace pointdet;
namespace fs = std::filesystem;

namespace {

// Shared synthetic world: generated once, segmented once.
struct World {
  fs::path dir;
  Dataset novel;
  Dataset base;
  SplitManifest splits;
  std::string novel_label;

  World() {
    dir = fs::temp_directory_path() / "pointdet_trainer_world";
    fs::remove_all(dir);
    SynthConfig config;
    config.novel_images = 80;
    config.base_images = 20;
    config.seed = 99;
    const SynthOutput output = generate_synthetic_dataset(dir, config);
    novel_label = config.novel_label;

    novel = ingest_point_csv(output.novel_csv).dataset;
    base = ingest_point_csv(output.base_csv).dataset;
    novel.load_pixels();
    base.load_pixels();
    ReferenceSegmenter segmenter;
    segment_dataset(segmenter, novel.images, {});
    segment_dataset(segmenter, base.images, {});
    splits = make_splits(novel, 10, {50}, 10, 5);
  }
};

const World& world() {
  static World instance;
  return instance;
}

TrainRunConfig small_pretrain_config() {
  TrainRunConfig config;
  config.mode = TrainMode::pretrain;
  config.backend = "toy";
  config.schedule.base_lr = 0.025;
  config.schedule.total_iterations = 100;
  config.schedule.warmup_iterations = 20;
  config.resize_shorter_side = 96;
  config.seed = 31;
  return config;
}

TrainRunConfig small_finetune_config() {
  TrainRunConfig config;
  config.mode = TrainMode::finetune;
  config.backend = "toy";
  config.schedule.base_lr = 0.015;
  config.schedule.total_iterations = 100;
  config.schedule.warmup_iterations = 20;
  config.frozen_stages = {1, 2, 3};
  config.augmentation.copy_paste_enabled = true;
  config.augmentation.novel_mask_mode = NovelMaskMode::none;
  config.augmentation.base_mask_mode = BaseMaskMode::segmentation;
  config.resize_shorter_side = 96;
  config.seed = 32;
  config.novel_class_label = world().novel_label;
  return config;
}

double mean_of(const std::vector<double>& values, std::size_t from, std::size_t count) {
  return std::accumulate(values.begin() + from, values.begin() + from + count, 0.0) /
         count;
}

}  // namespace

TEST_CASE("resize_shorter_side scales pixels and geometry together") {
  AnnotatedImage image;
  image.image_id = "img";
  image.width = 500;
  image.height = 800;
  image.pixels = ImageBuffer(500, 800);
  InstanceAnnotation ann;
  ann.id = "a";
  ann.class_label = "x";
  ann.point = Point{100, 200};
  ann.bbox = BoundingBox{50, 100, 150, 300};
  image.annotations.push_back(ann);

  const AnnotatedImage resized = resize_shorter_side(image, 1000);
  CHECK(resized.width == 1000);
  CHECK(resized.height == 1600);
  CHECK(*resized.annotations[0].bbox == BoundingBox{100, 200, 300, 600});
  CHECK(resized.annotations[0].point == Point{200, 400});
}

TEST_CASE("resize_shorter_side is the identity at the target size") {
  AnnotatedImage image;
  image.image_id = "img";
  image.width = 96;
  image.height = 128;
  image.pixels = ImageBuffer(96, 128);
  const AnnotatedImage resized = resize_shorter_side(image, 96);
  CHECK(resized.width == 96);
  CHECK(resized.height == 128);
  CHECK(resized.pixels == image.pixels);
}

TEST_CASE("polygon area scales by the squared factor under resize") {
  AnnotatedImage image;
  image.image_id = "img";
  image.width = 100;
  image.height = 150;
  image.pixels = ImageBuffer(100, 150);
  InstanceAnnotation ann;
  ann.id = "a";
  ann.class_label = "x";
  ann.point = Point{30, 30};
  ann.boundary = SegmentationBoundary{{{10.5, 20.25}, {60.75, 25.5}, {40.25, 90.0}}};
  ann.bbox = bbox_from_boundary(*ann.boundary);
  image.annotations.push_back(ann);

  const double area_before = polygon_area(*image.annotations[0].boundary);
  const AnnotatedImage resized = resize_shorter_side(image, 200);  // exact x2
  const double area_after = polygon_area(*resized.annotations[0].boundary);
  CHECK(area_after == doctest::Approx(area_before * 4.0).epsilon(1e-6));
}

TEST_CASE("scaled boxes keep their IoU") {
  AnnotatedImage image;
  image.image_id = "img";
  image.width = 200;
  image.height = 300;
  image.pixels = ImageBuffer(200, 300);
  InstanceAnnotation a, b;
  a.id = "a";
  a.class_label = "x";
  a.point = Point{50, 50};
  a.bbox = BoundingBox{20, 30, 120, 130};
  b = a;
  b.id = "b";
  b.bbox = BoundingBox{60, 70, 160, 170};
  image.annotations = {a, b};

  const double before = iou(*a.bbox, *b.bbox);
  const AnnotatedImage resized = resize_shorter_side(image, 100);  // exact /2
  const double after =
      iou(*resized.annotations[0].bbox, *resized.annotations[1].bbox);
  CHECK(std::abs(before - after) < 1e-9);
}

TEST_CASE("toy backend exposes four tagged stages plus head groups") {
  const auto backend = make_backend("toy", 6, 1);
  const auto groups = backend->parameter_groups();
  REQUIRE(groups.size() == 6);
  int stages = 0, heads = 0;
  std::size_t total = 0;
  for (const auto& g : groups) {
    (g.stage > 0 ? stages : heads)++;
    total += g.size;
  }
  CHECK(stages == 4);
  CHECK(heads == 2);
  CHECK(total > 1000);
  CHECK(total < 20000);  // a few thousand parameters
  CHECK_THROWS_AS(make_backend("resnet50", 6, 1), UsageError);
}

TEST_CASE("backend state round-trips through serialization bit-exactly") {
  const World& w = world();
  auto backend = make_backend("toy", 6, 42);
  const nlohmann::json state = backend->serialize_state();

  auto clone = make_backend("toy", 6, 777);  // different init
  clone->load_state(state);

  const AnnotatedImage probe = resize_shorter_side(w.novel.images[0], 96);
  const auto a = backend->detect(probe.pixels);
  const auto b = clone->detect(probe.pixels);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].confidence == b[i].confidence);
    CHECK(a[i].bbox == b[i].bbox);
    CHECK(a[i].class_index == b[i].class_index);
  }
}

TEST_CASE("pretrain drives the loss down on separable synthetic data") {
  const World& w = world();
  auto backend = make_backend("toy", 6, 7);
  const TrainResult result = pretrain(*backend, w.base, small_pretrain_config());
  REQUIRE(result.log.loss_trace.size() == 100);
  const double first = mean_of(result.log.loss_trace, 0, 10);
  const double last = mean_of(result.log.loss_trace, 90, 10);
  CHECK(last < first);
  CHECK(result.checkpoint.class_vocabulary.size() == 6);
}

TEST_CASE("pretrain rejects frozen stages and unusable datasets") {
  const World& w = world();
  auto backend = make_backend("toy", 6, 7);
  TrainRunConfig config = small_pretrain_config();
  config.frozen_stages = {1};
  CHECK_THROWS_AS(pretrain(*backend, w.base, config), UsageError);

  Dataset no_boxes = w.base;
  for (AnnotatedImage& image : no_boxes.images) {
    for (InstanceAnnotation& ann : image.annotations) {
      ann.bbox.reset();
      ann.boundary.reset();
    }
  }
  CHECK_THROWS_AS(pretrain(*backend, no_boxes, small_pretrain_config()), DataError);
}

TEST_CASE("learning-rate trace equals the closed-form schedule pointwise") {
  const World& w = world();
  auto backend = make_backend("toy", 6, 7);
  const TrainRunConfig config = small_pretrain_config();
  const TrainResult result = pretrain(*backend, w.base, config);
  REQUIRE(result.log.lr_trace.size() == 100);
  for (std::int64_t i = 0; i < 100; ++i) {
    CHECK(result.log.lr_trace[i] == lr_at(config.schedule, i));
  }
}

TEST_CASE("identical config and seed reproduce the loss trace exactly") {
  const World& w = world();
  auto backend_a = make_backend("toy", 6, 7);
  auto backend_b = make_backend("toy", 6, 7);
  const TrainRunConfig config = small_pretrain_config();
  const TrainResult a = pretrain(*backend_a, w.base, config);
  const TrainResult b = pretrain(*backend_b, w.base, config);
  CHECK(a.log.loss_trace == b.log.loss_trace);
  CHECK(a.log.sample_digests == b.log.sample_digests);
}

TEST_CASE("finetune freezes stages 1-3 bit-exactly and trains the head") {
  const World& w = world();
  auto backend = make_backend("toy", 6, 7);
  TrainRunConfig pre_config = small_pretrain_config();
  pre_config.schedule.total_iterations = 40;
  pre_config.schedule.warmup_iterations = 8;
  const TrainResult pre = pretrain(*backend, w.base, pre_config);

  const auto source = backend_from_checkpoint(pre.checkpoint);
  std::map<std::string, std::vector<double>> before;
  for (const auto& info : source->parameter_groups()) {
    const auto view = source->group_parameters(info.name);
    before[info.name].assign(view.begin(), view.end());
  }

  const DatasetSplit* split = w.splits.find(SplitName::train_50);
  REQUIRE(split);
  const TrainResult ft = finetune(pre.checkpoint, w.novel, split->image_ids,
                                  &w.base, small_finetune_config());

  const auto trained = backend_from_checkpoint(ft.checkpoint);
  for (const auto& info : trained->parameter_groups()) {
    const auto now = trained->group_parameters(info.name);
    if (info.stage >= 1 && info.stage <= 3) {
      const std::vector<double>& orig = before.at(info.name);
      REQUIRE(orig.size() == now.size());
      double linf = 0.0;
      for (std::size_t i = 0; i < now.size(); ++i) {
        linf = std::max(linf, std::abs(now[i] - orig[i]));
      }
      CHECK(linf == 0.0);  // frozen stages are bit-identical
    }
  }
  // The replaced head has a different shape (1 class), so compare change
  // via stage 4 (trainable) instead: it must have moved.
  double stage4_change = 0.0;
  {
    const auto now = trained->group_parameters("stage4");
    const std::vector<double>& orig = before.at("stage4");
    for (std::size_t i = 0; i < now.size(); ++i) {
      stage4_change = std::max(stage4_change, std::abs(now[i] - orig[i]));
    }
  }
  CHECK(stage4_change > 0.0);
}

TEST_CASE("after finetune the vocabulary is exactly the novel class") {
  const World& w = world();
  const DatasetSplit* split = w.splits.find(SplitName::train_50);
  TrainRunConfig config = small_finetune_config();
  config.schedule.total_iterations = 30;
  config.schedule.warmup_iterations = 6;
  // Fresh backend: no pre-training (Table rows with Pre-Train N).
  const TrainResult ft = finetune(std::nullopt, w.novel, split->image_ids, &w.base,
                                  config);
  CHECK(ft.checkpoint.class_vocabulary ==
        std::vector<std::string>{w.novel_label});

  const auto model = backend_from_checkpoint(ft.checkpoint);
  CHECK(model->num_classes() == 1);
  std::vector<const AnnotatedImage*> probe{&w.novel.images[0]};
  const auto detections =
      run_inference(*model, ft.checkpoint.class_vocabulary, probe, 96);
  for (const Detection& det : detections) {
    CHECK(det.class_label == w.novel_label);
  }
}

TEST_CASE("finetune requires a base dataset when copy-paste is enabled") {
  const World& w = world();
  const DatasetSplit* split = w.splits.find(SplitName::train_50);
  CHECK_THROWS_AS(finetune(std::nullopt, w.novel, split->image_ids, nullptr,
                           small_finetune_config()),
                  UsageError);
}

TEST_CASE("finetune rejects a backend/checkpoint mismatch") {
  const World& w = world();
  auto backend = make_backend("toy", 6, 7);
  TrainRunConfig pre_config = small_pretrain_config();
  pre_config.schedule.total_iterations = 10;
  pre_config.schedule.warmup_iterations = 2;
  const TrainResult pre = pretrain(*backend, w.base, pre_config);

  const DatasetSplit* split = w.splits.find(SplitName::train_50);
  TrainRunConfig config = small_finetune_config();
  config.backend = "toy_wide";
  CHECK_THROWS_AS(
      finetune(pre.checkpoint, w.novel, split->image_ids, &w.base, config),
      UsageError);
}

TEST_CASE("a diverging run aborts with the last finite state kept") {
  const World& w = world();
  auto backend = make_backend("toy", 6, 7);
  TrainRunConfig config = small_pretrain_config();
  config.schedule.base_lr = 1e14;  // guaranteed blow-up
  config.schedule.warmup_iterations = 0;
  config.schedule.max_grad_norm = 0.0;  // clipping off to let it diverge
  config.schedule.total_iterations = 50;
  CHECK_THROWS_AS(pretrain(*backend, w.base, config), PipelineError);
  // The backend still holds finite parameters.
  for (const auto& info : backend->parameter_groups()) {
    for (double v : backend->group_parameters(info.name)) {
      CHECK(std::isfinite(v));
    }
  }
}

TEST_CASE("checkpoints round-trip through disk with identical probe outputs") {
  const World& w = world();
  auto backend = make_backend("toy", 6, 7);
  TrainRunConfig config = small_pretrain_config();
  config.schedule.total_iterations = 20;
  config.schedule.warmup_iterations = 4;
  const TrainResult pre = pretrain(*backend, w.base, config);

  const fs::path path = fs::temp_directory_path() / "pointdet_ckpt_roundtrip.json";
  save_checkpoint(pre.checkpoint, path);
  const Checkpoint loaded = load_checkpoint(path);
  CHECK(loaded.stage_tags == pre.checkpoint.stage_tags);
  CHECK(loaded.class_vocabulary == pre.checkpoint.class_vocabulary);

  const auto restored = backend_from_checkpoint(loaded);
  const AnnotatedImage probe = resize_shorter_side(w.base.images[0], 96);
  const auto a = backend->detect(probe.pixels);
  const auto b = restored->detect(probe.pixels);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].confidence == b[i].confidence);
    CHECK(a[i].bbox == b[i].bbox);
  }
  fs::remove(path);
}

TEST_CASE("train artifacts land on disk when a directory is given") {
  const World& w = world();
  auto backend = make_backend("toy", 6, 7);
  TrainRunConfig config = small_pretrain_config();
  config.schedule.total_iterations = 10;
  config.schedule.warmup_iterations = 2;
  const fs::path dir = fs::temp_directory_path() / "pointdet_artifacts";
  fs::remove_all(dir);
  fs::create_directories(dir);
  pretrain(*backend, w.base, config, dir);
  CHECK(fs::exists(dir / "config.json"));
  CHECK(fs::exists(dir / "trace.csv"));
  CHECK(fs::exists(dir / "checkpoint.json"));
  CHECK(fs::exists(dir / "provenance.jsonl"));
  fs::remove_all(dir);
}
