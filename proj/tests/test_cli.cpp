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

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "pointdet/dataset.hpp"
#include "pointdet/evaluator.hpp"
#include "pointdet/synth.hpp"

using namespace pointdet;
namespace fs = std::filesystem;

#ifndef POINTDET_CLI_PATH
#error "POINTDET_CLI_PATH must point at the pointdet binary"
#endif

namespace {

struct CliResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

CliResult run_cli(const std::string& args) {
  const std::string command = std::string(POINTDET_CLI_PATH) + " " + args + " 2>&1";
  CliResult result;
  FILE* pipe = popen(command.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buffer[4096];
  while (std::size_t n = std::fread(buffer, 1, sizeof(buffer), pipe)) {
    result.output.append(buffer, n);
  }
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string{std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>()};
}

constexpr const char* kHeader =
    "image_path,image_id,captured_at,class_label,point_x,point_y,image_width,image_height\n";

}  // namespace

TEST_CASE("ingest: valid fixture exits 0 and writes the dataset") {
  const fs::path dir = fresh_dir("pointdet_cli_ingest");
  {
    std::ofstream csv(dir / "points.csv");
    csv << kHeader
        << "images/a.ppm,img_a,2020-01-01T00:00:00Z,handfish,10,20,100,80\n"
        << "images/b.ppm,img_b,2020-01-02T00:00:00Z,urchin,5,5,64,64\n";
  }
  const CliResult result = run_cli("ingest --csv " + (dir / "points.csv").string() +
                                   " --out " + (dir / "dataset.json").string());
  CHECK(result.exit_code == 0);
  CHECK(fs::exists(dir / "dataset.json"));
  CHECK(result.output.find("ingested 2 images") != std::string::npos);

  SUBCASE("re-running writes identical bytes") {
    const std::string before = slurp(dir / "dataset.json");
    const CliResult again = run_cli("ingest --csv " + (dir / "points.csv").string() +
                                    " --out " + (dir / "dataset.json").string());
    CHECK(again.exit_code == 0);
    CHECK(slurp(dir / "dataset.json") == before);
  }
}

TEST_CASE("ingest: a missing required column exits nonzero and names it") {
  const fs::path dir = fresh_dir("pointdet_cli_ingest_bad");
  {
    std::ofstream csv(dir / "points.csv");
    csv << "image_path,image_id,class_label,point_x,point_y,image_width,image_height\n"
        << "images/a.ppm,img_a,handfish,10,20,100,80\n";
  }
  const CliResult result = run_cli("ingest --csv " + (dir / "points.csv").string() +
                                   " --out " + (dir / "dataset.json").string());
  CHECK(result.exit_code == 2);
  CHECK(result.output.find("captured_at") != std::string::npos);
}

TEST_CASE("ingest: bad rows land in the rejects report, exit stays 0") {
  const fs::path dir = fresh_dir("pointdet_cli_ingest_rejects");
  {
    std::ofstream csv(dir / "points.csv");
    csv << kHeader;
    for (int i = 0; i < 8; ++i) {
      csv << "images/a.ppm,img_" << i
          << ",2020-01-01T00:00:00Z,handfish,10,20,100,80\n";
    }
    csv << "images/z.ppm,img_z,not-a-date,handfish,10,20,100,80\n";
    csv << "images/z.ppm,img_y,2020-01-01T00:00:00Z,handfish,999,20,100,80\n";
  }
  const CliResult result = run_cli(
      "ingest --csv " + (dir / "points.csv").string() + " --out " +
      (dir / "dataset.json").string() + " --rejects " + (dir / "rejects.jsonl").string());
  CHECK(result.exit_code == 0);
  const std::string rejects = slurp(dir / "rejects.jsonl");
  CHECK(std::count(rejects.begin(), rejects.end(), '\n') == 2);
}

TEST_CASE("overwriting the input file is refused") {
  const fs::path dir = fresh_dir("pointdet_cli_inplace");
  {
    std::ofstream csv(dir / "points.csv");
    csv << kHeader << "images/a.ppm,img_a,2020-01-01T00:00:00Z,handfish,10,20,100,80\n";
  }
  const CliResult result = run_cli("ingest --csv " + (dir / "points.csv").string() +
                                   " --out " + (dir / "points.csv").string());
  CHECK(result.exit_code == 1);
}

TEST_CASE("split: paper-shaped counts via the command line") {
  const fs::path dir = fresh_dir("pointdet_cli_split");
  Dataset dataset;
  dataset.name = "novel";
  for (int i = 0; i < 284; ++i) {
    AnnotatedImage image;
    image.image_id = "img_" + std::to_string(1000 + i);
    image.width = 96;
    image.height = 96;
    image.captured_at = parse_timestamp("2015-01-01T00:00:00Z") + i * 86400LL;
    InstanceAnnotation ann;
    ann.id = image.image_id + "#0";
    ann.class_label = "handfish";
    ann.point = Point{48, 48};
    image.annotations.push_back(ann);
    dataset.images.push_back(std::move(image));
  }
  dataset.recount_vocabulary();
  save_dataset(dataset, dir / "dataset.json");

  const std::string args = "split --dataset " + (dir / "dataset.json").string() +
                           " --n-test 42 --sizes 50,100,200 --n-validation 42 " +
                           "--seed 9 --out " + (dir / "splits.json").string();
  const CliResult result = run_cli(args);
  CHECK(result.exit_code == 0);
  const SplitManifest manifest = load_split_manifest(dir / "splits.json");
  CHECK(manifest.find(SplitName::test)->image_ids.size() == 42);
  CHECK(manifest.find(SplitName::train_50)->image_ids.size() == 50);
  CHECK(manifest.find(SplitName::train_100)->image_ids.size() == 100);
  CHECK(manifest.find(SplitName::train_200)->image_ids.size() == 200);
  CHECK(manifest.find(SplitName::validation)->image_ids.size() == 42);

  SUBCASE("repeat with the same seed produces identical bytes") {
    const std::string before = slurp(dir / "splits.json");
    run_cli(args);
    CHECK(slurp(dir / "splits.json") == before);
  }

  SUBCASE("infeasible sizes exit nonzero") {
    const CliResult bad = run_cli(
        "split --dataset " + (dir / "dataset.json").string() +
        " --n-test 42 --sizes 500 --n-validation 42 --seed 9 --out " +
        (dir / "bad.json").string());
    CHECK(bad.exit_code == 1);
  }
}

TEST_CASE("correct: a dangling reference warns but exits 0") {
  const fs::path dir = fresh_dir("pointdet_cli_correct");
  Dataset dataset;
  dataset.name = "novel";
  AnnotatedImage image;
  image.image_id = "img_a";
  image.width = 64;
  image.height = 64;
  image.captured_at = parse_timestamp("2020-01-01T00:00:00Z");
  InstanceAnnotation ann;
  ann.id = "a0";
  ann.class_label = "handfish";
  ann.point = Point{20, 20};
  image.annotations.push_back(ann);
  dataset.images.push_back(image);
  dataset.recount_vocabulary();
  save_dataset(dataset, dir / "dataset.json");

  std::ofstream corrections(dir / "corrections.json");
  corrections << R"([
    {"image_id": "img_a", "annotation_id": "a0",
     "boundary": [[10,10],[30,10],[30,30],[10,30]], "reason": "part_excluded"},
    {"image_id": "img_a", "annotation_id": "missing",
     "boundary": [[1,1],[5,1],[5,5],[1,5]], "reason": "other"}
  ])";
  corrections.close();

  const CliResult result = run_cli("correct --dataset " + (dir / "dataset.json").string() +
                                   " --corrections " + (dir / "corrections.json").string() +
                                   " --out " + (dir / "corrected.json").string());
  CHECK(result.exit_code == 0);
  CHECK(result.output.find("applied 1 corrections, rejected 1") != std::string::npos);
  CHECK(result.output.find("warning:") != std::string::npos);

  const Dataset corrected = load_dataset(dir / "corrected.json");
  CHECK(corrected.images[0].annotations[0].corrected);
}

TEST_CASE("segment prints per-class counts that match the dataset tally") {
  const fs::path dir = fresh_dir("pointdet_cli_segment");
  SynthConfig config;
  config.novel_images = 6;
  config.base_images = 4;
  config.seed = 12;
  generate_synthetic_dataset(dir / "data", config);
  REQUIRE(run_cli("ingest --csv " + (dir / "data/base.csv").string() + " --out " +
                  (dir / "base.json").string())
              .exit_code == 0);
  const Dataset base = load_dataset(dir / "base.json");

  const CliResult result = run_cli("segment --dataset " + (dir / "base.json").string() +
                                   " --out " + (dir / "base_seg.json").string());
  CHECK(result.exit_code == 0);
  for (const ClassCount& cc : base.class_vocabulary) {
    // "label  attempted  N" appears with the ingested per-class count.
    const std::string needle = cc.label;
    const std::size_t pos = result.output.find(needle);
    REQUIRE(pos != std::string::npos);
    const std::string line = result.output.substr(pos, 80);
    CHECK(line.find("attempted") != std::string::npos);
    CHECK(line.find(std::to_string(cc.count)) != std::string::npos);
  }
}

TEST_CASE("report re-renders a machine export bit-identically") {
  const fs::path dir = fresh_dir("pointdet_cli_report");
  std::vector<EvalResult> results;
  results.push_back(make_eval_result(
      CellKey{"toy", true, NovelMaskMode::none, BaseMaskMode::segmentation, 50},
      {0.2, 0.25, 0.3, 0.22, 0.28}));
  results.push_back(make_eval_result(
      CellKey{"toy", false, NovelMaskMode::none, BaseMaskMode::none, 50},
      {0.1, 0.15, 0.12, 0.18, 0.11}));
  save_results_json(results, dir / "results.json");

  const CliResult first = run_cli("report --results " + (dir / "results.json").string() +
                                  " --out-json " + (dir / "echo.json").string());
  CHECK(first.exit_code == 0);
  const CliResult second = run_cli("report --results " + (dir / "echo.json").string());
  CHECK(second.exit_code == 0);
  CHECK(first.output.substr(0, first.output.find("wrote")) == second.output);

  SUBCASE("a missing results file is a data error") {
    CHECK(run_cli("report --results /nonexistent/results.json").exit_code == 2);
  }
}

TEST_CASE("smoke grid: one cell, two seeds, completes quickly and resumes") {
  const fs::path dir = fresh_dir("pointdet_cli_grid");
  SynthConfig config;
  config.novel_images = 70;
  config.base_images = 10;
  config.seed = 77;
  generate_synthetic_dataset(dir / "data", config);
  REQUIRE(run_cli("ingest --csv " + (dir / "data/novel.csv").string() + " --out " +
                  (dir / "novel.json").string()).exit_code == 0);
  REQUIRE(run_cli("ingest --csv " + (dir / "data/base.csv").string() + " --out " +
                  (dir / "base.json").string()).exit_code == 0);
  REQUIRE(run_cli("segment --dataset " + (dir / "novel.json").string() + " --out " +
                  (dir / "novel_seg.json").string()).exit_code == 0);
  REQUIRE(run_cli("segment --dataset " + (dir / "base.json").string() + " --out " +
                  (dir / "base_seg.json").string()).exit_code == 0);
  REQUIRE(run_cli("split --dataset " + (dir / "novel_seg.json").string() +
                  " --n-test 10 --sizes 50 --n-validation 8 --seed 4 --out " +
                  (dir / "splits.json").string()).exit_code == 0);

  std::ofstream cfg(dir / "config.json");
  cfg << R"({
    "novel_dataset": "novel_seg.json",
    "base_dataset": "base_seg.json",
    "split_manifest": "splits.json",
    "artifact_root": "runs",
    "novel_class": "handstar",
    "resize_shorter_side": 96,
    "backends": ["toy"],
    "sizes": [50],
    "seeds": [1, 2],
    "rows": [{"pretrain": true, "novel_mask": "none", "base_mask": "segmentation"}],
    "pretrain_schedule": {"base_lr": 0.02, "total_iterations": 50, "warmup_iterations": 10},
    "finetune_schedule": {"base_lr": 0.01, "total_iterations": 50, "warmup_iterations": 10},
    "augmentation": {"apply_probability": 0.5, "flip_probability": 0.5}
  })";
  cfg.close();

  const CliResult result = run_cli("grid --config " + (dir / "config.json").string());
  CHECK(result.exit_code == 0);
  CHECK(result.output.find("2 runs (0 failed)") != std::string::npos);
  CHECK(fs::exists(dir / "runs" / "results.json"));

  // Config echo lands verbatim in every artifact directory.
  int config_echoes = 0;
  for (const auto& entry : fs::directory_iterator(dir / "runs")) {
    if (entry.is_directory() && fs::exists(entry.path() / "config.json")) {
      ++config_echoes;
    }
  }
  CHECK(config_echoes == 4);  // 2 pretrain + 2 finetune

  SUBCASE("a second invocation resumes the completed runs") {
    const CliResult again = run_cli("grid --config " + (dir / "config.json").string());
    CHECK(again.exit_code == 0);
    CHECK(again.output.find("2 runs (0 failed)") != std::string::npos);
  }
}
