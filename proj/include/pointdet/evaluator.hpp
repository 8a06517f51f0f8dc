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
#include <optional>
#include <string>
#include <vector>

#include "pointdet/annotations.hpp"
#include "pointdet/augment.hpp"

namespace pointdet {

struct Detection {
  std::string image_id;
  std::string class_label;
  BoundingBox bbox;
  double confidence = 0.0;
};

// One evaluated detection, in confidence order.
struct MatchedDetection {
  std::size_t input_index = 0;  // position in the original detection list
  double confidence = 0.0;
  bool true_positive = false;
};

struct MatchOutcome {
  std::vector<MatchedDetection> labels;  // sorted by confidence descending
  std::map<std::string, std::size_t> unmatched_ground_truth;  // per image
  std::size_t total_ground_truth = 0;
};

/// Greedy confidence-ordered matching at a single IoU threshold. Each ground
/// truth is matched at most once; a detection is a true positive iff the
/// best-IoU unmatched ground truth in its image reaches the threshold.
/// Confidence ties keep the input order.
MatchOutcome match_detections(const std::vector<Detection>& detections,
                              const std::map<std::string, std::vector<BoundingBox>>&
                                  ground_truth_by_image,
                              double iou_threshold);

enum class ApInterpolation { all_points, eleven_point };

/// Area under the precision-recall curve. All-points interpolation by
/// default: AP = sum over recall steps of (R_i - R_{i-1}) * max precision at
/// recall >= R_i. With zero ground truth, an empty detection list scores 1.0
/// (empty class) and any detection scores 0.0.
double average_precision(const std::vector<MatchedDetection>& labels,
                         std::size_t total_ground_truth,
                         ApInterpolation interpolation = ApInterpolation::all_points);

enum class StdMode { sample, population };

struct RunAggregate {
  double mean = 0.0;
  std::optional<double> std_dev;  // unset for single-run aggregates
};

/// Mean and standard deviation over per-seed values (sample std, n-1, by
/// default). A single value yields a mean with std flagged unavailable.
RunAggregate aggregate_runs(const std::vector<double>& values,
                            StdMode mode = StdMode::sample);

// One cell of the ablation grid.
struct CellKey {
  std::string backend;
  bool pretrain = false;
  NovelMaskMode novel_mask = NovelMaskMode::none;
  BaseMaskMode base_mask = BaseMaskMode::none;
  std::size_t sample_size = 0;

  friend bool operator==(const CellKey&, const CellKey&) = default;
  bool operator<(const CellKey& other) const;
  std::string row_label() const;     // "Y  Bounding Box  Segment."
  std::string column_label() const;  // "toy/50"
};

struct EvalResult {
  CellKey key;
  std::vector<double> ap_values;  // one per seed, in [0, 1]
  double mean = 0.0;
  std::optional<double> std_dev;
};

EvalResult make_eval_result(CellKey key, std::vector<double> ap_values,
                            StdMode mode = StdMode::sample);

/// Renders the ablation grid: rows are (pretrain x mask-mode) combinations,
/// columns are (backend x sample size). Values print as AP percentage points
/// "24.8±4.8"; the best value in each column is marked '*', the second best
/// '^', and missing cells render as dashes.
std::string render_results_table(const std::vector<EvalResult>& results);

// Machine-readable exports. JSON keeps full-precision AP values and is the
// canonical re-ingestion format; stored aggregates are verified against the
// values on load (1e-12).
void save_results_json(const std::vector<EvalResult>& results,
                       const std::filesystem::path& path);
std::vector<EvalResult> load_results_json(const std::filesystem::path& path);
void save_results_csv(const std::vector<EvalResult>& results,
                      const std::filesystem::path& path);

// Detections interchange: one JSON object per line
// {"image_id", "class_label", "bbox": [x0,y0,x1,y1], "confidence"}.
void save_detections_jsonl(const std::vector<Detection>& detections,
                           const std::filesystem::path& path);
std::vector<Detection> load_detections_jsonl(const std::filesystem::path& path);

struct OperatingPoint {
  double confidence_threshold = 0.5;
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  double precision = 0.0;
  double recall = 0.0;
};

struct EvaluationReport {
  double ap = 0.0;
  std::size_t total_ground_truth = 0;
  std::size_t detections = 0;
  OperatingPoint operating_point;
};

/// Single-class AP@IoU evaluation of detections against the ground truth
/// carried by the images (annotations with the given label and a bbox),
/// plus a fixed-threshold operating point for field use.
EvaluationReport evaluate_detections(const std::vector<Detection>& detections,
                                     const std::vector<AnnotatedImage>& images,
                                     const std::string& class_label,
                                     double iou_threshold = 0.5,
                                     double confidence_threshold = 0.5);

}  // namespace pointdet
