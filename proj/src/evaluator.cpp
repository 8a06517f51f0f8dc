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
#include "pointdet/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

namespace pointdet {

MatchOutcome match_detections(const std::vector<Detection>& detections,
                              const std::map<std::string, std::vector<BoundingBox>>&
                                  ground_truth_by_image,
                              double iou_threshold) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
    throw UsageError("match_detections: IoU threshold must lie in (0, 1]");
  }

  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detections[a].confidence > detections[b].confidence;
  });

  std::map<std::string, std::vector<bool>> matched;
  MatchOutcome outcome;
  for (const auto& [image_id, boxes] : ground_truth_by_image) {
    matched[image_id].assign(boxes.size(), false);
    outcome.total_ground_truth += boxes.size();
  }

  for (std::size_t index : order) {
    const Detection& det = detections[index];
    MatchedDetection label{index, det.confidence, false};
    const auto gt_it = ground_truth_by_image.find(det.image_id);
    if (gt_it != ground_truth_by_image.end()) {
      const std::vector<BoundingBox>& boxes = gt_it->second;
      std::vector<bool>& used = matched[det.image_id];
      double best_iou = 0.0;
      std::size_t best_index = boxes.size();
      for (std::size_t g = 0; g < boxes.size(); ++g) {
        if (used[g]) continue;
        const double overlap = iou(det.bbox, boxes[g]);
        if (overlap > best_iou) {
          best_iou = overlap;
          best_index = g;
        }
      }
      if (best_index < boxes.size() && best_iou >= iou_threshold) {
        used[best_index] = true;
        label.true_positive = true;
      }
    }
    outcome.labels.push_back(label);
  }

  for (const auto& [image_id, used] : matched) {
    const std::size_t unmatched = static_cast<std::size_t>(
        std::count(used.begin(), used.end(), false));
    outcome.unmatched_ground_truth[image_id] = unmatched;
  }
  return outcome;
}

double average_precision(const std::vector<MatchedDetection>& labels,
                         std::size_t total_ground_truth,
                         ApInterpolation interpolation) {
  for (std::size_t i = 1; i < labels.size(); ++i) {
    if (labels[i].confidence > labels[i - 1].confidence) {
      throw UsageError(
          "average_precision: labels must be sorted by confidence descending");
    }
  }
  if (total_ground_truth == 0) {
    // An empty class: perfect when nothing was predicted, zero otherwise.
    return labels.empty() ? 1.0 : 0.0;
  }

  std::vector<double> precision;
  std::vector<double> recall;
  std::size_t tp = 0, fp = 0;
  for (const MatchedDetection& det : labels) {
    (det.true_positive ? tp : fp)++;
    precision.push_back(static_cast<double>(tp) / (tp + fp));
    recall.push_back(static_cast<double>(tp) / total_ground_truth);
  }

  // Precision envelope: best precision achievable at recall >= r.
  std::vector<double> envelope = precision;
  for (std::size_t i = envelope.size(); i-- > 1;) {
    envelope[i - 1] = std::max(envelope[i - 1], envelope[i]);
  }

  if (interpolation == ApInterpolation::eleven_point) {
    double sum = 0.0;
    for (int k = 0; k <= 10; ++k) {
      const double r = k / 10.0;
      double best = 0.0;
      for (std::size_t i = 0; i < recall.size(); ++i) {
        if (recall[i] >= r) {
          best = envelope[i];
          break;
        }
      }
      sum += best;
    }
    return sum / 11.0;
  }

  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < recall.size(); ++i) {
    if (recall[i] > prev_recall) {
      ap += (recall[i] - prev_recall) * envelope[i];
      prev_recall = recall[i];
    }
  }
  return ap;
}

RunAggregate aggregate_runs(const std::vector<double>& values, StdMode mode) {
  if (values.empty()) throw UsageError("aggregate_runs: no values");
  RunAggregate aggregate;
  aggregate.mean = std::accumulate(values.begin(), values.end(), 0.0) /
                   static_cast<double>(values.size());
  if (values.size() >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - aggregate.mean) * (v - aggregate.mean);
    const double denom = mode == StdMode::sample
                             ? static_cast<double>(values.size() - 1)
                             : static_cast<double>(values.size());
    aggregate.std_dev = std::sqrt(ss / denom);
  }
  return aggregate;
}

bool CellKey::operator<(const CellKey& other) const {
  const auto rank = [](const CellKey& k) {
    return std::tuple(k.pretrain, static_cast<int>(k.novel_mask),
                      static_cast<int>(k.base_mask), k.backend, k.sample_size);
  };
  return rank(*this) < rank(other);
}

namespace {

std::string mask_label(NovelMaskMode mode) {
  switch (mode) {
    case NovelMaskMode::none:
      return "None";
    case NovelMaskMode::bounding_box:
      return "Bounding Box";
    case NovelMaskMode::segmentation:
      return "Segment.";
  }
  return "None";
}

std::string mask_label(BaseMaskMode mode) {
  return mode == BaseMaskMode::segmentation ? "Segment." : "None";
}

}  // namespace

std::string CellKey::row_label() const {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%-3s %-13s %-9s", pretrain ? "Y" : "N",
                mask_label(novel_mask).c_str(), mask_label(base_mask).c_str());
  return std::string(buf);
}

std::string CellKey::column_label() const {
  return backend + "/" + std::to_string(sample_size);
}

EvalResult make_eval_result(CellKey key, std::vector<double> ap_values, StdMode mode) {
  const RunAggregate aggregate = aggregate_runs(ap_values, mode);
  EvalResult result;
  result.key = std::move(key);
  result.ap_values = std::move(ap_values);
  result.mean = aggregate.mean;
  result.std_dev = aggregate.std_dev;
  return result;
}

namespace {

struct RowKey {
  bool pretrain;
  NovelMaskMode novel_mask;
  BaseMaskMode base_mask;
  bool operator<(const RowKey& o) const {
    return std::tuple(pretrain, static_cast<int>(novel_mask), static_cast<int>(base_mask)) <
           std::tuple(o.pretrain, static_cast<int>(o.novel_mask), static_cast<int>(o.base_mask));
  }
  bool operator==(const RowKey& o) const = default;
};

struct ColumnKey {
  std::string backend;
  std::size_t sample_size;
  bool operator<(const ColumnKey& o) const {
    return std::tie(backend, sample_size) < std::tie(o.backend, o.sample_size);
  }
  bool operator==(const ColumnKey& o) const = default;
};

std::string format_cell(const EvalResult& result) {
  char buf[64];
  if (result.std_dev) {
    std::snprintf(buf, sizeof(buf), "%.1f±%.1f", result.mean * 100.0,
                  *result.std_dev * 100.0);
  } else {
    std::snprintf(buf, sizeof(buf), "%.1f", result.mean * 100.0);
  }
  return std::string(buf);
}

// Display width of a UTF-8 cell string ("±" is 2 bytes, 1 column).
std::size_t display_width(const std::string& s) {
  std::size_t width = 0;
  for (unsigned char c : s) {
    if ((c & 0xC0) != 0x80) ++width;
  }
  return width;
}

std::string pad_to(const std::string& s, std::size_t width) {
  std::string out = s;
  for (std::size_t w = display_width(s); w < width; ++w) out += ' ';
  return out;
}

}  // namespace

std::string render_results_table(const std::vector<EvalResult>& results) {
  std::set<RowKey> row_set;
  std::set<ColumnKey> column_set;
  std::map<std::pair<RowKey, ColumnKey>, const EvalResult*> cells;
  for (const EvalResult& result : results) {
    const RowKey row{result.key.pretrain, result.key.novel_mask, result.key.base_mask};
    const ColumnKey column{result.key.backend, result.key.sample_size};
    row_set.insert(row);
    column_set.insert(column);
    cells[{row, column}] = &result;
  }
  const std::vector<RowKey> rows(row_set.begin(), row_set.end());
  const std::vector<ColumnKey> columns(column_set.begin(), column_set.end());

  // Best and second-best mean per column.
  std::map<ColumnKey, std::pair<const EvalResult*, const EvalResult*>> top;
  for (const ColumnKey& column : columns) {
    const EvalResult* best = nullptr;
    const EvalResult* second = nullptr;
    for (const RowKey& row : rows) {
      const auto it = cells.find({row, column});
      if (it == cells.end()) continue;
      const EvalResult* cell = it->second;
      if (!best || cell->mean > best->mean) {
        second = best;
        best = cell;
      } else if (!second || cell->mean > second->mean) {
        second = cell;
      }
    }
    top[column] = {best, second};
  }

  constexpr std::size_t kRowLabelWidth = 28;
  constexpr std::size_t kCellWidth = 12;
  std::ostringstream out;
  out << pad_to("Pre-Train  Novel Mask  Base Mask", kRowLabelWidth);
  for (const ColumnKey& column : columns) {
    out << "  " << pad_to(column.backend + "/" + std::to_string(column.sample_size),
                          kCellWidth);
  }
  out << "\n";
  out << std::string(kRowLabelWidth + columns.size() * (kCellWidth + 2), '-') << "\n";

  for (const RowKey& row : rows) {
    const CellKey label_key{"", row.pretrain, row.novel_mask, row.base_mask, 0};
    out << pad_to(label_key.row_label(), kRowLabelWidth);
    for (const ColumnKey& column : columns) {
      const auto it = cells.find({row, column});
      if (it == cells.end()) {
        out << "  " << pad_to("-", kCellWidth);
        continue;
      }
      std::string text = format_cell(*it->second);
      const auto& [best, second] = top.at(column);
      if (it->second == best) {
        text += "*";
      } else if (it->second == second) {
        text += "^";
      }
      out << "  " << pad_to(text, kCellWidth);
    }
    out << "\n";
  }
  out << "\n(* best in column, ^ second best; values are AP@0.5 x 100)\n";
  return out.str();
}

namespace {

nlohmann::json result_to_json(const EvalResult& result) {
  nlohmann::json j{{"backend", result.key.backend},
                   {"pretrain", result.key.pretrain},
                   {"novel_mask", to_string(result.key.novel_mask)},
                   {"base_mask", to_string(result.key.base_mask)},
                   {"sample_size", result.key.sample_size},
                   {"ap_values", result.ap_values},
                   {"mean", result.mean}};
  j["std"] = result.std_dev ? nlohmann::json(*result.std_dev) : nlohmann::json();
  return j;
}

EvalResult result_from_json(const nlohmann::json& j) {
  EvalResult result;
  result.key.backend = j.at("backend").get<std::string>();
  result.key.pretrain = j.at("pretrain").get<bool>();
  result.key.novel_mask = novel_mask_mode_from_string(j.at("novel_mask").get<std::string>());
  result.key.base_mask = base_mask_mode_from_string(j.at("base_mask").get<std::string>());
  result.key.sample_size = j.at("sample_size").get<std::size_t>();
  result.ap_values = j.at("ap_values").get<std::vector<double>>();
  result.mean = j.at("mean").get<double>();
  if (!j.at("std").is_null()) result.std_dev = j.at("std").get<double>();

  // Stored aggregates must match the values they claim to summarize.
  const RunAggregate recomputed = aggregate_runs(result.ap_values);
  if (std::abs(recomputed.mean - result.mean) > 1e-12 ||
      recomputed.std_dev.has_value() != result.std_dev.has_value() ||
      (recomputed.std_dev && std::abs(*recomputed.std_dev - *result.std_dev) > 1e-12)) {
    throw DataError("stored mean/std disagree with ap_values for cell " +
                    result.key.row_label() + " " + result.key.column_label());
  }
  return result;
}

}  // namespace

void save_results_json(const std::vector<EvalResult>& results,
                       const std::filesystem::path& path) {
  nlohmann::json arr = nlohmann::json::array();
  for (const EvalResult& result : results) arr.push_back(result_to_json(result));
  std::ofstream out(path);
  if (!out) throw DataError("cannot write results file: " + path.string());
  out << nlohmann::json{{"schema_version", 1}, {"results", std::move(arr)}}.dump(1)
      << "\n";
}

std::vector<EvalResult> load_results_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open results file: " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("results file is not valid JSON: " + std::string(e.what()));
  }
  if (doc.at("schema_version").get<int>() != 1) {
    throw DataError("unsupported results schema version in " + path.string());
  }
  std::vector<EvalResult> results;
  for (const auto& item : doc.at("results")) results.push_back(result_from_json(item));
  return results;
}

void save_results_csv(const std::vector<EvalResult>& results,
                      const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write results CSV: " + path.string());
  out << "backend,pretrain,novel_mask,base_mask,sample_size,n_runs,mean,std,ap_values\n";
  for (const EvalResult& result : results) {
    out << result.key.backend << "," << (result.key.pretrain ? "Y" : "N") << ","
        << to_string(result.key.novel_mask) << "," << to_string(result.key.base_mask)
        << "," << result.key.sample_size << "," << result.ap_values.size() << ",";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", result.mean);
    out << buf << ",";
    if (result.std_dev) {
      std::snprintf(buf, sizeof(buf), "%.17g", *result.std_dev);
      out << buf;
    }
    out << ",";
    for (std::size_t i = 0; i < result.ap_values.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", result.ap_values[i]);
      out << (i ? ";" : "") << buf;
    }
    out << "\n";
  }
}

void save_detections_jsonl(const std::vector<Detection>& detections,
                           const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write detections file: " + path.string());
  for (const Detection& det : detections) {
    out << nlohmann::json{{"image_id", det.image_id},
                          {"class_label", det.class_label},
                          {"bbox", {det.bbox.x_min, det.bbox.y_min, det.bbox.x_max,
                                    det.bbox.y_max}},
                          {"confidence", det.confidence}}
               .dump()
        << "\n";
  }
}

std::vector<Detection> load_detections_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open detections file: " + path.string());
  std::vector<Detection> detections;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("detections line " + std::to_string(line_number) +
                      " is not valid JSON: " + e.what());
    }
    Detection det;
    det.image_id = j.at("image_id").get<std::string>();
    det.class_label = j.value("class_label", std::string());
    const auto& b = j.at("bbox");
    det.bbox = BoundingBox{b.at(0).get<double>(), b.at(1).get<double>(),
                           b.at(2).get<double>(), b.at(3).get<double>()};
    det.confidence = j.at("confidence").get<double>();
    if (det.confidence < 0.0 || det.confidence > 1.0 || !det.bbox.valid()) {
      throw DataError("invalid detection on line " + std::to_string(line_number));
    }
    detections.push_back(std::move(det));
  }
  return detections;
}

EvaluationReport evaluate_detections(const std::vector<Detection>& detections,
                                     const std::vector<AnnotatedImage>& images,
                                     const std::string& class_label,
                                     double iou_threshold,
                                     double confidence_threshold) {
  std::map<std::string, std::vector<BoundingBox>> ground_truth;
  for (const AnnotatedImage& image : images) {
    auto& boxes = ground_truth[image.image_id];
    for (const InstanceAnnotation& ann : image.annotations) {
      if (ann.class_label == class_label && ann.bbox) boxes.push_back(*ann.bbox);
    }
  }

  std::vector<Detection> filtered;
  for (const Detection& det : detections) {
    if (det.class_label == class_label) filtered.push_back(det);
  }

  const MatchOutcome outcome = match_detections(filtered, ground_truth, iou_threshold);

  EvaluationReport report;
  report.ap = average_precision(outcome.labels, outcome.total_ground_truth);
  report.total_ground_truth = outcome.total_ground_truth;
  report.detections = filtered.size();

  OperatingPoint& op = report.operating_point;
  op.confidence_threshold = confidence_threshold;
  for (const MatchedDetection& det : outcome.labels) {
    if (det.confidence < confidence_threshold) continue;
    (det.true_positive ? op.true_positives : op.false_positives)++;
  }
  op.false_negatives = report.total_ground_truth - op.true_positives;
  const std::size_t predicted = op.true_positives + op.false_positives;
  op.precision = predicted == 0 ? 0.0 : static_cast<double>(op.true_positives) / predicted;
  op.recall = report.total_ground_truth == 0
                  ? 0.0
                  : static_cast<double>(op.true_positives) / report.total_ground_truth;
  return report;
}

}  // namespace pointdet
