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
#include "pointdet/segmenter.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>

#include <json.hpp>

namespace pointdet {

std::optional<SegmentationBoundary> ReferenceSegmenter::segment(
    const ImageBuffer& image, const Point& prompt) {
  if (image.empty()) {
    throw SegmenterError("reference segmenter: image has no pixels");
  }
  const int w = image.width;
  const int h = image.height;
  const int sx = static_cast<int>(prompt.x);
  const int sy = static_cast<int>(prompt.y);
  if (sx < 0 || sy < 0 || sx >= w || sy >= h) return std::nullopt;

  const int seed_r = image.at(sx, sy, 0);
  const int seed_g = image.at(sx, sy, 1);
  const int seed_b = image.at(sx, sy, 2);
  auto near_seed = [&](int x, int y) {
    return std::abs(image.at(x, y, 0) - seed_r) <= options_.channel_tolerance &&
           std::abs(image.at(x, y, 1) - seed_g) <= options_.channel_tolerance &&
           std::abs(image.at(x, y, 2) - seed_b) <= options_.channel_tolerance;
  };

  InstanceMask region(w, h);
  std::deque<std::pair<int, int>> queue;
  region.set(sx, sy, true);
  queue.emplace_back(sx, sy);
  std::size_t count = 1;
  while (!queue.empty()) {
    auto [x, y] = queue.front();
    queue.pop_front();
    const int nx[4] = {x + 1, x - 1, x, x};
    const int ny[4] = {y, y, y + 1, y - 1};
    for (int i = 0; i < 4; ++i) {
      if (nx[i] < 0 || ny[i] < 0 || nx[i] >= w || ny[i] >= h) continue;
      if (region.at(nx[i], ny[i]) || !near_seed(nx[i], ny[i])) continue;
      region.set(nx[i], ny[i], true);
      queue.emplace_back(nx[i], ny[i]);
      ++count;
    }
  }

  // Tiny regions are sensor noise; huge ones mean the prompt sat on
  // background and the fill escaped.
  if (count < options_.min_region_px) return std::nullopt;
  if (static_cast<double>(count) >
      options_.max_region_fraction * static_cast<double>(w) * h) {
    return std::nullopt;
  }
  return boundary_from_mask(region);
}

SegmentPointResult segment_point(PromptableSegmenter& segmenter,
                                 const AnnotatedImage& image,
                                 const Point& prompt) {
  if (prompt.x < 0 || prompt.y < 0 || prompt.x > image.width ||
      prompt.y > image.height) {
    throw DataError("segment_point: prompt outside image bounds");
  }
  std::optional<SegmentationBoundary> boundary =
      segmenter.segment(image.pixels, prompt);
  if (!boundary || !point_in_polygon(prompt, *boundary)) {
    return SegmentPointResult{std::nullopt, QualityFlag::failed};
  }
  return SegmentPointResult{std::move(boundary), QualityFlag::ok};
}

std::size_t SegmentationSummary::attempted() const {
  std::size_t n = 0;
  for (const auto& [label, stats] : per_class) n += stats.attempted;
  return n;
}

std::size_t SegmentationSummary::failed() const {
  std::size_t n = 0;
  for (const auto& [label, stats] : per_class) n += stats.failed;
  return n;
}

double SegmentationSummary::failure_rate() const {
  const std::size_t n = attempted();
  return n == 0 ? 0.0 : static_cast<double>(failed()) / n;
}

SegmentationSummary segment_dataset(PromptableSegmenter& segmenter,
                                    std::vector<AnnotatedImage>& images,
                                    const std::set<std::string>& class_filter) {
  SegmentationSummary summary;
  auto selected = [&](const InstanceAnnotation& ann) {
    return class_filter.empty() || class_filter.count(ann.class_label) > 0;
  };

  // Results are applied in image order, one image at a time, so a transport
  // failure leaves previous images intact (partial results retained).
  for (AnnotatedImage& image : images) {
    std::vector<std::pair<std::size_t, SegmentPointResult>> results;
    try {
      for (std::size_t i = 0; i < image.annotations.size(); ++i) {
        if (!selected(image.annotations[i])) continue;
        results.emplace_back(
            i, segment_point(segmenter, image, image.annotations[i].point));
      }
    } catch (const SegmenterError&) {
      summary.transport_failures.push_back(image.image_id);
      continue;
    }
    for (auto& [index, result] : results) {
      InstanceAnnotation& ann = image.annotations[index];
      auto& stats = summary.per_class[ann.class_label];
      ++stats.attempted;
      if (result.boundary) {
        ann.boundary = std::move(result.boundary);
        ann.bbox = bbox_from_boundary(*ann.boundary);
        ann.quality = QualityFlag::ok;
      } else {
        ann.boundary.reset();
        ann.bbox.reset();
        ann.quality = QualityFlag::failed;
        ++stats.failed;
      }
    }
  }

  // Area screen: boundaries far from the same-class median area are kept but
  // flagged poor so a human can review them.
  std::map<std::string, std::vector<double>> areas;
  for (const AnnotatedImage& image : images) {
    for (const InstanceAnnotation& ann : image.annotations) {
      if (selected(ann) && ann.boundary) {
        areas[ann.class_label].push_back(polygon_area(*ann.boundary));
      }
    }
  }
  std::map<std::string, double> median_area;
  for (auto& [label, values] : areas) {
    std::sort(values.begin(), values.end());
    median_area[label] = values[values.size() / 2];
  }
  for (AnnotatedImage& image : images) {
    for (InstanceAnnotation& ann : image.annotations) {
      if (!selected(ann) || !ann.boundary || ann.quality != QualityFlag::ok) {
        continue;
      }
      const double median = median_area[ann.class_label];
      if (median <= 0.0) continue;
      const double area = polygon_area(*ann.boundary);
      if (area > 4.0 * median || area < 0.25 * median) {
        ann.quality = QualityFlag::poor;
        ++summary.per_class[ann.class_label].poor;
      }
    }
  }
  return summary;
}

std::string to_string(CorrectionReason reason) {
  switch (reason) {
    case CorrectionReason::background_included:
      return "background_included";
    case CorrectionReason::part_excluded:
      return "part_excluded";
    case CorrectionReason::other:
      return "other";
  }
  return "other";
}

CorrectionReason correction_reason_from_string(const std::string& s) {
  if (s == "background_included") return CorrectionReason::background_included;
  if (s == "part_excluded") return CorrectionReason::part_excluded;
  if (s == "other") return CorrectionReason::other;
  throw DataError("unknown correction reason: '" + s + "'");
}

std::size_t CorrectionAudit::applied_count() const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(),
                    [](const CorrectionAuditEntry& e) { return e.applied; }));
}

std::size_t CorrectionAudit::rejected_count() const {
  return entries.size() - applied_count();
}

CorrectionAudit apply_corrections(std::vector<AnnotatedImage>& images,
                                  const std::vector<CorrectionRecord>& corrections) {
  CorrectionAudit audit;
  for (const CorrectionRecord& record : corrections) {
    CorrectionAuditEntry entry{record.image_id, record.annotation_id, false, ""};
    auto image_it = std::find_if(
        images.begin(), images.end(), [&](const AnnotatedImage& img) {
          return img.image_id == record.image_id;
        });
    if (image_it == images.end()) {
      entry.detail = "unknown image_id";
      audit.entries.push_back(std::move(entry));
      continue;
    }
    auto ann_it = std::find_if(
        image_it->annotations.begin(), image_it->annotations.end(),
        [&](const InstanceAnnotation& ann) { return ann.id == record.annotation_id; });
    if (ann_it == image_it->annotations.end()) {
      entry.detail = "unknown annotation_id";
      audit.entries.push_back(std::move(entry));
      continue;
    }
    if (record.corrected_boundary.vertices.size() < 3 ||
        polygon_area(record.corrected_boundary) <= 0.0) {
      entry.detail = "degenerate corrected boundary";
      audit.entries.push_back(std::move(entry));
      continue;
    }
    ann_it->boundary = record.corrected_boundary;
    ann_it->bbox = bbox_from_boundary(record.corrected_boundary);
    ann_it->corrected = true;
    ann_it->quality = QualityFlag::ok;
    entry.applied = true;
    entry.detail = "boundary replaced (" + to_string(record.reason) + ")";
    audit.entries.push_back(std::move(entry));
  }
  return audit;
}

std::vector<CorrectionRecord> load_corrections(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corrections file: " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("corrections file is not valid JSON: " + std::string(e.what()));
  }
  if (!doc.is_array()) {
    throw DataError("corrections file must be a JSON array");
  }
  std::vector<CorrectionRecord> records;
  for (const auto& item : doc) {
    CorrectionRecord record;
    record.image_id = item.at("image_id").get<std::string>();
    record.annotation_id = item.at("annotation_id").get<std::string>();
    for (const auto& vertex : item.at("boundary")) {
      record.corrected_boundary.vertices.push_back(
          Point{vertex.at(0).get<double>(), vertex.at(1).get<double>()});
    }
    record.reason = correction_reason_from_string(
        item.value("reason", std::string("other")));
    records.push_back(std::move(record));
  }
  return records;
}

void save_corrections(const std::filesystem::path& path,
                      const std::vector<CorrectionRecord>& corrections) {
  nlohmann::json doc = nlohmann::json::array();
  for (const CorrectionRecord& record : corrections) {
    nlohmann::json boundary = nlohmann::json::array();
    for (const Point& p : record.corrected_boundary.vertices) {
      boundary.push_back({p.x, p.y});
    }
    doc.push_back({{"image_id", record.image_id},
                   {"annotation_id", record.annotation_id},
                   {"boundary", std::move(boundary)},
                   {"reason", to_string(record.reason)}});
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write corrections file: " + path.string());
  out << doc.dump(2) << "\n";
}

}  // namespace pointdet
