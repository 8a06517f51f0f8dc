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
#include "pointdet/annotations.hpp"

#include <cmath>
#include <set>

namespace pointdet {

std::string to_string(QualityFlag flag) {
  switch (flag) {
    case QualityFlag::ok:
      return "ok";
    case QualityFlag::failed:
      return "failed";
    case QualityFlag::poor:
      return "poor";
  }
  return "ok";
}

QualityFlag quality_flag_from_string(const std::string& s) {
  if (s == "ok") return QualityFlag::ok;
  if (s == "failed") return QualityFlag::failed;
  if (s == "poor") return QualityFlag::poor;
  throw DataError("unknown quality flag: '" + s + "'");
}

namespace {

constexpr double kBoxMatchTolerance = 1e-6;

bool in_bounds(const Point& p, int width, int height) {
  return std::isfinite(p.x) && std::isfinite(p.y) && p.x >= 0.0 && p.y >= 0.0 &&
         p.x <= width && p.y <= height;
}

}  // namespace

ValidationReport validate_dataset(const std::vector<AnnotatedImage>& images) {
  ValidationReport report;
  auto add = [&](const std::string& image_id, const std::string& ann_id,
                 const std::string& kind, const std::string& detail) {
    report.issues.push_back({image_id, ann_id, kind, detail});
  };

  std::set<std::string> seen_image_ids;
  std::set<std::string> seen_annotation_ids;

  for (const AnnotatedImage& image : images) {
    if (!seen_image_ids.insert(image.image_id).second) {
      add(image.image_id, "", "duplicate_image_id", "image_id appears more than once");
    }
    if (image.width < 1 || image.height < 1) {
      add(image.image_id, "", "invalid_dimensions",
          std::to_string(image.width) + "x" + std::to_string(image.height));
      continue;
    }
    for (const InstanceAnnotation& ann : image.annotations) {
      if (!seen_annotation_ids.insert(ann.id).second) {
        add(image.image_id, ann.id, "duplicate_annotation_id",
            "annotation id appears more than once");
      }
      if (!in_bounds(ann.point, image.width, image.height)) {
        add(image.image_id, ann.id, "point_out_of_bounds",
            "(" + std::to_string(ann.point.x) + ", " + std::to_string(ann.point.y) + ")");
      }
      if (ann.bbox) {
        if (!ann.bbox->valid()) {
          add(image.image_id, ann.id, "invalid_bbox", "non-finite or non-positive area");
        } else if (ann.bbox->x_min < 0.0 || ann.bbox->y_min < 0.0 ||
                   ann.bbox->x_max > image.width || ann.bbox->y_max > image.height) {
          add(image.image_id, ann.id, "bbox_out_of_bounds", "");
        }
      }
      if (ann.boundary) {
        const auto& verts = ann.boundary->vertices;
        if (verts.size() < 3 || polygon_area(*ann.boundary) <= 0.0) {
          add(image.image_id, ann.id, "degenerate_boundary",
              std::to_string(verts.size()) + " vertices");
        } else {
          for (const Point& p : verts) {
            if (!in_bounds(p, image.width, image.height)) {
              add(image.image_id, ann.id, "boundary_out_of_bounds", "");
              break;
            }
          }
          if (!ann.bbox) {
            add(image.image_id, ann.id, "missing_bbox",
                "boundary present but bbox absent");
          } else if (ann.bbox->valid()) {
            const BoundingBox derived = bbox_from_boundary(*ann.boundary);
            const double diff = std::max(
                {std::abs(derived.x_min - ann.bbox->x_min),
                 std::abs(derived.y_min - ann.bbox->y_min),
                 std::abs(derived.x_max - ann.bbox->x_max),
                 std::abs(derived.y_max - ann.bbox->y_max)});
            if (diff > kBoxMatchTolerance) {
              add(image.image_id, ann.id, "bbox_boundary_mismatch",
                  "max coordinate difference " + std::to_string(diff));
            }
          }
        }
      } else if (ann.corrected) {
        add(image.image_id, ann.id, "corrected_without_boundary", "");
      }
    }
  }
  return report;
}

}  // namespace pointdet
