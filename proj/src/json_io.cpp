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
#include "pointdet/json_io.hpp"

namespace pointdet {

nlohmann::json boundary_to_json(const SegmentationBoundary& boundary) {
  nlohmann::json verts = nlohmann::json::array();
  for (const Point& p : boundary.vertices) verts.push_back({p.x, p.y});
  return verts;
}

SegmentationBoundary boundary_from_json(const nlohmann::json& j) {
  SegmentationBoundary boundary;
  for (const auto& vertex : j) {
    boundary.vertices.push_back(
        Point{vertex.at(0).get<double>(), vertex.at(1).get<double>()});
  }
  return boundary;
}

nlohmann::json annotation_to_json(const InstanceAnnotation& ann) {
  nlohmann::json j{{"id", ann.id},
                   {"class_label", ann.class_label},
                   {"point", {ann.point.x, ann.point.y}},
                   {"corrected", ann.corrected},
                   {"quality", to_string(ann.quality)}};
  j["boundary"] = ann.boundary ? boundary_to_json(*ann.boundary) : nlohmann::json();
  if (ann.bbox) {
    j["bbox"] = {ann.bbox->x_min, ann.bbox->y_min, ann.bbox->x_max, ann.bbox->y_max};
  } else {
    j["bbox"] = nullptr;
  }
  return j;
}

InstanceAnnotation annotation_from_json(const nlohmann::json& j) {
  InstanceAnnotation ann;
  ann.id = j.at("id").get<std::string>();
  ann.class_label = j.at("class_label").get<std::string>();
  ann.point = Point{j.at("point").at(0).get<double>(), j.at("point").at(1).get<double>()};
  ann.corrected = j.at("corrected").get<bool>();
  ann.quality = quality_flag_from_string(j.at("quality").get<std::string>());
  if (!j.at("boundary").is_null()) ann.boundary = boundary_from_json(j.at("boundary"));
  if (!j.at("bbox").is_null()) {
    const auto& b = j.at("bbox");
    ann.bbox = BoundingBox{b.at(0).get<double>(), b.at(1).get<double>(),
                           b.at(2).get<double>(), b.at(3).get<double>()};
  }
  return ann;
}

}  // namespace pointdet
