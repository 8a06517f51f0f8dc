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

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pointdet/geometry.hpp"

namespace pointdet {

enum class QualityFlag { ok, failed, poor };

std::string to_string(QualityFlag flag);
QualityFlag quality_flag_from_string(const std::string& s);

// One labelled object instance. The point is the original annotation; the
// boundary (when present) was produced by a segmenter or a human correction,
// and bbox must always equal bbox_from_boundary(boundary) when both exist.
struct InstanceAnnotation {
  std::string id;
  std::string class_label;
  Point point;
  std::optional<SegmentationBoundary> boundary;
  std::optional<BoundingBox> bbox;
  bool corrected = false;
  QualityFlag quality = QualityFlag::ok;

  friend bool operator==(const InstanceAnnotation&,
                         const InstanceAnnotation&) = default;
};

// Interleaved 8-bit RGB, row-major.
struct ImageBuffer {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  ImageBuffer() = default;
  ImageBuffer(int w, int h) : width(w), height(h), rgb(size_t(w) * h * 3, 0) {}

  std::uint8_t at(int x, int y, int c) const {
    return rgb[(size_t(y) * width + x) * 3 + c];
  }
  void set(int x, int y, int c, std::uint8_t v) {
    rgb[(size_t(y) * width + x) * 3 + c] = v;
  }
  void set_rgb(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    const std::size_t i = (size_t(y) * width + x) * 3;
    rgb[i] = r;
    rgb[i + 1] = g;
    rgb[i + 2] = b;
  }
  bool empty() const { return rgb.empty(); }
  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;
};

struct AnnotatedImage {
  std::string image_id;
  std::string pixel_path;  // relative to the dataset's pixel root; may be ""
  int width = 0;
  int height = 0;
  std::int64_t captured_at = 0;  // UTC unix seconds
  std::vector<InstanceAnnotation> annotations;
  ImageBuffer pixels;  // empty unless loaded

  bool has_pixels() const { return !pixels.empty(); }
};

struct ValidationIssue {
  std::string image_id;
  std::string annotation_id;  // empty for image-level issues
  std::string kind;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  bool clean() const { return issues.empty(); }
};

/// Checks every dataset invariant: unique image and annotation ids, geometry
/// within image bounds, bbox consistent with boundary, corrected implies
/// boundary present, valid boxes and polygons. Violations become report
/// entries; nothing throws.
ValidationReport validate_dataset(const std::vector<AnnotatedImage>& images);

}  // namespace pointdet
