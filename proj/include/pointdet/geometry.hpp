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
#include <vector>

#include "pointdet/errors.hpp"

namespace pointdet {

struct Point {
  double x = 0.0;  // pixel column
  double y = 0.0;  // pixel row
  friend bool operator==(const Point&, const Point&) = default;
};

// Axis-aligned box in continuous pixel coordinates. x_max/y_max are
// exclusive for rasterization and treated as real interval ends for area
// math, so area() = (x_max - x_min) * (y_max - y_min) exactly.
struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  bool valid() const;
  bool contains(const Point& p) const {
    return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max;
  }
  bool contains(const BoundingBox& b) const {
    return b.x_min >= x_min && b.x_max <= x_max && b.y_min >= y_min &&
           b.y_max <= y_max;
  }
  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

// Closed polygon; the edge from the last vertex back to the first is
// implicit. Interior is defined by the even-odd rule.
struct SegmentationBoundary {
  std::vector<Point> vertices;
  friend bool operator==(const SegmentationBoundary&,
                         const SegmentationBoundary&) = default;
};

// Binary occupancy raster, row-major, one byte per pixel.
struct InstanceMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  InstanceMask() = default;
  InstanceMask(int w, int h) : width(w), height(h), bits(size_t(w) * h, 0) {}

  bool at(int x, int y) const { return bits[size_t(y) * width + x] != 0; }
  void set(int x, int y, bool v) { bits[size_t(y) * width + x] = v ? 1 : 0; }
  std::size_t set_count() const;
  bool empty() const { return set_count() == 0; }
  friend bool operator==(const InstanceMask&, const InstanceMask&) = default;
};

/// Signed shoelace area of the polygon (positive magnitude returned).
double polygon_area(const SegmentationBoundary& boundary);

/// Even-odd point-in-polygon test. Points exactly on an edge are
/// resolved by the crossing rule (half-open edges); callers that need a
/// guaranteed answer should avoid querying edge points.
bool point_in_polygon(const Point& p, const SegmentationBoundary& boundary);

/// Axis-aligned extents of the vertex set.
/// Throws GeometryError for polygons with fewer than 3 vertices or zero
/// enclosed area.
BoundingBox bbox_from_boundary(const SegmentationBoundary& boundary);

/// Rasterizes the polygon onto a width x height grid: pixel (x, y) is set
/// iff its center (x + 0.5, y + 0.5) lies inside the polygon (even-odd).
/// May return an all-zero mask; see mask_from_boundary for the checked form.
InstanceMask rasterize_boundary(const SegmentationBoundary& boundary,
                                int width, int height);

/// Checked rasterization: as rasterize_boundary, but a polygon that covers
/// no pixel center (e.g. entirely outside the raster) is a GeometryError.
InstanceMask mask_from_boundary(const SegmentationBoundary& boundary,
                                int width, int height);

/// Intersection-over-union of two valid boxes; 0 when disjoint.
double iou(const BoundingBox& a, const BoundingBox& b);

/// Clips a polygon to a rectangular window (Sutherland-Hodgman). Returns
/// nullopt when nothing with positive area survives.
std::optional<SegmentationBoundary> clip_boundary(
    const SegmentationBoundary& boundary, const BoundingBox& window);

/// Traces the outline of a mask's set-pixel region as a rectilinear polygon
/// on the pixel grid. Interior holes are filled first, so rasterizing the
/// result reproduces the hole-filled input exactly. The mask must contain at
/// least one set pixel.
SegmentationBoundary boundary_from_mask(const InstanceMask& mask);

/// Fills enclosed holes: pixels not reachable from the raster border
/// through unset pixels (4-connectivity) become set.
InstanceMask fill_holes(const InstanceMask& mask);

}  // namespace pointdet
