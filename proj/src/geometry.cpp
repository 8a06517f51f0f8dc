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
#include "pointdet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>

namespace pointdet {

bool BoundingBox::valid() const {
  return std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) &&
         std::isfinite(y_max) && x_min < x_max && y_min < y_max;
}

std::size_t InstanceMask::set_count() const {
  return static_cast<std::size_t>(
      std::count_if(bits.begin(), bits.end(), [](std::uint8_t b) { return b != 0; }));
}

double polygon_area(const SegmentationBoundary& boundary) {
  const auto& v = boundary.vertices;
  if (v.size() < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Point& a = v[i];
    const Point& b = v[(i + 1) % v.size()];
    twice += a.x * b.y - b.x * a.y;
  }
  return std::abs(twice) / 2.0;
}

bool point_in_polygon(const Point& p, const SegmentationBoundary& boundary) {
  const auto& v = boundary.vertices;
  bool inside = false;
  for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
    // Half-open edge rule: counts edges straddling the ray's y, skips
    // horizontal edges, and never double-counts a vertex.
    if ((v[i].y > p.y) != (v[j].y > p.y)) {
      const double t = (p.y - v[i].y) / (v[j].y - v[i].y);
      const double cross_x = v[i].x + t * (v[j].x - v[i].x);
      if (p.x < cross_x) inside = !inside;
    }
  }
  return inside;
}

BoundingBox bbox_from_boundary(const SegmentationBoundary& boundary) {
  const auto& v = boundary.vertices;
  if (v.size() < 3) {
    throw GeometryError("bbox_from_boundary: polygon has " +
                        std::to_string(v.size()) + " vertices, need >= 3");
  }
  if (polygon_area(boundary) <= 0.0) {
    throw GeometryError("bbox_from_boundary: polygon encloses zero area");
  }
  BoundingBox box{v[0].x, v[0].y, v[0].x, v[0].y};
  for (const Point& p : v) {
    box.x_min = std::min(box.x_min, p.x);
    box.y_min = std::min(box.y_min, p.y);
    box.x_max = std::max(box.x_max, p.x);
    box.y_max = std::max(box.y_max, p.y);
  }
  return box;
}

InstanceMask rasterize_boundary(const SegmentationBoundary& boundary, int width,
                                int height) {
  if (width < 1 || height < 1) {
    throw GeometryError("rasterize_boundary: raster dimensions must be >= 1");
  }
  InstanceMask mask(width, height);
  const auto& v = boundary.vertices;
  if (v.size() < 3) return mask;

  std::vector<double> crossings;
  for (int row = 0; row < height; ++row) {
    const double cy = row + 0.5;
    crossings.clear();
    for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
      if ((v[i].y > cy) != (v[j].y > cy)) {
        const double t = (cy - v[i].y) / (v[j].y - v[i].y);
        crossings.push_back(v[i].x + t * (v[j].x - v[i].x));
      }
    }
    if (crossings.empty()) continue;
    std::sort(crossings.begin(), crossings.end());
    for (int col = 0; col < width; ++col) {
      const double cx = col + 0.5;
      // Pixel center is inside iff an odd number of crossings lie strictly
      // to its right; equivalent to the point_in_polygon ray test.
      const auto it = std::upper_bound(crossings.begin(), crossings.end(), cx);
      const std::size_t right = crossings.size() - (it - crossings.begin());
      if (right % 2 == 1) mask.set(col, row, true);
    }
  }
  return mask;
}

InstanceMask mask_from_boundary(const SegmentationBoundary& boundary, int width,
                                int height) {
  if (boundary.vertices.size() < 3 || polygon_area(boundary) <= 0.0) {
    throw GeometryError("mask_from_boundary: degenerate polygon");
  }
  InstanceMask mask = rasterize_boundary(boundary, width, height);
  if (mask.set_count() == 0) {
    throw GeometryError(
        "mask_from_boundary: polygon covers no pixel center on a " +
        std::to_string(width) + "x" + std::to_string(height) + " raster");
  }
  return mask;
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  if (!a.valid() || !b.valid()) {
    throw GeometryError("iou: invalid bounding box");
  }
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return inter / uni;
}

namespace {

// Clips a vertex loop against one half-plane `keep(p) == true`, with
// `intersect` producing the crossing point on the half-plane edge.
template <typename Keep, typename Intersect>
std::vector<Point> clip_half_plane(const std::vector<Point>& poly, Keep keep,
                                   Intersect intersect) {
  std::vector<Point> out;
  out.reserve(poly.size() + 4);
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point& cur = poly[i];
    const Point& prev = poly[(i + poly.size() - 1) % poly.size()];
    const bool cur_in = keep(cur);
    const bool prev_in = keep(prev);
    if (cur_in) {
      if (!prev_in) out.push_back(intersect(prev, cur));
      out.push_back(cur);
    } else if (prev_in) {
      out.push_back(intersect(prev, cur));
    }
  }
  return out;
}

Point intersect_vertical(const Point& a, const Point& b, double x) {
  const double t = (x - a.x) / (b.x - a.x);
  return Point{x, a.y + t * (b.y - a.y)};
}

Point intersect_horizontal(const Point& a, const Point& b, double y) {
  const double t = (y - a.y) / (b.y - a.y);
  return Point{a.x + t * (b.x - a.x), y};
}

}  // namespace

std::optional<SegmentationBoundary> clip_boundary(
    const SegmentationBoundary& boundary, const BoundingBox& window) {
  if (!window.valid()) throw GeometryError("clip_boundary: invalid window");
  std::vector<Point> poly = boundary.vertices;
  if (poly.size() < 3) return std::nullopt;

  poly = clip_half_plane(
      poly, [&](const Point& p) { return p.x >= window.x_min; },
      [&](const Point& a, const Point& b) {
        return intersect_vertical(a, b, window.x_min);
      });
  if (poly.size() >= 3)
    poly = clip_half_plane(
        poly, [&](const Point& p) { return p.x <= window.x_max; },
        [&](const Point& a, const Point& b) {
          return intersect_vertical(a, b, window.x_max);
        });
  if (poly.size() >= 3)
    poly = clip_half_plane(
        poly, [&](const Point& p) { return p.y >= window.y_min; },
        [&](const Point& a, const Point& b) {
          return intersect_horizontal(a, b, window.y_min);
        });
  if (poly.size() >= 3)
    poly = clip_half_plane(
        poly, [&](const Point& p) { return p.y <= window.y_max; },
        [&](const Point& a, const Point& b) {
          return intersect_horizontal(a, b, window.y_max);
        });

  // Drop consecutive duplicates introduced by clipping at corners.
  std::vector<Point> dedup;
  for (const Point& p : poly) {
    if (dedup.empty() || !(dedup.back() == p)) dedup.push_back(p);
  }
  while (dedup.size() > 1 && dedup.front() == dedup.back()) dedup.pop_back();

  SegmentationBoundary clipped{std::move(dedup)};
  if (clipped.vertices.size() < 3 || polygon_area(clipped) <= 1e-12) {
    return std::nullopt;
  }
  return clipped;
}

InstanceMask fill_holes(const InstanceMask& mask) {
  const int w = mask.width;
  const int h = mask.height;
  // Flood the complement from the border; anything unreached is a hole.
  std::vector<std::uint8_t> outside(size_t(w) * h, 0);
  std::deque<std::pair<int, int>> queue;
  auto push = [&](int x, int y) {
    if (x < 0 || y < 0 || x >= w || y >= h) return;
    const std::size_t idx = size_t(y) * w + x;
    if (outside[idx] || mask.bits[idx]) return;
    outside[idx] = 1;
    queue.emplace_back(x, y);
  };
  for (int x = 0; x < w; ++x) {
    push(x, 0);
    push(x, h - 1);
  }
  for (int y = 0; y < h; ++y) {
    push(0, y);
    push(w - 1, y);
  }
  while (!queue.empty()) {
    auto [x, y] = queue.front();
    queue.pop_front();
    push(x + 1, y);
    push(x - 1, y);
    push(x, y + 1);
    push(x, y - 1);
  }
  InstanceMask filled = mask;
  for (std::size_t i = 0; i < filled.bits.size(); ++i) {
    if (!outside[i]) filled.bits[i] = 1;
  }
  return filled;
}

namespace {

struct GridVertex {
  int x, y;
  bool operator<(const GridVertex& o) const {
    return y != o.y ? y < o.y : x < o.x;
  }
  bool operator==(const GridVertex& o) const { return x == o.x && y == o.y; }
};

// Directions: 0 = +x, 1 = +y, 2 = -x, 3 = -y.
constexpr int kDx[4] = {1, 0, -1, 0};
constexpr int kDy[4] = {0, 1, 0, -1};

}  // namespace

SegmentationBoundary boundary_from_mask(const InstanceMask& mask) {
  if (mask.set_count() == 0) {
    throw GeometryError("boundary_from_mask: mask has no set pixels");
  }
  InstanceMask filled = fill_holes(mask);
  const int w = filled.width;
  const int h = filled.height;
  auto is_set = [&](int x, int y) {
    return x >= 0 && y >= 0 && x < w && y < h && filled.at(x, y);
  };

  // Directed boundary edges, clockwise around each set pixel (y grows down).
  // Key: start vertex -> outgoing directions.
  std::map<GridVertex, std::vector<int>> outgoing;
  std::size_t edge_count = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!filled.at(x, y)) continue;
      if (!is_set(x, y - 1)) {
        outgoing[{x, y}].push_back(0);
        ++edge_count;
      }
      if (!is_set(x + 1, y)) {
        outgoing[{x + 1, y}].push_back(1);
        ++edge_count;
      }
      if (!is_set(x, y + 1)) {
        outgoing[{x + 1, y + 1}].push_back(2);
        ++edge_count;
      }
      if (!is_set(x - 1, y)) {
        outgoing[{x, y + 1}].push_back(3);
        ++edge_count;
      }
    }
  }

  const GridVertex start = outgoing.begin()->first;
  std::vector<GridVertex> loop;
  GridVertex cur = start;
  int incoming_dir = -1;
  std::size_t used = 0;
  do {
    auto it = outgoing.find(cur);
    if (it == outgoing.end() || it->second.empty()) {
      throw GeometryError("boundary_from_mask: broken edge chain");
    }
    auto& dirs = it->second;
    // At checkerboard corners two edges leave the same vertex; take the
    // sharpest right turn so the traced loop stays simple.
    int chosen_idx = 0;
    if (dirs.size() > 1 && incoming_dir >= 0) {
      int best_rank = 5;
      for (std::size_t i = 0; i < dirs.size(); ++i) {
        const int turn = (dirs[i] - incoming_dir + 4) % 4;  // 3=right, 0=straight, 1=left
        const int rank = turn == 3 ? 0 : (turn == 0 ? 1 : (turn == 1 ? 2 : 4));
        if (rank < best_rank) {
          best_rank = rank;
          chosen_idx = static_cast<int>(i);
        }
      }
    }
    const int dir = dirs[chosen_idx];
    dirs.erase(dirs.begin() + chosen_idx);
    loop.push_back(cur);
    cur = GridVertex{cur.x + kDx[dir], cur.y + kDy[dir]};
    incoming_dir = dir;
    ++used;
  } while (!(cur == start));

  if (used != edge_count) {
    throw GeometryError(
        "boundary_from_mask: mask region is not a single connected component");
  }

  // Merge collinear runs.
  std::vector<Point> verts;
  const std::size_t n = loop.size();
  for (std::size_t i = 0; i < n; ++i) {
    const GridVertex& prev = loop[(i + n - 1) % n];
    const GridVertex& here = loop[i];
    const GridVertex& next = loop[(i + 1) % n];
    const bool collinear = (prev.x == here.x && here.x == next.x) ||
                           (prev.y == here.y && here.y == next.y);
    if (!collinear) {
      verts.push_back(Point{static_cast<double>(here.x), static_cast<double>(here.y)});
    }
  }
  return SegmentationBoundary{std::move(verts)};
}

}  // namespace pointdet
