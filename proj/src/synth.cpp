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
#include "pointdet/synth.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <vector>

#include "pointdet/dataset.hpp"
#include "pointdet/geometry.hpp"
#include "pointdet/image_io.hpp"
#include "pointdet/rng.hpp"

namespace pointdet {

namespace {

struct Rgb {
  int r, g, b;
};

constexpr Rgb kBackground{40, 60, 70};

struct Species {
  const char* label;
  Rgb color;
};

// Base species palette: every colour keeps at least one channel more than
// 100 counts away from the background and from every other species, so
// flood fills never bleed between classes.
constexpr std::array<Species, 6> kBaseSpecies{{
    {"disc_red", {220, 60, 60}},
    {"square_green", {60, 200, 60}},
    {"triangle_blue", {70, 90, 230}},
    {"diamond_yellow", {230, 210, 60}},
    {"hbar_magenta", {200, 70, 200}},
    {"vbar_cyan", {60, 210, 210}},
}};

constexpr Rgb kNovelColor{245, 150, 40};

struct PlacedShape {
  std::string label;
  InstanceMask mask;  // full-image raster
  int anchor_x = 0, anchor_y = 0;  // a guaranteed interior pixel
  BoundingBox extent{0, 0, 0, 0};
};

InstanceMask shape_mask(const std::string& label, int size, int cx, int cy, int w,
                        int h) {
  InstanceMask mask(w, h);
  const double half = size / 2.0;
  auto paint_if = [&](auto&& predicate) {
    for (int y = std::max(0, cy - size); y <= std::min(h - 1, cy + size); ++y) {
      for (int x = std::max(0, cx - size); x <= std::min(w - 1, cx + size); ++x) {
        if (predicate(x - cx, y - cy)) mask.set(x, y, true);
      }
    }
  };

  if (label == "disc_red") {
    paint_if([&](int dx, int dy) { return dx * dx + dy * dy <= half * half; });
  } else if (label == "square_green") {
    paint_if([&](int dx, int dy) {
      return std::abs(dx) <= half && std::abs(dy) <= half;
    });
  } else if (label == "triangle_blue") {
    paint_if([&](int dx, int dy) {
      // Upward isoceles triangle.
      return dy >= -half && dy <= half &&
             std::abs(dx) <= (dy + half) * 0.5;
    });
  } else if (label == "diamond_yellow") {
    paint_if([&](int dx, int dy) { return std::abs(dx) + std::abs(dy) <= half; });
  } else if (label == "hbar_magenta") {
    paint_if([&](int dx, int dy) {
      return std::abs(dx) <= half && std::abs(dy) <= half * 0.45;
    });
  } else if (label == "vbar_cyan") {
    paint_if([&](int dx, int dy) {
      return std::abs(dy) <= half && std::abs(dx) <= half * 0.45;
    });
  } else {
    // Novel species: a five-armed star, rasterized from its polygon.
    SegmentationBoundary star;
    const double inner = half * 0.55;
    for (int k = 0; k < 10; ++k) {
      const double radius = k % 2 == 0 ? half : inner;
      const double angle = -3.14159265358979323846 / 2.0 + k * 3.14159265358979323846 / 5.0;
      star.vertices.push_back(Point{cx + 0.5 + radius * std::cos(angle),
                                    cy + 0.5 + radius * std::sin(angle)});
    }
    mask = rasterize_boundary(star, w, h);
  }
  return mask;
}

ImageBuffer background_image(int w, int h, Rng& rng) {
  ImageBuffer image(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      auto jitter = [&](int base) {
        // +/-12 exceeds the segmenter tolerance, so the seafloor never reads
        // as one near-uniform region.
        return static_cast<std::uint8_t>(
            std::clamp(base + static_cast<int>(rng.uniform_u64(25)) - 12, 0, 255));
      };
      image.set_rgb(x, y, jitter(kBackground.r), jitter(kBackground.g),
                    jitter(kBackground.b));
    }
  }
  return image;
}

void paint_shape(ImageBuffer& image, const InstanceMask& mask, Rgb color, Rng& rng) {
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.at(x, y)) continue;
      auto near = [&](int base) {
        // +/-3 stays within the segmenter tolerance: one flood per shape.
        return static_cast<std::uint8_t>(
            std::clamp(base + static_cast<int>(rng.uniform_u64(7)) - 3, 0, 255));
      };
      image.set_rgb(x, y, near(color.r), near(color.g), near(color.b));
    }
  }
}

// Places a shape that keeps a 3-pixel corridor to previously placed ones.
std::optional<PlacedShape> try_place(const std::string& label, Rgb color,
                                     ImageBuffer& image,
                                     std::vector<BoundingBox>& occupied, Rng& rng,
                                     int min_size, int max_size) {
  const int w = image.width;
  const int h = image.height;
  for (int attempt = 0; attempt < 40; ++attempt) {
    const int size =
        min_size + static_cast<int>(rng.uniform_u64(max_size - min_size + 1));
    const int margin = size / 2 + 3;
    if (w - 2 * margin <= 0 || h - 2 * margin <= 0) continue;
    const int cx = margin + static_cast<int>(rng.uniform_u64(w - 2 * margin));
    const int cy = margin + static_cast<int>(rng.uniform_u64(h - 2 * margin));
    const BoundingBox padded{double(cx - margin), double(cy - margin),
                             double(cx + margin), double(cy + margin)};
    bool clash = false;
    for (const BoundingBox& other : occupied) {
      if (iou(padded, other) > 0.0) {
        clash = true;
        break;
      }
    }
    if (clash) continue;

    PlacedShape placed;
    placed.label = label;
    placed.mask = shape_mask(label, size, cx, cy, w, h);
    if (placed.mask.set_count() < 12) continue;
    placed.anchor_x = cx;
    placed.anchor_y = cy;
    if (!placed.mask.at(cx, cy)) {
      bool found = false;
      for (int y = 0; y < h && !found; ++y) {
        for (int x = 0; x < w && !found; ++x) {
          if (placed.mask.at(x, y)) {
            placed.anchor_x = x;
            placed.anchor_y = y;
            found = true;
          }
        }
      }
    }
    paint_shape(image, placed.mask, color, rng);
    occupied.push_back(padded);

    int min_x = w, min_y = h, max_x = -1, max_y = -1;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (!placed.mask.at(x, y)) continue;
        min_x = std::min(min_x, x);
        min_y = std::min(min_y, y);
        max_x = std::max(max_x, x);
        max_y = std::max(max_y, y);
      }
    }
    placed.extent = BoundingBox{double(min_x), double(min_y), double(max_x + 1),
                                double(max_y + 1)};
    return placed;
  }
  return std::nullopt;
}

std::pair<int, int> pick_dimensions(Rng& rng) {
  switch (rng.uniform_u64(3)) {
    case 0:
      return {96, 96};
    case 1:
      return {112, 96};
    default:
      return {96, 112};
  }
}

}  // namespace

SynthOutput generate_synthetic_dataset(const std::filesystem::path& out_dir,
                                       const SynthConfig& config) {
  namespace fs = std::filesystem;
  const fs::path images_dir = out_dir / "images";
  fs::create_directories(images_dir);

  Rng rng(config.seed);
  const std::int64_t epoch_start = parse_timestamp("2009-01-01T00:00:00Z");

  const char* header =
      "image_path,image_id,captured_at,class_label,point_x,point_y,image_width,"
      "image_height\n";

  std::ofstream novel_csv(out_dir / "novel.csv");
  std::ofstream base_csv(out_dir / "base.csv");
  if (!novel_csv || !base_csv) {
    throw DataError("cannot write synthetic CSV exports under " + out_dir.string());
  }
  novel_csv << header;
  base_csv << header;

  auto emit_row = [&](std::ofstream& csv, const std::string& image_id,
                      std::int64_t captured_at, const std::string& label,
                      const PlacedShape& shape, int w, int h) {
    csv << "images/" << image_id << ".ppm," << image_id << ","
        << format_timestamp(captured_at) << "," << label << ","
        << shape.anchor_x + 0.5 << "," << shape.anchor_y + 0.5 << "," << w << ","
        << h << "\n";
  };

  for (int i = 0; i < config.novel_images; ++i) {
    const auto [w, h] = pick_dimensions(rng);
    ImageBuffer image = background_image(w, h, rng);
    std::vector<BoundingBox> occupied;
    const auto novel_shape =
        try_place(config.novel_label, kNovelColor, image, occupied, rng,
                  config.min_shape_size, config.max_shape_size);
    if (!novel_shape) {
      throw PipelineError("synthetic generator failed to place a novel instance");
    }
    const std::string image_id =
        "novel_" + std::to_string(10000 + i);  // zero-padded, sortable
    // One novel instance per image; capture dates advance one day at a time
    // so the recency split slices the tail.
    emit_row(novel_csv, image_id, epoch_start + std::int64_t(i) * 86400,
             config.novel_label, *novel_shape, w, h);
    write_ppm(images_dir / (image_id + ".ppm"), image);
  }

  for (int i = 0; i < config.base_images; ++i) {
    const auto [w, h] = pick_dimensions(rng);
    ImageBuffer image = background_image(w, h, rng);
    std::vector<BoundingBox> occupied;
    const int instances =
        config.min_instances_per_base_image +
        static_cast<int>(rng.uniform_u64(config.max_instances_per_base_image -
                                         config.min_instances_per_base_image + 1));
    const std::string image_id = "base_" + std::to_string(10000 + i);
    const std::int64_t captured_at =
        epoch_start + std::int64_t(400 + i) * 86400;
    int placed_count = 0;
    for (int k = 0; k < instances; ++k) {
      const Species& species = kBaseSpecies[rng.uniform_u64(kBaseSpecies.size())];
      if (const auto placed =
              try_place(species.label, species.color, image, occupied, rng,
                        config.min_shape_size, config.max_shape_size)) {
        emit_row(base_csv, image_id, captured_at, species.label, *placed, w, h);
        ++placed_count;
      }
    }
    if (placed_count == 0) {
      // Guarantee at least one annotation per base image.
      const Species& species = kBaseSpecies[i % kBaseSpecies.size()];
      occupied.clear();
      if (const auto placed =
              try_place(species.label, species.color, image, occupied, rng,
                        config.min_shape_size, config.max_shape_size)) {
        emit_row(base_csv, image_id, captured_at, species.label, *placed, w, h);
      }
    }
    write_ppm(images_dir / (image_id + ".ppm"), image);
  }

  return SynthOutput{out_dir / "novel.csv", out_dir / "base.csv", images_dir};
}

}  // namespace pointdet
