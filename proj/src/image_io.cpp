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
#include "pointdet/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace pointdet {

ImageBuffer read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image file: " + path.string());

  std::string magic;
  in >> magic;
  if (magic != "P6") {
    throw DataError("not a binary PPM (P6) file: " + path.string());
  }
  auto next_token = [&]() -> long {
    // Skips whitespace and '#' comment lines between header fields.
    while (true) {
      int c = in.peek();
      if (c == '#') {
        std::string line;
        std::getline(in, line);
      } else if (std::isspace(c)) {
        in.get();
      } else {
        break;
      }
    }
    long value = -1;
    in >> value;
    return value;
  };
  const long width = next_token();
  const long height = next_token();
  const long maxval = next_token();
  if (width < 1 || height < 1 || maxval != 255) {
    throw DataError("unsupported PPM header in " + path.string());
  }
  in.get();  // single whitespace after maxval

  ImageBuffer image(static_cast<int>(width), static_cast<int>(height));
  in.read(reinterpret_cast<char*>(image.rgb.data()),
          static_cast<std::streamsize>(image.rgb.size()));
  if (in.gcount() != static_cast<std::streamsize>(image.rgb.size())) {
    throw DataError("truncated PPM data in " + path.string());
  }
  return image;
}

void write_ppm(const std::filesystem::path& path, const ImageBuffer& image) {
  if (image.empty()) throw DataError("write_ppm: empty image");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write image file: " + path.string());
  out << "P6\n" << image.width << " " << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.rgb.data()),
            static_cast<std::streamsize>(image.rgb.size()));
}

namespace {

void put(ImageBuffer& image, int x, int y, std::array<std::uint8_t, 3> c) {
  if (x < 0 || y < 0 || x >= image.width || y >= image.height) return;
  image.set_rgb(x, y, c[0], c[1], c[2]);
}

void line(ImageBuffer& image, double x0, double y0, double x1, double y1,
          std::array<std::uint8_t, 3> color) {
  const double dx = x1 - x0;
  const double dy = y1 - y0;
  const int steps = std::max(1, static_cast<int>(std::ceil(
                                    std::max(std::abs(dx), std::abs(dy)))));
  for (int i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    put(image, static_cast<int>(std::floor(x0 + t * dx)),
        static_cast<int>(std::floor(y0 + t * dy)), color);
  }
}

}  // namespace

void draw_box(ImageBuffer& image, const BoundingBox& box,
              std::array<std::uint8_t, 3> color) {
  line(image, box.x_min, box.y_min, box.x_max - 1, box.y_min, color);
  line(image, box.x_min, box.y_max - 1, box.x_max - 1, box.y_max - 1, color);
  line(image, box.x_min, box.y_min, box.x_min, box.y_max - 1, color);
  line(image, box.x_max - 1, box.y_min, box.x_max - 1, box.y_max - 1, color);
}

void draw_boundary(ImageBuffer& image, const SegmentationBoundary& boundary,
                   std::array<std::uint8_t, 3> color) {
  const auto& v = boundary.vertices;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Point& a = v[i];
    const Point& b = v[(i + 1) % v.size()];
    line(image, a.x, a.y, b.x, b.y, color);
  }
}

}  // namespace pointdet
