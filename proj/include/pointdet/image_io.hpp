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

#include <array>
#include <filesystem>

#include "pointdet/annotations.hpp"

namespace pointdet {

// Pixel files are binary PPM (P6, maxval 255): self-contained, exact, and
// trivially diffable, which matters for byte-identity checks.
ImageBuffer read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const ImageBuffer& image);

// Overlay helpers for the augmentation preview output.
void draw_box(ImageBuffer& image, const BoundingBox& box,
              std::array<std::uint8_t, 3> color);
void draw_boundary(ImageBuffer& image, const SegmentationBoundary& boundary,
                   std::array<std::uint8_t, 3> color);

}  // namespace pointdet
