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
#include <filesystem>
#include <string>

namespace pointdet {

// Synthetic "species" imagery: uniformly coloured shapes on a noisy seafloor-
// style background. Six base shapes and one novel shape, each with a colour
// the reference segmenter can flood exactly. Point annotations land on the
// shape interior, mirroring point-export workflows.
struct SynthConfig {
  int novel_images = 120;
  int base_images = 30;
  int min_instances_per_base_image = 3;
  int max_instances_per_base_image = 7;
  int min_shape_size = 20;
  int max_shape_size = 30;
  std::uint64_t seed = 7;
  std::string novel_label = "handstar";
};

struct SynthOutput {
  std::filesystem::path novel_csv;
  std::filesystem::path base_csv;
  std::filesystem::path images_dir;
};

/// Writes PPM images plus two point-annotation CSV exports (novel and base)
/// under out_dir. Novel images carry exactly one novel instance; base images
/// carry several instances of the six base species. Deterministic in the
/// seed.
SynthOutput generate_synthetic_dataset(const std::filesystem::path& out_dir,
                                       const SynthConfig& config);

}  // namespace pointdet
