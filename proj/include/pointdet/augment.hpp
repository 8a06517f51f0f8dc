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
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pointdet/annotations.hpp"
#include "pointdet/rng.hpp"

namespace pointdet {

enum class NovelMaskMode { none, bounding_box, segmentation };
enum class BaseMaskMode { none, segmentation };
enum class PasteMaskMode { bounding_box, segmentation };
enum class PasteDirection { novel_to_base, base_to_novel };

std::string to_string(NovelMaskMode mode);
std::string to_string(BaseMaskMode mode);
std::string to_string(PasteDirection direction);
NovelMaskMode novel_mask_mode_from_string(const std::string& s);
BaseMaskMode base_mask_mode_from_string(const std::string& s);

// The copy-paste recipe, one row of the ablation grid plus the knobs the
// protocol leaves open.
struct AugmentationConfig {
  bool copy_paste_enabled = false;
  NovelMaskMode novel_mask_mode = NovelMaskMode::none;
  BaseMaskMode base_mask_mode = BaseMaskMode::none;
  double apply_probability = 0.5;
  double crop_scale_low = 0.5;
  double crop_scale_high = 1.0;
  double occlusion_keep_threshold = 0.1;
  double flip_probability = 0.5;
  bool paste_all_instances = true;  // false: a random non-empty subset

  /// Throws UsageError when probabilities or scales are out of range, or when
  /// copy-paste is enabled with nothing to paste (both mask modes none).
  void validate() const;
};

struct Provenance {
  std::uint64_t seed = 0;
  std::string novel_image_id;
  std::optional<std::string> base_image_id;
  std::optional<PasteDirection> direction;
  std::optional<std::array<int, 4>> crop_window;  // x, y, width, height
  bool hflip = false;
  bool vflip = false;
  std::vector<std::string> pasted_ids;
  std::vector<std::string> skipped_ids;  // fell entirely outside the target
};

struct AugmentedSample {
  ImageBuffer pixels;
  std::vector<InstanceAnnotation> annotations;
  Provenance provenance;
};

/// Mirrors pixels and all geometry (points, polygons, boxes) horizontally
/// and/or vertically, each axis drawn independently with flip_probability.
void random_flip(AugmentedSample& sample, double flip_probability, Rng& rng);

/// Deterministic single-axis mirror, used by random_flip and tests.
void flip_horizontal(ImageBuffer& pixels, std::vector<InstanceAnnotation>& annotations);
void flip_vertical(ImageBuffer& pixels, std::vector<InstanceAnnotation>& annotations);

struct CropResult {
  ImageBuffer pixels;
  std::vector<InstanceAnnotation> annotations;
  std::array<int, 4> window{0, 0, 0, 0};
};

/// Samples a crop window of uniformly drawn scale that fully contains the
/// bbox of every must-keep annotation, translates and clips all geometry into
/// it, and drops annotations left without any visible area. When the
/// must-keep extent cannot fit a window at the sampled scale the window grows
/// to the smallest size that contains it (identity crop in the worst case).
CropResult constrained_random_crop(const ImageBuffer& pixels,
                                   const std::vector<InstanceAnnotation>& annotations,
                                   const std::vector<std::string>& must_keep_ids,
                                   Rng& rng, double scale_low, double scale_high);

struct PasteResult {
  ImageBuffer pixels;
  std::vector<InstanceAnnotation> annotations;
  std::vector<std::string> pasted_ids;
  std::vector<std::string> skipped_ids;
};

/// Copies the selected source instances onto the target at their source
/// coordinates: target pixels under each instance's mask (segmentation
/// raster, or the filled bbox in bounding_box mode) are replaced by source
/// pixels, clipped to target bounds. Pasted annotations are added with
/// clipped geometry; pre-existing target annotations occluded below
/// occlusion_keep_threshold of their original visible area are dropped, and
/// partially occluded survivors keep a recomputed visible bbox (their
/// boundary is removed, since it no longer matches the visible region).
PasteResult paste_instances(const ImageBuffer& target_pixels,
                            const std::vector<InstanceAnnotation>& target_annotations,
                            const ImageBuffer& source_pixels,
                            const std::vector<InstanceAnnotation>& source_instances,
                            const std::vector<std::string>& instance_ids,
                            PasteMaskMode mask_mode,
                            double occlusion_keep_threshold);

/// One fine-tuning sample. With probability 1 - apply_probability (or always,
/// when copy-paste is disabled) this is a flipped novel image; otherwise one
/// novel and one base image are drawn uniformly, a paste direction is chosen
/// (uniformly when both mask modes allow it, forced otherwise), the
/// novel-bearing image is cropped with its novel instances kept inside, the
/// paste is applied per the configured mask mode, and flips come last.
/// Byte-identical output is guaranteed for identical (pools, config, seed).
AugmentedSample make_training_sample(const std::vector<const AnnotatedImage*>& novel_pool,
                                     const std::vector<const AnnotatedImage*>& base_pool,
                                     const AugmentationConfig& config,
                                     const std::string& novel_label,
                                     std::uint64_t sample_seed);

nlohmann::json augmentation_config_to_json(const AugmentationConfig& config);
AugmentationConfig augmentation_config_from_json(const nlohmann::json& j);

/// Canonical byte serialization (pixels + annotations + provenance), used for
/// determinism checks and provenance digests.
std::vector<std::uint8_t> serialize_sample(const AugmentedSample& sample);

std::uint64_t sample_digest(const AugmentedSample& sample);

/// Writes <prefix>.ppm with annotation overlays plus <prefix>.json with the
/// sample's provenance, for visual inspection of the augmentation stream.
void write_preview(const AugmentedSample& sample,
                   const std::filesystem::path& prefix);

}  // namespace pointdet
