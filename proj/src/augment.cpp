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
#include "pointdet/augment.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include <json.hpp>

#include "pointdet/hash.hpp"
#include "pointdet/image_io.hpp"
#include "pointdet/json_io.hpp"

namespace pointdet {

std::string to_string(NovelMaskMode mode) {
  switch (mode) {
    case NovelMaskMode::none:
      return "none";
    case NovelMaskMode::bounding_box:
      return "bounding_box";
    case NovelMaskMode::segmentation:
      return "segmentation";
  }
  return "none";
}

std::string to_string(BaseMaskMode mode) {
  return mode == BaseMaskMode::segmentation ? "segmentation" : "none";
}

std::string to_string(PasteDirection direction) {
  return direction == PasteDirection::novel_to_base ? "novel_to_base"
                                                    : "base_to_novel";
}

NovelMaskMode novel_mask_mode_from_string(const std::string& s) {
  if (s == "none") return NovelMaskMode::none;
  if (s == "bounding_box") return NovelMaskMode::bounding_box;
  if (s == "segmentation") return NovelMaskMode::segmentation;
  throw UsageError("unknown novel mask mode: '" + s + "'");
}

BaseMaskMode base_mask_mode_from_string(const std::string& s) {
  if (s == "none") return BaseMaskMode::none;
  if (s == "segmentation") return BaseMaskMode::segmentation;
  throw UsageError("unknown base mask mode: '" + s + "'");
}

void AugmentationConfig::validate() const {
  auto probability = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!probability(apply_probability) || !probability(flip_probability) ||
      !probability(occlusion_keep_threshold)) {
    throw UsageError("augmentation probabilities must lie in [0, 1]");
  }
  if (!(crop_scale_low > 0.0 && crop_scale_low <= crop_scale_high &&
        crop_scale_high <= 1.0)) {
    throw UsageError("crop scale range must satisfy 0 < low <= high <= 1");
  }
  if (copy_paste_enabled && novel_mask_mode == NovelMaskMode::none &&
      base_mask_mode == BaseMaskMode::none) {
    throw UsageError(
        "copy-paste enabled but both mask modes are 'none': nothing to paste");
  }
}

namespace {

void mirror_pixels_horizontal(ImageBuffer& pixels) {
  for (int y = 0; y < pixels.height; ++y) {
    for (int x = 0; x < pixels.width / 2; ++x) {
      const int mx = pixels.width - 1 - x;
      for (int c = 0; c < 3; ++c) {
        const std::uint8_t tmp = pixels.at(x, y, c);
        pixels.set(x, y, c, pixels.at(mx, y, c));
        pixels.set(mx, y, c, tmp);
      }
    }
  }
}

void mirror_pixels_vertical(ImageBuffer& pixels) {
  for (int y = 0; y < pixels.height / 2; ++y) {
    const int my = pixels.height - 1 - y;
    for (int x = 0; x < pixels.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const std::uint8_t tmp = pixels.at(x, y, c);
        pixels.set(x, y, c, pixels.at(x, my, c));
        pixels.set(x, my, c, tmp);
      }
    }
  }
}

}  // namespace

void flip_horizontal(ImageBuffer& pixels, std::vector<InstanceAnnotation>& annotations) {
  const double w = pixels.width;
  mirror_pixels_horizontal(pixels);
  for (InstanceAnnotation& ann : annotations) {
    ann.point.x = w - ann.point.x;
    if (ann.bbox) {
      const double x0 = w - ann.bbox->x_max;
      const double x1 = w - ann.bbox->x_min;
      ann.bbox->x_min = x0;
      ann.bbox->x_max = x1;
    }
    if (ann.boundary) {
      for (Point& p : ann.boundary->vertices) p.x = w - p.x;
    }
  }
}

void flip_vertical(ImageBuffer& pixels, std::vector<InstanceAnnotation>& annotations) {
  const double h = pixels.height;
  mirror_pixels_vertical(pixels);
  for (InstanceAnnotation& ann : annotations) {
    ann.point.y = h - ann.point.y;
    if (ann.bbox) {
      const double y0 = h - ann.bbox->y_max;
      const double y1 = h - ann.bbox->y_min;
      ann.bbox->y_min = y0;
      ann.bbox->y_max = y1;
    }
    if (ann.boundary) {
      for (Point& p : ann.boundary->vertices) p.y = h - p.y;
    }
  }
}

void random_flip(AugmentedSample& sample, double flip_probability, Rng& rng) {
  const bool h = rng.bernoulli(flip_probability);
  const bool v = rng.bernoulli(flip_probability);
  if (h) flip_horizontal(sample.pixels, sample.annotations);
  if (v) flip_vertical(sample.pixels, sample.annotations);
  sample.provenance.hflip = h;
  sample.provenance.vflip = v;
}

namespace {

BoundingBox annotation_extent(const InstanceAnnotation& ann) {
  if (ann.bbox) return *ann.bbox;
  // Point-only annotation: a one-pixel box around the point.
  return BoundingBox{ann.point.x - 0.5, ann.point.y - 0.5, ann.point.x + 0.5,
                     ann.point.y + 0.5};
}

Point relocate_point_into(const BoundingBox& box) {
  return Point{(box.x_min + box.x_max) / 2.0, (box.y_min + box.y_max) / 2.0};
}

// Translates and clips one annotation into a window; nullopt when nothing
// with positive extent survives.
std::optional<InstanceAnnotation> clip_annotation_to_window(
    const InstanceAnnotation& ann, const BoundingBox& window) {
  InstanceAnnotation out = ann;
  const double ox = window.x_min;
  const double oy = window.y_min;
  if (ann.boundary) {
    const auto clipped = clip_boundary(*ann.boundary, window);
    if (!clipped) return std::nullopt;
    SegmentationBoundary moved = *clipped;
    for (Point& p : moved.vertices) {
      p.x -= ox;
      p.y -= oy;
    }
    out.boundary = moved;
    out.bbox = bbox_from_boundary(moved);
  } else if (ann.bbox) {
    BoundingBox box{std::max(ann.bbox->x_min, window.x_min),
                    std::max(ann.bbox->y_min, window.y_min),
                    std::min(ann.bbox->x_max, window.x_max),
                    std::min(ann.bbox->y_max, window.y_max)};
    if (!(box.x_min < box.x_max && box.y_min < box.y_max)) return std::nullopt;
    out.bbox = BoundingBox{box.x_min - ox, box.y_min - oy, box.x_max - ox,
                           box.y_max - oy};
  } else {
    if (!window.contains(ann.point)) return std::nullopt;
  }
  out.point = Point{ann.point.x - ox, ann.point.y - oy};
  if (out.bbox && !out.bbox->contains(out.point)) {
    // The original point fell outside the surviving region.
    out.point = relocate_point_into(*out.bbox);
  }
  return out;
}

}  // namespace

CropResult constrained_random_crop(const ImageBuffer& pixels,
                                   const std::vector<InstanceAnnotation>& annotations,
                                   const std::vector<std::string>& must_keep_ids,
                                   Rng& rng, double scale_low, double scale_high) {
  const int w = pixels.width;
  const int h = pixels.height;
  if (w < 1 || h < 1) throw UsageError("constrained_random_crop: empty image");

  std::optional<BoundingBox> keep;
  for (const std::string& id : must_keep_ids) {
    const auto it =
        std::find_if(annotations.begin(), annotations.end(),
                     [&](const InstanceAnnotation& a) { return a.id == id; });
    if (it == annotations.end()) {
      throw UsageError("constrained_random_crop: unknown must-keep id '" + id + "'");
    }
    const BoundingBox extent = annotation_extent(*it);
    if (!keep) {
      keep = extent;
    } else {
      keep->x_min = std::min(keep->x_min, extent.x_min);
      keep->y_min = std::min(keep->y_min, extent.y_min);
      keep->x_max = std::max(keep->x_max, extent.x_max);
      keep->y_max = std::max(keep->y_max, extent.y_max);
    }
  }

  const double scale = rng.uniform_real(scale_low, scale_high);
  int cw = std::clamp(static_cast<int>(std::lround(w * scale)), 1, w);
  int ch = std::clamp(static_cast<int>(std::lround(h * scale)), 1, h);
  if (keep) {
    // Grow the window when the sampled scale cannot contain the must-keep
    // extent; worst case this degenerates to the identity crop.
    cw = std::min(w, std::max(cw, static_cast<int>(std::ceil(keep->x_max)) -
                                      static_cast<int>(std::floor(keep->x_min))));
    ch = std::min(h, std::max(ch, static_cast<int>(std::ceil(keep->y_max)) -
                                      static_cast<int>(std::floor(keep->y_min))));
  }

  int x_lo = 0, x_hi = w - cw, y_lo = 0, y_hi = h - ch;
  if (keep) {
    x_lo = std::max(x_lo, static_cast<int>(std::ceil(keep->x_max)) - cw);
    x_hi = std::min(x_hi, static_cast<int>(std::floor(keep->x_min)));
    y_lo = std::max(y_lo, static_cast<int>(std::ceil(keep->y_max)) - ch);
    y_hi = std::min(y_hi, static_cast<int>(std::floor(keep->y_min)));
    if (x_lo > x_hi) x_lo = x_hi = std::clamp(x_lo, 0, w - cw);
    if (y_lo > y_hi) y_lo = y_hi = std::clamp(y_lo, 0, h - ch);
  }
  const int cx = static_cast<int>(rng.uniform_int(x_lo, x_hi));
  const int cy = static_cast<int>(rng.uniform_int(y_lo, y_hi));

  CropResult result;
  result.window = {cx, cy, cw, ch};
  result.pixels = ImageBuffer(cw, ch);
  for (int y = 0; y < ch; ++y) {
    std::memcpy(&result.pixels.rgb[size_t(y) * cw * 3],
                &pixels.rgb[(size_t(y + cy) * w + cx) * 3], size_t(cw) * 3);
  }

  const BoundingBox window{double(cx), double(cy), double(cx + cw), double(cy + ch)};
  for (const InstanceAnnotation& ann : annotations) {
    if (auto clipped = clip_annotation_to_window(ann, window)) {
      result.annotations.push_back(std::move(*clipped));
    }
  }
  return result;
}

namespace {

SegmentationBoundary box_polygon(const BoundingBox& box) {
  return SegmentationBoundary{{{box.x_min, box.y_min},
                               {box.x_max, box.y_min},
                               {box.x_max, box.y_max},
                               {box.x_min, box.y_max}}};
}

InstanceMask annotation_raster(const InstanceAnnotation& ann, int width, int height) {
  if (ann.boundary) return rasterize_boundary(*ann.boundary, width, height);
  if (ann.bbox) return rasterize_boundary(box_polygon(*ann.bbox), width, height);
  return InstanceMask(width, height);
}

std::string unique_id(const std::string& candidate, std::set<std::string>& taken) {
  std::string id = candidate;
  int suffix = 1;
  while (!taken.insert(id).second) {
    id = candidate + "#p" + std::to_string(suffix++);
  }
  return id;
}

}  // namespace

PasteResult paste_instances(const ImageBuffer& target_pixels,
                            const std::vector<InstanceAnnotation>& target_annotations,
                            const ImageBuffer& source_pixels,
                            const std::vector<InstanceAnnotation>& source_instances,
                            const std::vector<std::string>& instance_ids,
                            PasteMaskMode mask_mode,
                            double occlusion_keep_threshold) {
  const int tw = target_pixels.width;
  const int th = target_pixels.height;
  const int sw = source_pixels.width;
  const int sh = source_pixels.height;

  PasteResult result;
  result.pixels = target_pixels;
  InstanceMask changed(tw, th);
  const BoundingBox target_frame{0, 0, double(tw), double(th)};

  std::set<std::string> taken_ids;
  for (const InstanceAnnotation& ann : target_annotations) taken_ids.insert(ann.id);

  std::vector<InstanceAnnotation> pasted;
  for (const std::string& id : instance_ids) {
    const auto it =
        std::find_if(source_instances.begin(), source_instances.end(),
                     [&](const InstanceAnnotation& a) { return a.id == id; });
    if (it == source_instances.end()) {
      throw UsageError("paste_instances: unknown instance id '" + id + "'");
    }
    const InstanceAnnotation& instance = *it;
    if (!instance.bbox) {
      throw UsageError("paste_instances: instance '" + id + "' has no bbox");
    }
    if (mask_mode == PasteMaskMode::segmentation && !instance.boundary) {
      throw UsageError("paste_instances: instance '" + id +
                       "' has no boundary for segmentation-mode paste");
    }

    // Paste mask in target frame; source coordinates are preserved.
    const InstanceMask raster =
        mask_mode == PasteMaskMode::segmentation
            ? rasterize_boundary(*instance.boundary, tw, th)
            : rasterize_boundary(box_polygon(*instance.bbox), tw, th);
    bool copied_any = false;
    for (int y = 0; y < th && y < sh; ++y) {
      for (int x = 0; x < tw && x < sw; ++x) {
        if (!raster.at(x, y)) continue;
        result.pixels.set_rgb(x, y, source_pixels.at(x, y, 0),
                              source_pixels.at(x, y, 1), source_pixels.at(x, y, 2));
        changed.set(x, y, true);
        copied_any = true;
      }
    }
    if (!copied_any) {
      result.skipped_ids.push_back(id);
      continue;
    }

    InstanceAnnotation out = instance;
    if (instance.boundary) {
      const auto clipped = clip_boundary(*instance.boundary, target_frame);
      if (clipped) {
        out.boundary = *clipped;
        out.bbox = bbox_from_boundary(*clipped);
      } else {
        out.boundary.reset();
        out.corrected = false;
        out.bbox = BoundingBox{std::max(instance.bbox->x_min, 0.0),
                               std::max(instance.bbox->y_min, 0.0),
                               std::min(instance.bbox->x_max, double(tw)),
                               std::min(instance.bbox->y_max, double(th))};
      }
    } else {
      out.bbox = BoundingBox{std::max(instance.bbox->x_min, 0.0),
                             std::max(instance.bbox->y_min, 0.0),
                             std::min(instance.bbox->x_max, double(tw)),
                             std::min(instance.bbox->y_max, double(th))};
    }
    if (out.bbox && !out.bbox->contains(out.point)) {
      out.point = relocate_point_into(*out.bbox);
    }
    out.id = unique_id(out.id, taken_ids);
    pasted.push_back(std::move(out));
    result.pasted_ids.push_back(pasted.back().id);
  }

  // Occlusion bookkeeping for pre-existing target annotations.
  for (const InstanceAnnotation& ann : target_annotations) {
    const InstanceMask own = annotation_raster(ann, tw, th);
    const std::size_t own_count = own.set_count();
    if (own_count == 0) {
      result.annotations.push_back(ann);
      continue;
    }
    std::size_t visible = 0;
    for (std::size_t i = 0; i < own.bits.size(); ++i) {
      if (own.bits[i] && !changed.bits[i]) ++visible;
    }
    if (visible == own_count) {
      result.annotations.push_back(ann);
      continue;
    }
    const double fraction = static_cast<double>(visible) / own_count;
    if (fraction < occlusion_keep_threshold) continue;  // dropped

    // Partially occluded survivor: tight box over the visible pixels. The
    // boundary no longer describes the visible region, so it goes.
    InstanceAnnotation survivor = ann;
    int min_x = tw, min_y = th, max_x = -1, max_y = -1;
    for (int y = 0; y < th; ++y) {
      for (int x = 0; x < tw; ++x) {
        if (!own.at(x, y) || changed.at(x, y)) continue;
        min_x = std::min(min_x, x);
        min_y = std::min(min_y, y);
        max_x = std::max(max_x, x);
        max_y = std::max(max_y, y);
      }
    }
    survivor.boundary.reset();
    survivor.corrected = false;
    survivor.bbox = BoundingBox{double(min_x), double(min_y), double(max_x + 1),
                                double(max_y + 1)};
    if (!survivor.bbox->contains(survivor.point)) {
      survivor.point = relocate_point_into(*survivor.bbox);
    }
    result.annotations.push_back(std::move(survivor));
  }

  for (InstanceAnnotation& ann : pasted) {
    result.annotations.push_back(std::move(ann));
  }
  return result;
}

namespace {

std::vector<std::string> eligible_instance_ids(
    const std::vector<InstanceAnnotation>& annotations, PasteMaskMode mode,
    const std::optional<std::string>& class_filter) {
  std::vector<std::string> ids;
  for (const InstanceAnnotation& ann : annotations) {
    if (class_filter && ann.class_label != *class_filter) continue;
    if (!ann.bbox) continue;
    if (mode == PasteMaskMode::segmentation && !ann.boundary) continue;
    ids.push_back(ann.id);
  }
  return ids;
}

std::vector<std::string> choose_subset(const std::vector<std::string>& ids, Rng& rng) {
  std::vector<std::string> subset;
  for (const std::string& id : ids) {
    if (rng.bernoulli(0.5)) subset.push_back(id);
  }
  if (subset.empty() && !ids.empty()) {
    subset.push_back(ids[rng.uniform_u64(ids.size())]);
  }
  return subset;
}

std::vector<std::string> novel_ids_of(const AnnotatedImage& image,
                                      const std::string& novel_label) {
  std::vector<std::string> ids;
  for (const InstanceAnnotation& ann : image.annotations) {
    if (ann.class_label == novel_label && ann.bbox) ids.push_back(ann.id);
  }
  return ids;
}

}  // namespace

AugmentedSample make_training_sample(const std::vector<const AnnotatedImage*>& novel_pool,
                                     const std::vector<const AnnotatedImage*>& base_pool,
                                     const AugmentationConfig& config,
                                     const std::string& novel_label,
                                     std::uint64_t sample_seed) {
  config.validate();
  if (novel_pool.empty()) {
    throw UsageError("make_training_sample: empty novel pool");
  }
  if (config.copy_paste_enabled && base_pool.empty()) {
    throw UsageError("make_training_sample: copy-paste enabled with empty base pool");
  }

  Rng rng(sample_seed);
  const AnnotatedImage& novel = *novel_pool[rng.uniform_u64(novel_pool.size())];
  if (!novel.has_pixels()) {
    throw PipelineError("make_training_sample: image '" + novel.image_id +
                        "' has no pixels loaded");
  }

  AugmentedSample sample;
  sample.provenance.seed = sample_seed;
  sample.provenance.novel_image_id = novel.image_id;

  const bool paste = config.copy_paste_enabled &&
                     rng.uniform_real() < config.apply_probability;
  if (!paste) {
    sample.pixels = novel.pixels;
    sample.annotations = novel.annotations;
    random_flip(sample, config.flip_probability, rng);
    return sample;
  }

  const AnnotatedImage& base = *base_pool[rng.uniform_u64(base_pool.size())];
  if (!base.has_pixels()) {
    throw PipelineError("make_training_sample: image '" + base.image_id +
                        "' has no pixels loaded");
  }
  sample.provenance.base_image_id = base.image_id;

  PasteDirection direction;
  if (config.novel_mask_mode == NovelMaskMode::none) {
    direction = PasteDirection::base_to_novel;
  } else if (config.base_mask_mode == BaseMaskMode::none) {
    direction = PasteDirection::novel_to_base;
  } else {
    direction = rng.uniform_u64(2) == 0 ? PasteDirection::novel_to_base
                                        : PasteDirection::base_to_novel;
  }
  sample.provenance.direction = direction;

  // The novel-bearing image is always the cropped one, so the novel-instance
  // containment constraint stays enforceable.
  CropResult crop = constrained_random_crop(novel.pixels, novel.annotations,
                                            novel_ids_of(novel, novel_label), rng,
                                            config.crop_scale_low,
                                            config.crop_scale_high);
  sample.provenance.crop_window = crop.window;

  PasteResult pasted;
  if (direction == PasteDirection::base_to_novel) {
    std::vector<std::string> ids = eligible_instance_ids(
        base.annotations, PasteMaskMode::segmentation, std::nullopt);
    if (!config.paste_all_instances) ids = choose_subset(ids, rng);
    pasted = paste_instances(crop.pixels, crop.annotations, base.pixels,
                             base.annotations, ids, PasteMaskMode::segmentation,
                             config.occlusion_keep_threshold);
  } else {
    const PasteMaskMode mode = config.novel_mask_mode == NovelMaskMode::segmentation
                                   ? PasteMaskMode::segmentation
                                   : PasteMaskMode::bounding_box;
    std::vector<std::string> ids =
        eligible_instance_ids(crop.annotations, mode, novel_label);
    if (!config.paste_all_instances) ids = choose_subset(ids, rng);
    pasted = paste_instances(base.pixels, base.annotations, crop.pixels,
                             crop.annotations, ids, mode,
                             config.occlusion_keep_threshold);
  }
  sample.pixels = std::move(pasted.pixels);
  sample.annotations = std::move(pasted.annotations);
  sample.provenance.pasted_ids = std::move(pasted.pasted_ids);
  sample.provenance.skipped_ids = std::move(pasted.skipped_ids);

  random_flip(sample, config.flip_probability, rng);
  return sample;
}

nlohmann::json augmentation_config_to_json(const AugmentationConfig& config) {
  return nlohmann::json{{"copy_paste_enabled", config.copy_paste_enabled},
                        {"novel_mask_mode", to_string(config.novel_mask_mode)},
                        {"base_mask_mode", to_string(config.base_mask_mode)},
                        {"apply_probability", config.apply_probability},
                        {"crop_scale_range", {config.crop_scale_low, config.crop_scale_high}},
                        {"occlusion_keep_threshold", config.occlusion_keep_threshold},
                        {"flip_probability", config.flip_probability},
                        {"paste_all_instances", config.paste_all_instances}};
}

AugmentationConfig augmentation_config_from_json(const nlohmann::json& j) {
  AugmentationConfig config;
  config.copy_paste_enabled = j.value("copy_paste_enabled", false);
  config.novel_mask_mode =
      novel_mask_mode_from_string(j.value("novel_mask_mode", std::string("none")));
  config.base_mask_mode =
      base_mask_mode_from_string(j.value("base_mask_mode", std::string("none")));
  config.apply_probability = j.value("apply_probability", 0.5);
  if (j.contains("crop_scale_range")) {
    config.crop_scale_low = j.at("crop_scale_range").at(0).get<double>();
    config.crop_scale_high = j.at("crop_scale_range").at(1).get<double>();
  }
  config.occlusion_keep_threshold = j.value("occlusion_keep_threshold", 0.1);
  config.flip_probability = j.value("flip_probability", 0.5);
  config.paste_all_instances = j.value("paste_all_instances", true);
  config.validate();
  return config;
}

namespace {

nlohmann::json provenance_to_json(const Provenance& provenance) {
  nlohmann::json j{{"seed", provenance.seed},
                   {"novel_image_id", provenance.novel_image_id},
                   {"hflip", provenance.hflip},
                   {"vflip", provenance.vflip},
                   {"pasted_ids", provenance.pasted_ids},
                   {"skipped_ids", provenance.skipped_ids}};
  j["base_image_id"] =
      provenance.base_image_id ? nlohmann::json(*provenance.base_image_id) : nlohmann::json();
  j["direction"] = provenance.direction ? nlohmann::json(to_string(*provenance.direction))
                                        : nlohmann::json();
  j["crop_window"] = provenance.crop_window
                         ? nlohmann::json(*provenance.crop_window)
                         : nlohmann::json();
  return j;
}

}  // namespace

std::vector<std::uint8_t> serialize_sample(const AugmentedSample& sample) {
  nlohmann::json meta = nlohmann::json::array();
  for (const InstanceAnnotation& ann : sample.annotations) {
    meta.push_back(annotation_to_json(ann));
  }
  const std::string header =
      nlohmann::json{{"width", sample.pixels.width},
                     {"height", sample.pixels.height},
                     {"annotations", std::move(meta)},
                     {"provenance", provenance_to_json(sample.provenance)}}
          .dump();

  std::vector<std::uint8_t> bytes;
  bytes.reserve(header.size() + sample.pixels.rgb.size() + 8);
  const std::uint64_t header_size = header.size();
  for (int i = 0; i < 8; ++i) {
    bytes.push_back(static_cast<std::uint8_t>(header_size >> (8 * i)));
  }
  bytes.insert(bytes.end(), header.begin(), header.end());
  bytes.insert(bytes.end(), sample.pixels.rgb.begin(), sample.pixels.rgb.end());
  return bytes;
}

std::uint64_t sample_digest(const AugmentedSample& sample) {
  const std::vector<std::uint8_t> bytes = serialize_sample(sample);
  return fnv1a64(std::span<const std::uint8_t>(bytes.data(), bytes.size()));
}

void write_preview(const AugmentedSample& sample, const std::filesystem::path& prefix) {
  ImageBuffer canvas = sample.pixels;
  for (const InstanceAnnotation& ann : sample.annotations) {
    if (ann.bbox) draw_box(canvas, *ann.bbox, {80, 255, 80});
    if (ann.boundary) draw_boundary(canvas, *ann.boundary, {255, 235, 60});
  }
  write_ppm(prefix.string() + ".ppm", canvas);
  std::ofstream out(prefix.string() + ".json");
  if (!out) throw DataError("cannot write preview metadata: " + prefix.string());
  out << provenance_to_json(sample.provenance).dump(2) << "\n";
}

}  // namespace pointdet
