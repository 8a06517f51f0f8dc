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
#include <vector>

#include "pointdet/annotations.hpp"

namespace pointdet {

// ISO-8601 UTC timestamps ("2021-06-01T12:00:00Z"; the Z is optional on
// input). Values are UTC unix seconds.
std::int64_t parse_timestamp(const std::string& iso8601);
std::string format_timestamp(std::int64_t unix_seconds);

struct ClassCount {
  std::string label;
  std::size_t count = 0;
  friend bool operator==(const ClassCount&, const ClassCount&) = default;
};

struct Dataset {
  std::string name;
  std::vector<AnnotatedImage> images;
  std::vector<ClassCount> class_vocabulary;  // sorted by label
  std::filesystem::path root_dir;  // where pixel_path entries resolve; not serialized

  void recount_vocabulary();
  std::vector<std::string> class_labels() const;
  AnnotatedImage* find_image(const std::string& image_id);
  const AnnotatedImage* find_image(const std::string& image_id) const;

  /// Reads the PPM for every image whose pixels are not in memory yet.
  void load_pixels();
};

enum class SplitName { test, validation, train_50, train_100, train_200, train_full };

std::string to_string(SplitName name);
SplitName split_name_from_string(const std::string& s);

struct DatasetSplit {
  SplitName name = SplitName::test;
  std::vector<std::string> image_ids;
  std::uint64_t seed = 0;
};

struct SplitManifest {
  std::uint64_t seed = 0;
  std::vector<DatasetSplit> splits;
  const DatasetSplit* find(SplitName name) const;
};

struct IngestReject {
  std::size_t row_number = 0;  // 1-based, header = row 1
  std::string reason;
  std::string raw_line;
};

struct IngestResult {
  Dataset dataset;
  std::vector<IngestReject> rejects;
};

/// Ingests a point-annotation CSV export. Required header columns:
/// image_path, image_id, captured_at, class_label, point_x, point_y,
/// image_width, image_height (any order, extras ignored). A missing column
/// is a DataError; a malformed row becomes a reject entry and ingestion
/// continues. Rows are grouped into images by image_id.
IngestResult ingest_point_csv(const std::filesystem::path& csv_path);

/// Splits off the n_test images with the latest captured_at as the test set.
/// Ties at the cutoff timestamp break by image_id lexicographic order. The
/// remainder keeps the dataset's original image order. Any image without a
/// parseable timestamp (captured_at == 0 is allowed; the field is required
/// at ingest) is fine; the op only needs the stored values.
std::pair<DatasetSplit, std::vector<std::string>> split_by_recency(
    const Dataset& dataset, std::size_t n_test);

/// Draws a validation set and nested training subsets from the remainder:
/// validation is disjoint from all training subsets and subsets are nested
/// (each size is a prefix extension of the previous). Fully determined by
/// the seed. Also emits train_full = remainder minus validation.
std::vector<DatasetSplit> sample_training_subsets(
    const std::vector<std::string>& remainder_ids,
    const std::vector<std::size_t>& sizes, std::size_t n_validation,
    std::uint64_t seed);

/// Convenience wrapper: recency test split + subsets in one manifest.
SplitManifest make_splits(const Dataset& dataset, std::size_t n_test,
                          const std::vector<std::size_t>& sizes,
                          std::size_t n_validation, std::uint64_t seed);

// Canonical on-disk dataset format: one JSON document, schema_version 1,
// annotations inline, polygons as [x, y] vertex arrays, timestamps ISO-8601,
// pixel files referenced by path relative to a pixel root.
inline constexpr int kDatasetSchemaVersion = 1;

void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path, bool load_pixels = false);

void save_split_manifest(const SplitManifest& manifest,
                         const std::filesystem::path& path);
SplitManifest load_split_manifest(const std::filesystem::path& path);

/// Rejects report: one JSON object per line.
void write_rejects(const std::vector<IngestReject>& rejects,
                   const std::filesystem::path& path);

}  // namespace pointdet
