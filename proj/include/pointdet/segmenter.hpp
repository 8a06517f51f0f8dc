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

#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "pointdet/annotations.hpp"

namespace pointdet {

// Raised on transport-level failures (unreachable service, I/O) as opposed
// to "nothing to segment here", which is a nullopt result.
struct SegmenterError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Contract for any promptable segmentation model: image plus a point prompt
// in, boundary out. Implementations must be deterministic for a fixed
// (name, version): the same image bytes and point always yield the same
// boundary. Adapters for remote models live behind this interface.
class PromptableSegmenter {
 public:
  virtual ~PromptableSegmenter() = default;
  virtual std::string name() const = 0;
  virtual std::string version() const = 0;

  /// Returns the boundary of the object under the prompt point, or nullopt
  /// when no object can be segmented there. Throws SegmenterError on
  /// transport failures.
  virtual std::optional<SegmentationBoundary> segment(const ImageBuffer& image,
                                                      const Point& prompt) = 0;
};

// Test and fixture segmenter: flood-fills the connected component of
// near-uniform colour around the prompt (per-channel tolerance against the
// seed pixel), fills holes, and traces the component outline on the pixel
// grid. Rasterizing the returned boundary reproduces the flooded pixel set
// exactly, which makes it an invertible oracle.
class ReferenceSegmenter : public PromptableSegmenter {
 public:
  struct Options {
    int channel_tolerance = 10;       // max |channel - seed channel|, 0..255
    std::size_t min_region_px = 9;    // smaller regions count as nothing
    double max_region_fraction = 0.5; // larger fractions count as background
  };

  ReferenceSegmenter() = default;
  explicit ReferenceSegmenter(Options options) : options_(options) {}

  std::string name() const override { return "reference-floodfill"; }
  std::string version() const override { return "1"; }
  std::optional<SegmentationBoundary> segment(const ImageBuffer& image,
                                              const Point& prompt) override;

 private:
  Options options_;
};

struct SegmentPointResult {
  std::optional<SegmentationBoundary> boundary;
  QualityFlag flag = QualityFlag::failed;
};

/// Runs the segmenter for one prompt and checks that the returned boundary
/// actually contains the prompt point. On success the result carries the
/// boundary and QualityFlag::ok; otherwise flag == failed and no boundary.
SegmentPointResult segment_point(PromptableSegmenter& segmenter,
                                 const AnnotatedImage& image,
                                 const Point& prompt);

struct ClassSegmentationStats {
  std::size_t attempted = 0;
  std::size_t failed = 0;
  std::size_t poor = 0;
  double failure_rate() const {
    return attempted == 0 ? 0.0 : static_cast<double>(failed) / attempted;
  }
};

struct SegmentationSummary {
  std::map<std::string, ClassSegmentationStats> per_class;
  std::vector<std::string> transport_failures;  // image ids skipped entirely
  std::size_t attempted() const;
  std::size_t failed() const;
  double failure_rate() const;
};

/// Segments every annotation whose class is in `class_filter` (empty filter
/// means all classes). Annotations gain a boundary plus derived bbox, or
/// keep quality == failed without one. Transport errors skip the image and
/// are reported in the summary; the batch continues. After the batch,
/// boundaries whose area is implausible against the same-class median
/// (x4 above or x0.25 below) are flagged poor but kept.
SegmentationSummary segment_dataset(PromptableSegmenter& segmenter,
                                    std::vector<AnnotatedImage>& images,
                                    const std::set<std::string>& class_filter);

enum class CorrectionReason { background_included, part_excluded, other };

std::string to_string(CorrectionReason reason);
CorrectionReason correction_reason_from_string(const std::string& s);

struct CorrectionRecord {
  std::string image_id;
  std::string annotation_id;
  SegmentationBoundary corrected_boundary;
  CorrectionReason reason = CorrectionReason::other;
};

struct CorrectionAuditEntry {
  std::string image_id;
  std::string annotation_id;
  bool applied = false;
  std::string detail;
};

struct CorrectionAudit {
  std::vector<CorrectionAuditEntry> entries;
  std::size_t applied_count() const;
  std::size_t rejected_count() const;
};

/// Applies human corrections: each referenced annotation gets the corrected
/// boundary, corrected = true, a recomputed bbox and quality ok. Dangling
/// references are rejected into the audit log and the batch continues.
/// Idempotent: applying the same records twice leaves the dataset unchanged.
CorrectionAudit apply_corrections(std::vector<AnnotatedImage>& images,
                                  const std::vector<CorrectionRecord>& corrections);

/// Correction batch file: JSON array of records with polygon vertices as
/// [x, y] pairs.
std::vector<CorrectionRecord> load_corrections(const std::filesystem::path& path);
void save_corrections(const std::filesystem::path& path,
                      const std::vector<CorrectionRecord>& corrections);

}  // namespace pointdet
