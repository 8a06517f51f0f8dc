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
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pointdet/annotations.hpp"

namespace pointdet {

struct ParameterGroupInfo {
  std::string name;
  int stage = 0;  // backbone stage index 1..S, or 0 for head groups
  std::size_t size = 0;
};

struct GroundTruthBox {
  BoundingBox bbox;
  int class_index = 0;
};

struct RawDetection {
  BoundingBox bbox;
  int class_index = 0;
  double confidence = 0.0;  // in [0, 1]
};

// Contract every trainable detector fulfils. Parameters live in named
// groups, each tagged with a backbone stage index (>= 4 stages) or marked as
// head; the trainer drives optimization through the group views, so freezing
// is a trainer-side decision. Implementations must be deterministic given
// their construction seed.
class DetectorBackend {
 public:
  virtual ~DetectorBackend() = default;

  virtual std::string name() const = 0;
  virtual std::string version() const = 0;
  virtual int num_classes() const = 0;
  virtual int num_stages() const = 0;

  virtual std::vector<ParameterGroupInfo> parameter_groups() const = 0;
  virtual std::span<double> group_parameters(const std::string& group) = 0;
  virtual std::span<const double> group_parameters(const std::string& group) const = 0;
  virtual std::span<const double> group_gradients(const std::string& group) const = 0;
  virtual void zero_gradients() = 0;

  /// Forward + backward on one image; accumulates gradients into the group
  /// gradient buffers and returns the scalar loss.
  virtual double forward_backward(const ImageBuffer& image,
                                  const std::vector<GroundTruthBox>& targets) = 0;

  /// Inference: detections with confidence in [0, 1], boxes in image
  /// coordinates.
  virtual std::vector<RawDetection> detect(const ImageBuffer& image) const = 0;

  /// Reinitializes the classifier and box-regressor head for a new class
  /// count; backbone parameters are untouched.
  virtual void replace_head(int num_classes, std::uint64_t seed) = 0;

  /// Opaque parameter state; load(save()) must reproduce identical forward
  /// outputs on any probe input.
  virtual nlohmann::json serialize_state() const = 0;
  virtual void load_state(const nlohmann::json& state) = 0;
};

/// Factory for registered backends ("toy", "toy_wide"). Throws UsageError
/// for unknown names.
std::unique_ptr<DetectorBackend> make_backend(const std::string& name,
                                              int num_classes, std::uint64_t seed);

std::vector<std::string> registered_backends();

}  // namespace pointdet
