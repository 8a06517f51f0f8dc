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

#include <json.hpp>

#include "pointdet/annotations.hpp"

namespace pointdet {

// Shared JSON encodings. nlohmann::json keeps object keys sorted and emits
// shortest-round-trip doubles, so dumps are canonical and bit-stable.
nlohmann::json annotation_to_json(const InstanceAnnotation& ann);
InstanceAnnotation annotation_from_json(const nlohmann::json& j);

nlohmann::json boundary_to_json(const SegmentationBoundary& boundary);
SegmentationBoundary boundary_from_json(const nlohmann::json& j);

}  // namespace pointdet
