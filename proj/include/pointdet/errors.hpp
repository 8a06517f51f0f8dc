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

#include <stdexcept>
#include <string>

namespace pointdet {

// Bad flags, bad config files, infeasible requests. CLI exit code 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Broken input data: malformed CSV, schema mismatch, missing files. Exit code 2.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Failures while running the pipeline (non-finite loss, I/O mid-run). Exit code 3.
struct PipelineError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Degenerate geometry: empty polygons, inverted boxes, empty masks.
struct GeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace pointdet
