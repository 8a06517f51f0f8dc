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
#include "pointdet/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "pointdet/image_io.hpp"
#include "pointdet/json_io.hpp"
#include "pointdet/rng.hpp"

namespace pointdet {

namespace {

// Civil-date conversion (Hinnant's algorithm); avoids timegm portability.
std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const int era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
                       static_cast<unsigned>(d) - 1u;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return static_cast<std::int64_t>(era) * 146097 + static_cast<std::int64_t>(doe) -
         719468;
}

void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
  y = static_cast<int>(yy + (m <= 2));
}

}  // namespace

std::int64_t parse_timestamp(const std::string& iso8601) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  char sep = 0;
  const int fields =
      std::sscanf(iso8601.c_str(), "%d-%d-%d%c%d:%d:%d", &y, &mo, &d, &sep, &h, &mi, &s);
  const bool date_only = fields == 3;
  if (!(date_only || (fields == 7 && (sep == 'T' || sep == ' ')))) {
    throw DataError("unparsable timestamp: '" + iso8601 + "'");
  }
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h < 0 || h > 23 || mi < 0 ||
      mi > 59 || s < 0 || s > 60) {
    throw DataError("timestamp out of range: '" + iso8601 + "'");
  }
  return days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + s;
}

std::string format_timestamp(std::int64_t unix_seconds) {
  std::int64_t days = unix_seconds / 86400;
  std::int64_t rem = unix_seconds % 86400;
  if (rem < 0) {
    rem += 86400;
    --days;
  }
  int y, m, d;
  civil_from_days(days, y, m, d);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02lld:%02lld:%02lldZ", y, m, d,
                static_cast<long long>(rem / 3600),
                static_cast<long long>((rem % 3600) / 60),
                static_cast<long long>(rem % 60));
  return std::string(buf);
}

void Dataset::recount_vocabulary() {
  std::map<std::string, std::size_t> counts;
  for (const AnnotatedImage& image : images) {
    for (const InstanceAnnotation& ann : image.annotations) {
      ++counts[ann.class_label];
    }
  }
  class_vocabulary.clear();
  for (const auto& [label, count] : counts) {
    class_vocabulary.push_back({label, count});
  }
}

std::vector<std::string> Dataset::class_labels() const {
  std::vector<std::string> labels;
  labels.reserve(class_vocabulary.size());
  for (const ClassCount& cc : class_vocabulary) labels.push_back(cc.label);
  return labels;
}

AnnotatedImage* Dataset::find_image(const std::string& image_id) {
  for (AnnotatedImage& image : images) {
    if (image.image_id == image_id) return &image;
  }
  return nullptr;
}

const AnnotatedImage* Dataset::find_image(const std::string& image_id) const {
  return const_cast<Dataset*>(this)->find_image(image_id);
}

void Dataset::load_pixels() {
  for (AnnotatedImage& image : images) {
    if (image.has_pixels() || image.pixel_path.empty()) continue;
    image.pixels = read_ppm(root_dir / image.pixel_path);
    if (image.pixels.width != image.width || image.pixels.height != image.height) {
      throw DataError("pixel file dimensions disagree with metadata for image '" +
                      image.image_id + "'");
    }
  }
}

std::string to_string(SplitName name) {
  switch (name) {
    case SplitName::test:
      return "test";
    case SplitName::validation:
      return "validation";
    case SplitName::train_50:
      return "train_50";
    case SplitName::train_100:
      return "train_100";
    case SplitName::train_200:
      return "train_200";
    case SplitName::train_full:
      return "train_full";
  }
  return "test";
}

SplitName split_name_from_string(const std::string& s) {
  if (s == "test") return SplitName::test;
  if (s == "validation") return SplitName::validation;
  if (s == "train_50") return SplitName::train_50;
  if (s == "train_100") return SplitName::train_100;
  if (s == "train_200") return SplitName::train_200;
  if (s == "train_full") return SplitName::train_full;
  throw DataError("unknown split name: '" + s + "'");
}

const DatasetSplit* SplitManifest::find(SplitName name) const {
  for (const DatasetSplit& split : splits) {
    if (split.name == name) return &split;
  }
  return nullptr;
}

namespace {

// Minimal CSV: comma-separated, double quotes for fields containing commas,
// "" escapes a quote inside a quoted field.
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

double parse_double_strict(const std::string& s, const std::string& what) {
  std::size_t consumed = 0;
  double value = 0.0;
  try {
    value = std::stod(s, &consumed);
  } catch (const std::exception&) {
    throw DataError(what + " is not a number: '" + s + "'");
  }
  if (consumed != s.size() || !std::isfinite(value)) {
    throw DataError(what + " is not a finite number: '" + s + "'");
  }
  return value;
}

}  // namespace

IngestResult ingest_point_csv(const std::filesystem::path& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw DataError("cannot open CSV file: " + csv_path.string());

  std::string header_line;
  if (!std::getline(in, header_line)) {
    throw DataError("CSV file is empty: " + csv_path.string());
  }
  const std::vector<std::string> header = split_csv_line(header_line);
  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) column[header[i]] = i;

  const char* required[] = {"image_path", "image_id",    "captured_at",
                            "class_label", "point_x",     "point_y",
                            "image_width", "image_height"};
  for (const char* name : required) {
    if (!column.count(name)) {
      throw DataError("CSV is missing required column '" + std::string(name) +
                      "' in " + csv_path.string());
    }
  }

  IngestResult result;
  result.dataset.name = csv_path.stem().string();
  result.dataset.root_dir = csv_path.parent_path();
  std::map<std::string, std::size_t> image_index;  // image_id -> position
  std::size_t annotation_counter = 0;

  std::string line;
  std::size_t row_number = 1;
  while (std::getline(in, line)) {
    ++row_number;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> fields = split_csv_line(line);
    auto get = [&](const char* name) -> const std::string& {
      const std::size_t idx = column.at(name);
      if (idx >= fields.size()) {
        throw DataError(std::string("row has too few fields for column '") + name + "'");
      }
      return fields[idx];
    };
    try {
      const std::string image_id = get("image_id");
      if (image_id.empty()) throw DataError("empty image_id");
      const double width = parse_double_strict(get("image_width"), "image_width");
      const double height = parse_double_strict(get("image_height"), "image_height");
      if (width < 1 || height < 1 || width != std::floor(width) ||
          height != std::floor(height)) {
        throw DataError("image dimensions must be positive integers");
      }
      const double px = parse_double_strict(get("point_x"), "point_x");
      const double py = parse_double_strict(get("point_y"), "point_y");
      if (px < 0 || py < 0 || px > width || py > height) {
        throw DataError("point (" + get("point_x") + ", " + get("point_y") +
                        ") outside stated image dimensions");
      }
      const std::string class_label = get("class_label");
      if (class_label.empty()) throw DataError("empty class_label");
      const std::int64_t captured_at = parse_timestamp(get("captured_at"));

      auto it = image_index.find(image_id);
      if (it == image_index.end()) {
        AnnotatedImage image;
        image.image_id = image_id;
        image.pixel_path = get("image_path");
        image.width = static_cast<int>(width);
        image.height = static_cast<int>(height);
        image.captured_at = captured_at;
        image_index[image_id] = result.dataset.images.size();
        result.dataset.images.push_back(std::move(image));
        it = image_index.find(image_id);
      } else {
        const AnnotatedImage& existing = result.dataset.images[it->second];
        if (existing.width != static_cast<int>(width) ||
            existing.height != static_cast<int>(height)) {
          throw DataError("image dimensions disagree with an earlier row for '" +
                          image_id + "'");
        }
      }
      InstanceAnnotation ann;
      ann.id = image_id + "#" + std::to_string(annotation_counter++);
      ann.class_label = class_label;
      ann.point = Point{px, py};
      result.dataset.images[it->second].annotations.push_back(std::move(ann));
    } catch (const DataError& e) {
      result.rejects.push_back({row_number, e.what(), line});
    }
  }
  result.dataset.recount_vocabulary();
  return result;
}

std::pair<DatasetSplit, std::vector<std::string>> split_by_recency(
    const Dataset& dataset, std::size_t n_test) {
  if (n_test > dataset.images.size()) {
    throw UsageError("split_by_recency: n_test " + std::to_string(n_test) +
                     " exceeds image count " + std::to_string(dataset.images.size()));
  }
  std::vector<const AnnotatedImage*> order;
  order.reserve(dataset.images.size());
  for (const AnnotatedImage& image : dataset.images) order.push_back(&image);
  std::sort(order.begin(), order.end(),
            [](const AnnotatedImage* a, const AnnotatedImage* b) {
              if (a->captured_at != b->captured_at) {
                return a->captured_at > b->captured_at;  // latest first
              }
              return a->image_id < b->image_id;
            });

  DatasetSplit test;
  test.name = SplitName::test;
  std::set<std::string> test_ids;
  for (std::size_t i = 0; i < n_test; ++i) {
    test.image_ids.push_back(order[i]->image_id);
    test_ids.insert(order[i]->image_id);
  }
  std::vector<std::string> remainder;
  for (const AnnotatedImage& image : dataset.images) {
    if (!test_ids.count(image.image_id)) remainder.push_back(image.image_id);
  }
  return {std::move(test), std::move(remainder)};
}

std::vector<DatasetSplit> sample_training_subsets(
    const std::vector<std::string>& remainder_ids,
    const std::vector<std::size_t>& sizes, std::size_t n_validation,
    std::uint64_t seed) {
  std::vector<std::size_t> sorted_sizes = sizes;
  std::sort(sorted_sizes.begin(), sorted_sizes.end());
  const std::size_t max_size = sorted_sizes.empty() ? 0 : sorted_sizes.back();
  if (max_size + n_validation > remainder_ids.size()) {
    throw UsageError("training subsets infeasible: need " +
                     std::to_string(max_size + n_validation) + " images, have " +
                     std::to_string(remainder_ids.size()));
  }
  auto name_for_size = [](std::size_t size) {
    switch (size) {
      case 50:
        return SplitName::train_50;
      case 100:
        return SplitName::train_100;
      case 200:
        return SplitName::train_200;
      default:
        throw UsageError("unsupported training subset size " + std::to_string(size) +
                         " (expected 50, 100 or 200)");
    }
  };

  // Deterministic Fisher-Yates; validation takes the head of the shuffle,
  // subsets take nested prefixes of what follows.
  std::vector<std::string> shuffled = remainder_ids;
  Rng rng(seed);
  for (std::size_t i = shuffled.size(); i > 1; --i) {
    std::swap(shuffled[i - 1], shuffled[rng.uniform_u64(i)]);
  }

  std::vector<DatasetSplit> splits;
  DatasetSplit validation;
  validation.name = SplitName::validation;
  validation.seed = seed;
  validation.image_ids.assign(shuffled.begin(), shuffled.begin() + n_validation);
  splits.push_back(std::move(validation));

  for (std::size_t size : sorted_sizes) {
    DatasetSplit split;
    split.name = name_for_size(size);
    split.seed = seed;
    split.image_ids.assign(shuffled.begin() + n_validation,
                           shuffled.begin() + n_validation + size);
    splits.push_back(std::move(split));
  }

  DatasetSplit full;
  full.name = SplitName::train_full;
  full.seed = seed;
  full.image_ids.assign(shuffled.begin() + n_validation, shuffled.end());
  splits.push_back(std::move(full));
  return splits;
}

SplitManifest make_splits(const Dataset& dataset, std::size_t n_test,
                          const std::vector<std::size_t>& sizes,
                          std::size_t n_validation, std::uint64_t seed) {
  auto [test, remainder] = split_by_recency(dataset, n_test);
  test.seed = seed;
  SplitManifest manifest;
  manifest.seed = seed;
  manifest.splits.push_back(std::move(test));
  for (DatasetSplit& split :
       sample_training_subsets(remainder, sizes, n_validation, seed)) {
    manifest.splits.push_back(std::move(split));
  }
  return manifest;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  nlohmann::json images = nlohmann::json::array();
  for (const AnnotatedImage& image : dataset.images) {
    nlohmann::json anns = nlohmann::json::array();
    for (const InstanceAnnotation& ann : image.annotations) {
      anns.push_back(annotation_to_json(ann));
    }
    images.push_back({{"image_id", image.image_id},
                      {"pixel_path", image.pixel_path},
                      {"width", image.width},
                      {"height", image.height},
                      {"captured_at", format_timestamp(image.captured_at)},
                      {"annotations", std::move(anns)}});
  }
  nlohmann::json vocab = nlohmann::json::array();
  for (const ClassCount& cc : dataset.class_vocabulary) {
    vocab.push_back({{"label", cc.label}, {"count", cc.count}});
  }

  std::string pixel_root = ".";
  if (!dataset.root_dir.empty()) {
    std::error_code ec;
    const auto rel =
        std::filesystem::relative(dataset.root_dir, path.parent_path(), ec);
    pixel_root = (ec || rel.empty()) ? dataset.root_dir.string() : rel.string();
  }

  const nlohmann::json doc{{"schema_version", kDatasetSchemaVersion},
                           {"name", dataset.name},
                           {"pixel_root", pixel_root},
                           {"class_vocabulary", std::move(vocab)},
                           {"images", std::move(images)}};
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset file: " + path.string());
  out << doc.dump(1) << "\n";
}

Dataset load_dataset(const std::filesystem::path& path, bool load_pixels) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file: " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("dataset file is not valid JSON: " + std::string(e.what()));
  }
  const int version = doc.at("schema_version").get<int>();
  if (version != kDatasetSchemaVersion) {
    throw DataError("dataset schema version " + std::to_string(version) +
                    " is not supported; this build reads version " +
                    std::to_string(kDatasetSchemaVersion));
  }
  Dataset dataset;
  dataset.name = doc.at("name").get<std::string>();
  dataset.root_dir =
      path.parent_path() / doc.value("pixel_root", std::string("."));
  dataset.root_dir = dataset.root_dir.lexically_normal();
  for (const auto& image_json : doc.at("images")) {
    AnnotatedImage image;
    image.image_id = image_json.at("image_id").get<std::string>();
    image.pixel_path = image_json.at("pixel_path").get<std::string>();
    image.width = image_json.at("width").get<int>();
    image.height = image_json.at("height").get<int>();
    image.captured_at = parse_timestamp(image_json.at("captured_at").get<std::string>());
    for (const auto& ann_json : image_json.at("annotations")) {
      image.annotations.push_back(annotation_from_json(ann_json));
    }
    dataset.images.push_back(std::move(image));
  }
  std::vector<ClassCount> stored;
  for (const auto& cc : doc.at("class_vocabulary")) {
    stored.push_back({cc.at("label").get<std::string>(), cc.at("count").get<std::size_t>()});
  }
  dataset.recount_vocabulary();
  if (stored != dataset.class_vocabulary) {
    throw DataError("class_vocabulary counts disagree with annotations in " +
                    path.string());
  }
  if (load_pixels) dataset.load_pixels();
  return dataset;
}

void save_split_manifest(const SplitManifest& manifest,
                         const std::filesystem::path& path) {
  nlohmann::json splits = nlohmann::json::object();
  for (const DatasetSplit& split : manifest.splits) {
    splits[to_string(split.name)] = split.image_ids;
  }
  const nlohmann::json doc{{"schema_version", 1},
                           {"seed", manifest.seed},
                           {"splits", std::move(splits)}};
  std::ofstream out(path);
  if (!out) throw DataError("cannot write split manifest: " + path.string());
  out << doc.dump(1) << "\n";
}

SplitManifest load_split_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open split manifest: " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("split manifest is not valid JSON: " + std::string(e.what()));
  }
  const int version = doc.at("schema_version").get<int>();
  if (version != 1) {
    throw DataError("split manifest schema version " + std::to_string(version) +
                    " is not supported; this build reads version 1");
  }
  SplitManifest manifest;
  manifest.seed = doc.at("seed").get<std::uint64_t>();
  for (const auto& [name, ids] : doc.at("splits").items()) {
    DatasetSplit split;
    split.name = split_name_from_string(name);
    split.seed = manifest.seed;
    split.image_ids = ids.get<std::vector<std::string>>();
    manifest.splits.push_back(std::move(split));
  }
  return manifest;
}

void write_rejects(const std::vector<IngestReject>& rejects,
                   const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write rejects report: " + path.string());
  for (const IngestReject& reject : rejects) {
    out << nlohmann::json{{"row", reject.row_number},
                          {"reason", reject.reason},
                          {"line", reject.raw_line}}
               .dump()
        << "\n";
  }
}

}  // namespace pointdet
