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
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "pointdet/backend.hpp"
#include "pointdet/rng.hpp"

namespace pointdet {

namespace {

// Flat CHW tensor.
struct Tensor {
  int c = 0, h = 0, w = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(size_t(c_) * h_ * w_, 0.0) {}
  double& at(int ci, int y, int x) { return v[(size_t(ci) * h + y) * w + x]; }
  double at(int ci, int y, int x) const { return v[(size_t(ci) * h + y) * w + x]; }
};

// 3x3 (or 1x1) convolution with parameters and gradients in one flat buffer:
// weights [out][in][k][k] followed by bias [out].
struct ConvLayer {
  int in_c = 0, out_c = 0, ksize = 3, stride = 1, pad = 1;
  std::vector<double> params;
  std::vector<double> grads;

  ConvLayer() = default;
  ConvLayer(int in, int out, int k = 3, int s = 1, int p = 1)
      : in_c(in), out_c(out), ksize(k), stride(s), pad(p) {}

  std::size_t weight_count() const {
    return size_t(out_c) * in_c * ksize * ksize;
  }
  std::size_t param_count() const { return weight_count() + out_c; }

  void init(Rng& rng, double weight_scale = 1.0, double bias_value = 0.0) {
    params.assign(param_count(), 0.0);
    grads.assign(param_count(), 0.0);
    const double stddev =
        weight_scale * std::sqrt(2.0 / (double(in_c) * ksize * ksize));
    for (std::size_t i = 0; i < weight_count(); ++i) {
      params[i] = stddev * rng.normal();
    }
    for (int oc = 0; oc < out_c; ++oc) params[weight_count() + oc] = bias_value;
  }

  Tensor forward(const Tensor& in) const {
    const int oh = (in.h + 2 * pad - ksize) / stride + 1;
    const int ow = (in.w + 2 * pad - ksize) / stride + 1;
    Tensor out(out_c, oh, ow);
    const double* wts = params.data();
    const double* bias = params.data() + weight_count();
    for (int oc = 0; oc < out_c; ++oc) {
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          double acc = bias[oc];
          for (int ic = 0; ic < in_c; ++ic) {
            for (int ky = 0; ky < ksize; ++ky) {
              const int iy = oy * stride + ky - pad;
              if (iy < 0 || iy >= in.h) continue;
              for (int kx = 0; kx < ksize; ++kx) {
                const int ix = ox * stride + kx - pad;
                if (ix < 0 || ix >= in.w) continue;
                acc += wts[((size_t(oc) * in_c + ic) * ksize + ky) * ksize + kx] *
                       in.at(ic, iy, ix);
              }
            }
          }
          out.at(oc, oy, ox) = acc;
        }
      }
    }
    return out;
  }

  // Accumulates weight/bias gradients and returns the input gradient.
  Tensor backward(const Tensor& in, const Tensor& gout) {
    Tensor gin(in.c, in.h, in.w);
    double* gw = grads.data();
    double* gb = grads.data() + weight_count();
    const double* wts = params.data();
    for (int oc = 0; oc < out_c; ++oc) {
      for (int oy = 0; oy < gout.h; ++oy) {
        for (int ox = 0; ox < gout.w; ++ox) {
          const double g = gout.at(oc, oy, ox);
          if (g == 0.0) continue;
          gb[oc] += g;
          for (int ic = 0; ic < in_c; ++ic) {
            for (int ky = 0; ky < ksize; ++ky) {
              const int iy = oy * stride + ky - pad;
              if (iy < 0 || iy >= in.h) continue;
              for (int kx = 0; kx < ksize; ++kx) {
                const int ix = ox * stride + kx - pad;
                if (ix < 0 || ix >= in.w) continue;
                const std::size_t wi =
                    ((size_t(oc) * in_c + ic) * ksize + ky) * ksize + kx;
                gw[wi] += g * in.at(ic, iy, ix);
                gin.at(ic, iy, ix) += wts[wi] * g;
              }
            }
          }
        }
      }
    }
    return gin;
  }
};

void relu_inplace(Tensor& t) {
  for (double& x : t.v) x = x > 0.0 ? x : 0.0;
}

void relu_backward_inplace(const Tensor& activated, Tensor& grad) {
  for (std::size_t i = 0; i < grad.v.size(); ++i) {
    if (activated.v[i] <= 0.0) grad.v[i] = 0.0;
  }
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Numerically stable binary cross-entropy with logits.
double bce_with_logits(double logit, double target) {
  return std::max(logit, 0.0) - logit * target + std::log1p(std::exp(-std::abs(logit)));
}

struct ToyConfig {
  std::string variant;
  std::array<int, 4> channels;
};

constexpr double kScoreThreshold = 0.05;
constexpr double kNmsIou = 0.35;
constexpr int kMaxDetections = 100;
constexpr double kMinRegression = 0.05;  // cells
constexpr double kRegressionLossWeight = 1.0;

// Four stride-2 backbone stages plus a single-scale head that predicts
// per-cell class scores and (left, top, right, bottom) extents in cell
// units, in the spirit of dense one-stage detectors.
class ToyDetector final : public DetectorBackend {
 public:
  ToyDetector(ToyConfig config, int num_classes, std::uint64_t seed)
      : config_(std::move(config)), num_classes_(num_classes) {
    if (num_classes < 1) throw UsageError("toy backend: num_classes must be >= 1");
    Rng rng(splitmix64(seed ^ 0x70795F6465746Bull));
    stages_[0] = ConvLayer{3, config_.channels[0]};
    stages_[1] = ConvLayer{config_.channels[0], config_.channels[1]};
    stages_[2] = ConvLayer{config_.channels[1], config_.channels[2]};
    stages_[3] = ConvLayer{config_.channels[2], config_.channels[3]};
    for (ConvLayer& stage : stages_) {
      stage.stride = 2;
      stage.init(rng);
    }
    // Stage 4 keeps resolution: the head works on a stride-8 grid, dense
    // enough that small instances cover several cells.
    stages_[3].stride = 1;
    init_head(rng);
  }

  std::string name() const override { return config_.variant; }
  std::string version() const override { return "1"; }
  int num_classes() const override { return num_classes_; }
  int num_stages() const override { return 4; }

  std::vector<ParameterGroupInfo> parameter_groups() const override {
    std::vector<ParameterGroupInfo> groups;
    for (int i = 0; i < 4; ++i) {
      groups.push_back({"stage" + std::to_string(i + 1), i + 1,
                        stages_[i].params.size()});
    }
    groups.push_back({"head.cls", 0, head_cls_.params.size()});
    groups.push_back({"head.reg", 0, head_reg_.params.size()});
    return groups;
  }

  std::span<double> group_parameters(const std::string& group) override {
    std::vector<double>& p = layer(group).params;
    return {p.data(), p.size()};
  }
  std::span<const double> group_parameters(const std::string& group) const override {
    const std::vector<double>& p = layer(group).params;
    return {p.data(), p.size()};
  }
  std::span<const double> group_gradients(const std::string& group) const override {
    const std::vector<double>& g = layer(group).grads;
    return {g.data(), g.size()};
  }

  void zero_gradients() override {
    for (ConvLayer& stage : stages_) std::fill(stage.grads.begin(), stage.grads.end(), 0.0);
    std::fill(head_cls_.grads.begin(), head_cls_.grads.end(), 0.0);
    std::fill(head_reg_.grads.begin(), head_reg_.grads.end(), 0.0);
  }

  double forward_backward(const ImageBuffer& image,
                          const std::vector<GroundTruthBox>& targets) override;

  std::vector<RawDetection> detect(const ImageBuffer& image) const override;

  void replace_head(int num_classes, std::uint64_t seed) override {
    if (num_classes < 1) throw UsageError("toy backend: num_classes must be >= 1");
    num_classes_ = num_classes;
    Rng rng(splitmix64(seed ^ 0x686561645F726Bull));
    init_head(rng);
  }

  nlohmann::json serialize_state() const override {
    nlohmann::json params = nlohmann::json::object();
    for (const ParameterGroupInfo& info : parameter_groups()) {
      const auto view = group_parameters(info.name);
      params[info.name] = std::vector<double>(view.begin(), view.end());
    }
    return nlohmann::json{{"backend", config_.variant},
                          {"version", version()},
                          {"num_classes", num_classes_},
                          {"params", std::move(params)}};
  }

  void load_state(const nlohmann::json& state) override {
    if (state.at("backend").get<std::string>() != config_.variant) {
      throw DataError("checkpoint backend '" +
                      state.at("backend").get<std::string>() +
                      "' does not match '" + config_.variant + "'");
    }
    const int classes = state.at("num_classes").get<int>();
    if (classes != num_classes_) {
      // Head shape depends on the class count; rebuild before loading.
      replace_head(classes, 0);
    }
    for (const auto& [group, values] : state.at("params").items()) {
      std::vector<double>& dst = layer(group).params;
      const auto src = values.get<std::vector<double>>();
      if (src.size() != dst.size()) {
        throw DataError("checkpoint group '" + group + "' has " +
                        std::to_string(src.size()) + " parameters, expected " +
                        std::to_string(dst.size()));
      }
      dst = src;
    }
  }

 private:
  struct Forward {
    Tensor input;
    std::array<Tensor, 4> stage_out;  // post-ReLU
    Tensor cls;                       // logits [num_classes][gh][gw]
    Tensor reg;                       // raw offsets [4][gh][gw]
  };

  void init_head(Rng& rng) {
    head_cls_ = ConvLayer{config_.channels[3], num_classes_, 1, 1, 0};
    head_cls_.init(rng, 1.0, -2.0);  // negative prior keeps early scores low
    head_reg_ = ConvLayer{config_.channels[3], 4, 1, 1, 0};
    head_reg_.init(rng, 1.0, 0.5);
  }

  ConvLayer& layer(const std::string& group) {
    if (group == "stage1") return stages_[0];
    if (group == "stage2") return stages_[1];
    if (group == "stage3") return stages_[2];
    if (group == "stage4") return stages_[3];
    if (group == "head.cls") return head_cls_;
    if (group == "head.reg") return head_reg_;
    throw UsageError("toy backend: unknown parameter group '" + group + "'");
  }
  const ConvLayer& layer(const std::string& group) const {
    return const_cast<ToyDetector*>(this)->layer(group);
  }

  static Tensor image_to_tensor(const ImageBuffer& image) {
    Tensor t(3, image.height, image.width);
    for (int y = 0; y < image.height; ++y) {
      for (int x = 0; x < image.width; ++x) {
        for (int c = 0; c < 3; ++c) {
          t.at(c, y, x) = image.at(x, y, c) / 255.0 - 0.5;
        }
      }
    }
    return t;
  }

  Forward run_forward(const ImageBuffer& image) const {
    Forward f;
    f.input = image_to_tensor(image);
    const Tensor* current = &f.input;
    for (int i = 0; i < 4; ++i) {
      f.stage_out[i] = stages_[i].forward(*current);
      relu_inplace(f.stage_out[i]);
      current = &f.stage_out[i];
    }
    f.cls = head_cls_.forward(*current);
    f.reg = head_reg_.forward(*current);
    return f;
  }

  ToyConfig config_;
  int num_classes_;
  std::array<ConvLayer, 4> stages_;
  ConvLayer head_cls_;
  ConvLayer head_reg_;
};

struct CellTarget {
  int class_index = -1;  // -1: background
  double l = 0, t = 0, r = 0, b = 0;
};

// Dense target assignment: a cell is positive for the smallest ground-truth
// box containing its center; boxes covering no cell center claim the cell
// nearest their own center.
std::vector<CellTarget> assign_targets(const std::vector<GroundTruthBox>& targets,
                                       int gw, int gh, double scale_x,
                                       double scale_y) {
  std::vector<CellTarget> cells(size_t(gw) * gh);
  std::vector<double> best_area(size_t(gw) * gh,
                                std::numeric_limits<double>::infinity());
  auto assign = [&](int cx, int cy, const GroundTruthBox& gt) {
    const std::size_t idx = size_t(cy) * gw + cx;
    const double area = gt.bbox.area();
    if (area >= best_area[idx]) return;
    best_area[idx] = area;
    const double px = (cx + 0.5) * scale_x;
    const double py = (cy + 0.5) * scale_y;
    cells[idx].class_index = gt.class_index;
    cells[idx].l = (px - gt.bbox.x_min) / scale_x;
    cells[idx].t = (py - gt.bbox.y_min) / scale_y;
    cells[idx].r = (gt.bbox.x_max - px) / scale_x;
    cells[idx].b = (gt.bbox.y_max - py) / scale_y;
  };

  for (const GroundTruthBox& gt : targets) {
    bool hit = false;
    for (int cy = 0; cy < gh; ++cy) {
      const double py = (cy + 0.5) * scale_y;
      if (py < gt.bbox.y_min || py > gt.bbox.y_max) continue;
      for (int cx = 0; cx < gw; ++cx) {
        const double px = (cx + 0.5) * scale_x;
        if (px < gt.bbox.x_min || px > gt.bbox.x_max) continue;
        assign(cx, cy, gt);
        hit = true;
      }
    }
    if (!hit) {
      const double bx = (gt.bbox.x_min + gt.bbox.x_max) / 2.0;
      const double by = (gt.bbox.y_min + gt.bbox.y_max) / 2.0;
      const int cx = std::clamp(static_cast<int>(bx / scale_x), 0, gw - 1);
      const int cy = std::clamp(static_cast<int>(by / scale_y), 0, gh - 1);
      assign(cx, cy, gt);
    }
  }
  return cells;
}

double ToyDetector::forward_backward(const ImageBuffer& image,
                                     const std::vector<GroundTruthBox>& targets) {
  for (const GroundTruthBox& gt : targets) {
    if (gt.class_index < 0 || gt.class_index >= num_classes_) {
      throw UsageError("toy backend: target class index " +
                       std::to_string(gt.class_index) + " outside vocabulary of " +
                       std::to_string(num_classes_));
    }
  }
  Forward f = run_forward(image);
  const int gh = f.cls.h;
  const int gw = f.cls.w;
  const double scale_x = static_cast<double>(image.width) / gw;
  const double scale_y = static_cast<double>(image.height) / gh;
  const std::vector<CellTarget> cells = assign_targets(targets, gw, gh, scale_x, scale_y);

  int npos = 0;
  for (const CellTarget& cell : cells) {
    if (cell.class_index >= 0) ++npos;
  }
  const double norm = std::max(1, npos);

  double cls_loss = 0.0;
  Tensor d_cls(f.cls.c, gh, gw);
  for (int cy = 0; cy < gh; ++cy) {
    for (int cx = 0; cx < gw; ++cx) {
      const CellTarget& cell = cells[size_t(cy) * gw + cx];
      for (int c = 0; c < num_classes_; ++c) {
        const double target = cell.class_index == c ? 1.0 : 0.0;
        const double logit = f.cls.at(c, cy, cx);
        cls_loss += bce_with_logits(logit, target);
        d_cls.at(c, cy, cx) = (sigmoid(logit) - target) / norm;
      }
    }
  }
  cls_loss /= norm;

  double reg_loss = 0.0;
  Tensor d_reg(4, gh, gw);
  for (int cy = 0; cy < gh; ++cy) {
    for (int cx = 0; cx < gw; ++cx) {
      const CellTarget& cell = cells[size_t(cy) * gw + cx];
      if (cell.class_index < 0) continue;
      const double target[4] = {cell.l, cell.t, cell.r, cell.b};
      for (int k = 0; k < 4; ++k) {
        const double diff = f.reg.at(k, cy, cx) - target[k];
        if (std::abs(diff) < 1.0) {
          reg_loss += 0.5 * diff * diff;
          d_reg.at(k, cy, cx) = kRegressionLossWeight * diff / norm;
        } else {
          reg_loss += std::abs(diff) - 0.5;
          d_reg.at(k, cy, cx) = kRegressionLossWeight * (diff > 0 ? 1.0 : -1.0) / norm;
        }
      }
    }
  }
  reg_loss *= kRegressionLossWeight / norm;

  // Backward through heads into the shared feature map, then the stages.
  Tensor d_feat = head_cls_.backward(f.stage_out[3], d_cls);
  const Tensor d_feat_reg = head_reg_.backward(f.stage_out[3], d_reg);
  for (std::size_t i = 0; i < d_feat.v.size(); ++i) d_feat.v[i] += d_feat_reg.v[i];

  Tensor grad = std::move(d_feat);
  for (int i = 3; i >= 0; --i) {
    relu_backward_inplace(f.stage_out[i], grad);
    const Tensor& input = i == 0 ? f.input : f.stage_out[i - 1];
    grad = stages_[i].backward(input, grad);
  }
  return cls_loss + reg_loss;
}

std::vector<RawDetection> ToyDetector::detect(const ImageBuffer& image) const {
  Forward f = run_forward(image);
  const int gh = f.cls.h;
  const int gw = f.cls.w;
  const double scale_x = static_cast<double>(image.width) / gw;
  const double scale_y = static_cast<double>(image.height) / gh;

  std::vector<RawDetection> candidates;
  for (int cy = 0; cy < gh; ++cy) {
    for (int cx = 0; cx < gw; ++cx) {
      int best_class = 0;
      double best_logit = f.cls.at(0, cy, cx);
      for (int c = 1; c < num_classes_; ++c) {
        if (f.cls.at(c, cy, cx) > best_logit) {
          best_logit = f.cls.at(c, cy, cx);
          best_class = c;
        }
      }
      const double score = sigmoid(best_logit);
      if (score < kScoreThreshold) continue;
      const double px = (cx + 0.5) * scale_x;
      const double py = (cy + 0.5) * scale_y;
      const double l = std::max(f.reg.at(0, cy, cx), kMinRegression) * scale_x;
      const double t = std::max(f.reg.at(1, cy, cx), kMinRegression) * scale_y;
      const double r = std::max(f.reg.at(2, cy, cx), kMinRegression) * scale_x;
      const double b = std::max(f.reg.at(3, cy, cx), kMinRegression) * scale_y;
      BoundingBox box{std::max(0.0, px - l), std::max(0.0, py - t),
                      std::min(double(image.width), px + r),
                      std::min(double(image.height), py + b)};
      if (!box.valid()) continue;
      candidates.push_back({box, best_class, score});
    }
  }

  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const RawDetection& a, const RawDetection& b) {
                     return a.confidence > b.confidence;
                   });
  std::vector<RawDetection> kept;
  for (const RawDetection& cand : candidates) {
    bool suppressed = false;
    for (const RawDetection& k : kept) {
      if (k.class_index == cand.class_index && iou(k.bbox, cand.bbox) > kNmsIou) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) {
      kept.push_back(cand);
      if (kept.size() >= kMaxDetections) break;
    }
  }
  return kept;
}

const std::map<std::string, ToyConfig>& toy_variants() {
  static const std::map<std::string, ToyConfig> variants{
      {"toy", {"toy", {8, 12, 16, 16}}},
      {"toy_wide", {"toy_wide", {12, 16, 20, 24}}},
  };
  return variants;
}

}  // namespace

std::unique_ptr<DetectorBackend> make_backend(const std::string& name,
                                              int num_classes, std::uint64_t seed) {
  const auto it = toy_variants().find(name);
  if (it == toy_variants().end()) {
    throw UsageError("unknown detector backend '" + name + "'");
  }
  return std::make_unique<ToyDetector>(it->second, num_classes, seed);
}

std::vector<std::string> registered_backends() {
  std::vector<std::string> names;
  for (const auto& [name, config] : toy_variants()) names.push_back(name);
  return names;
}

}  // namespace pointdet
