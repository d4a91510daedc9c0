/* Copyright 2026 The cseg Authors. All Rights Reserved.

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
#include "cseg/taskbench/shapeworld.h"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace cseg {
namespace {

constexpr std::array<std::array<double, 3>, 12> kPalette = {{
    {220, 40, 40},   {40, 180, 60},  {50, 80, 220},  {230, 200, 40},
    {200, 60, 200},  {40, 200, 210}, {240, 130, 30}, {150, 100, 60},
    {250, 250, 250}, {20, 20, 20},   {120, 200, 120}, {160, 160, 240},
}};

enum class Geometry { kDisk, kSquare, kTriangle, kDiamond, kRing, kCross, kBar, kFrame };
constexpr int kGeometryCount = 8;

bool inside(Geometry g, double u, double v) {
  // u, v in [-1, 1] relative to the shape's bounding box.
  const double r2 = u * u + v * v;
  switch (g) {
    case Geometry::kDisk: return r2 <= 1.0;
    case Geometry::kSquare: return std::abs(u) <= 0.85 && std::abs(v) <= 0.85;
    case Geometry::kTriangle: return v >= -0.9 && v <= 0.9 && std::abs(u) <= (v + 0.9) / 1.8;
    case Geometry::kDiamond: return std::abs(u) + std::abs(v) <= 1.0;
    case Geometry::kRing: return r2 <= 1.0 && r2 >= 0.3;
    case Geometry::kCross: return (std::abs(u) <= 0.3 && std::abs(v) <= 1.0) ||
                                  (std::abs(v) <= 0.3 && std::abs(u) <= 1.0);
    case Geometry::kBar: return std::abs(v) <= 0.4 && std::abs(u) <= 1.0;
    case Geometry::kFrame: return std::max(std::abs(u), std::abs(v)) <= 1.0 &&
                                  std::max(std::abs(u), std::abs(v)) >= 0.55;
  }
  return false;
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

class Painter {
 public:
  Painter(const ShapeWorldConfig& config, Rng& rng) : config_(config), rng_(rng) {}

  LabeledSample background(const std::string& id) {
    const auto& d = config_.domain;
    LabeledSample s;
    s.image = Image(config_.height, config_.width, 3);
    s.label = LabelMap(config_.height, config_.width, 1, 0);
    s.source_id = id;
    const double angle = rng_.uniform(0.0, 3.141592653589793);
    const double phase = rng_.uniform(0.0, 6.283185307179586);
    const double ca = std::cos(angle), sa = std::sin(angle);
    for (int y = 0; y < config_.height; ++y) {
      for (int x = 0; x < config_.width; ++x) {
        const double t = d.texture_amplitude *
                         std::sin(d.texture_frequency * (x * ca + y * sa) + phase);
        for (int c = 0; c < 3; ++c) {
          s.image.at(y, x, c) = to_byte(d.background[c] + t + d.noise_std * rng_.normal());
        }
      }
    }
    return s;
  }

  void draw(LabeledSample& s, ClassId cls) {
    const auto& d = config_.domain;
    const int size = rng_.between(config_.min_size,
                                  std::min({config_.max_size, config_.height, config_.width}));
    const int top = rng_.between(0, config_.height - size);
    const int left = rng_.between(0, config_.width - size);
    const Geometry g = static_cast<Geometry>((cls - 1) % kGeometryCount);
    const int shapes = config_.num_classes - 1;
    const auto& base = kPalette[static_cast<std::size_t>(
        ((cls - 1 + d.palette_rotation) % shapes + shapes) % shapes) % kPalette.size()];
    std::array<double, 3> color;
    for (int c = 0; c < 3; ++c) color[c] = base[c] * d.brightness + d.color_jitter * rng_.normal();
    const double half = size / 2.0;
    for (int y = top; y < top + size; ++y) {
      for (int x = left; x < left + size; ++x) {
        const double u = (x + 0.5 - left - half) / half;
        const double v = (y + 0.5 - top - half) / half;
        if (!inside(g, u, v)) continue;
        s.label.at(y, x) = cls;
        for (int c = 0; c < 3; ++c) {
          s.image.at(y, x, c) = to_byte(color[c] + d.noise_std * rng_.normal());
        }
      }
    }
  }

  ClassId pick_class() {
    const int shapes = config_.num_classes - 1;
    if (config_.class_weights.empty()) return 1 + static_cast<int>(rng_.below(shapes));
    double total = 0.0;
    for (double w : config_.class_weights) total += w;
    double r = rng_.uniform() * total;
    for (int k = 0; k < shapes; ++k) {
      r -= config_.class_weights[k];
      if (r < 0.0) return k + 1;
    }
    return shapes;
  }

 private:
  const ShapeWorldConfig& config_;
  Rng& rng_;
};

}  // namespace

void validate_shapeworld_config(const ShapeWorldConfig& config) {
  if (config.num_classes < 2) {
    throw InvalidArgument("shapeworld needs num_classes >= 2 (background + one shape)");
  }
  if (config.num_classes > 255) throw InvalidArgument("shapeworld supports at most 255 classes");
  if (config.height < 1 || config.width < 1) throw InvalidArgument("image size must be positive");
  if (config.num_images < 0) throw InvalidArgument("num_images must be nonnegative");
  if (config.min_shapes < 0 || config.max_shapes < config.min_shapes) {
    throw InvalidArgument("shapes_per_image range is invalid");
  }
  if (config.max_shapes > 0) {
    if (config.min_size < 3 || config.max_size < config.min_size) {
      throw InvalidArgument("shape size range is invalid");
    }
    if (config.min_size > std::min(config.height, config.width)) {
      throw InvalidArgument("image size " + std::to_string(config.height) + "x" +
                            std::to_string(config.width) + " is too small for shapes of " +
                            std::to_string(config.min_size) + " px");
    }
  }
  if (!config.class_weights.empty()) {
    if (static_cast<int>(config.class_weights.size()) != config.num_classes - 1) {
      throw InvalidArgument("class_weights needs one entry per shape class");
    }
    for (double w : config.class_weights) {
      if (!(w > 0.0)) throw InvalidArgument("class_weights must be positive");
    }
  }
}

Dataset generate_shapeworld(const ShapeWorldConfig& config) {
  validate_shapeworld_config(config);
  Dataset dataset;
  dataset.name = config.domain.name;
  dataset.num_classes = config.num_classes;
  dataset.ignore_id = kDefaultIgnoreId;
  Rng rng(config.seed);
  Painter painter(config, rng);
  std::vector<bool> seen(config.num_classes, false);
  seen[0] = true;
  for (int i = 0; i < config.num_images; ++i) {
    char id[64];
    std::snprintf(id, sizeof(id), "%s_%05d", config.id_prefix.c_str(), i);
    LabeledSample s = painter.background(id);
    const int count = rng.between(config.min_shapes, config.max_shapes);
    for (int k = 0; k < count; ++k) painter.draw(s, painter.pick_class());
    for (int v : s.label.values()) seen[v] = true;
    dataset.samples.push_back(std::move(s));
  }
  if (config.max_shapes > 0 && !dataset.samples.empty()) {
    // Coverage pass: a class that was never drawn (or was fully occluded)
    // is painted on top of a deterministic image until every class shows.
    const std::size_t n = dataset.samples.size();
    for (std::size_t round = 0;; ++round) {
      std::fill(seen.begin(), seen.end(), false);
      for (const auto& s : dataset.samples) {
        for (int v : s.label.values()) seen[v] = true;
      }
      bool missing = false;
      for (ClassId c = 1; c < config.num_classes; ++c) {
        if (seen[c]) continue;
        missing = true;
        painter.draw(dataset.samples[(static_cast<std::size_t>(c) + round) % n], c);
      }
      if (!missing) break;
    }
  }
  return dataset;
}

}  // namespace cseg
