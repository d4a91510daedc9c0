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
#include "cseg/taskbench/augment.h"

#include <algorithm>
#include <cmath>

namespace cseg {

Image resize_bilinear(const Image& image, int height, int width) {
  if (height == image.height() && width == image.width()) return image;
  Image out(height, width, image.channels());
  const double sy = static_cast<double>(image.height()) / height;
  const double sx = static_cast<double>(image.width()) / width;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, image.height() - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, image.height() - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, image.width() - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, image.width() - 1);
      const double wx = fx - x0;
      for (int c = 0; c < image.channels(); ++c) {
        const double v = (1 - wy) * ((1 - wx) * image.at(y0, x0, c) + wx * image.at(y0, x1, c)) +
                         wy * ((1 - wx) * image.at(y1, x0, c) + wx * image.at(y1, x1, c));
        out.at(y, x, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

LabelMap resize_nearest(const LabelMap& label, int height, int width) {
  if (height == label.height() && width == label.width()) return label;
  LabelMap out(height, width, label.channels());
  for (int y = 0; y < height; ++y) {
    const int sy = std::min(label.height() - 1,
                            static_cast<int>((y + 0.5) * label.height() / height));
    for (int x = 0; x < width; ++x) {
      const int sx = std::min(label.width() - 1,
                              static_cast<int>((x + 0.5) * label.width() / width));
      for (int c = 0; c < label.channels(); ++c) out.at(y, x, c) = label.at(sy, sx, c);
    }
  }
  return out;
}

LabeledSample augment(const LabeledSample& sample, const AugmentPolicy& policy, Rng& rng) {
  if (policy.scale_min <= 0.0 || policy.scale_max < policy.scale_min) {
    throw InvalidArgument("augment: invalid scale range");
  }
  if (policy.crop_ratio < 0.0 || policy.crop_height < 0 || policy.crop_width < 0) {
    throw InvalidArgument("augment: negative crop parameters");
  }
  LabeledSample out = sample;
  if (policy.is_identity()) return out;

  int h = sample.image.height();
  int w = sample.image.width();
  if (policy.crop_ratio > 0.0) {
    int th = h, tw = w;
    if (static_cast<double>(w) / h > policy.crop_ratio) {
      tw = std::max(1, static_cast<int>(std::lround(h * policy.crop_ratio)));
    } else {
      th = std::max(1, static_cast<int>(std::lround(w / policy.crop_ratio)));
    }
    const int top = rng.between(0, h - th);
    const int left = rng.between(0, w - tw);
    out.image = crop(out.image, top, left, th, tw);
    out.label = crop(out.label, top, left, th, tw);
    h = th;
    w = tw;
  }

  const int min_h = std::max(1, static_cast<int>(std::lround(h * policy.scale_min)));
  const int min_w = std::max(1, static_cast<int>(std::lround(w * policy.scale_min)));
  if (policy.crop_height > min_h || policy.crop_width > min_w) {
    throw InvalidArgument("augment: final crop " + std::to_string(policy.crop_height) + "x" +
                          std::to_string(policy.crop_width) + " exceeds the image scaled by " +
                          std::to_string(policy.scale_min) + " (" + std::to_string(min_h) + "x" +
                          std::to_string(min_w) + ")");
  }

  const double scale = policy.scale_min == policy.scale_max
                           ? policy.scale_min
                           : rng.uniform(policy.scale_min, policy.scale_max);
  const int sh = std::max(1, static_cast<int>(std::lround(h * scale)));
  const int sw = std::max(1, static_cast<int>(std::lround(w * scale)));
  out.image = resize_bilinear(out.image, sh, sw);
  out.label = resize_nearest(out.label, sh, sw);

  const int ch = policy.crop_height > 0 ? policy.crop_height : sh;
  const int cw = policy.crop_width > 0 ? policy.crop_width : sw;
  if (ch > sh || cw > sw) {
    throw InvalidArgument("augment: final crop " + std::to_string(ch) + "x" +
                          std::to_string(cw) + " exceeds scaled image " + std::to_string(sh) +
                          "x" + std::to_string(sw));
  }
  if (ch != sh || cw != sw) {
    const int top = rng.between(0, sh - ch);
    const int left = rng.between(0, sw - cw);
    out.image = crop(out.image, top, left, ch, cw);
    out.label = crop(out.label, top, left, ch, cw);
  }
  return out;
}

}  // namespace cseg
