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
#ifndef CSEG_TASKBENCH_AUGMENT_H_
#define CSEG_TASKBENCH_AUGMENT_H_

#include "cseg/common.h"
#include "cseg/taskbench/sample.h"

namespace cseg {

// Applied in order: crop to aspect ratio, rescale, random crop.
struct AugmentPolicy {
  // Target width / height of the first crop; 0 keeps the input aspect.
  double crop_ratio = 0.0;
  double scale_min = 1.0;
  double scale_max = 1.0;
  // Final crop; 0 means the full scaled extent on that axis.
  int crop_height = 0;
  int crop_width = 0;

  bool is_identity() const {
    return crop_ratio == 0.0 && scale_min == 1.0 && scale_max == 1.0 && crop_height == 0 &&
           crop_width == 0;
  }
};

// Image and label share every geometric transform; labels use nearest
// neighbour resampling only.
LabeledSample augment(const LabeledSample& sample, const AugmentPolicy& policy, Rng& rng);

Image resize_bilinear(const Image& image, int height, int width);
LabelMap resize_nearest(const LabelMap& label, int height, int width);

template <typename T>
Grid<T> crop(const Grid<T>& grid, int top, int left, int height, int width) {
  Grid<T> out(height, width, grid.channels());
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < grid.channels(); ++c) out.at(y, x, c) = grid.at(top + y, left + x, c);
  return out;
}

}  // namespace cseg

#endif  // CSEG_TASKBENCH_AUGMENT_H_
