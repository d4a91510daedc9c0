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
#ifndef CSEG_TASKBENCH_SAMPLE_H_
#define CSEG_TASKBENCH_SAMPLE_H_

#include <cstdint>
#include <string>
#include <vector>

#include "cseg/common.h"

namespace cseg {

// Row-major height × width × channels raster.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int height, int width, int channels, T fill = T{})
      : height_(height),
        width_(width),
        channels_(channels),
        data_(static_cast<std::size_t>(height) * width * channels, fill) {}

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }

  T& at(int y, int x, int c = 0) { return data_[index(y, x, c)]; }
  const T& at(int y, int x, int c = 0) const { return data_[index(y, x, c)]; }

  std::vector<T>& values() { return data_; }
  const std::vector<T>& values() const { return data_; }

  bool operator==(const Grid&) const = default;

 private:
  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<T> data_;
};

using Image = Grid<std::uint8_t>;  // 3 channels, RGB
using LabelMap = Grid<int>;        // 1 channel, class ids or ignore

struct LabeledSample {
  Image image;
  LabelMap label;
  int ignore_id = kDefaultIgnoreId;
  std::string source_id;
  int task_id = -1;

  bool operator==(const LabeledSample&) const = default;
};

struct Dataset {
  std::string name;
  int num_classes = 0;
  int ignore_id = kDefaultIgnoreId;
  std::vector<LabeledSample> samples;
};

// Checks the LabeledSample invariants against a class count: matching
// spatial dimensions and every label either ignore or in [0, num_classes).
void validate_sample(const LabeledSample& sample, int num_classes);
void validate_dataset(const Dataset& dataset);

// Distinct non-ignore label values.
ClassSet present_classes(const LabelMap& label, int ignore_id);

// Keeps pixels whose class is in `allowed`; everything else becomes ignore_id.
LabelMap mask_labels(const LabelMap& label, const ClassSet& allowed, int ignore_id);

}  // namespace cseg

#endif  // CSEG_TASKBENCH_SAMPLE_H_
