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
#include "cseg/taskbench/sample.h"

namespace cseg {

void validate_sample(const LabeledSample& sample, int num_classes) {
  if (sample.image.height() != sample.label.height() ||
      sample.image.width() != sample.label.width()) {
    throw ShapeMismatch("sample '" + sample.source_id +
                        "': image and label dimensions differ");
  }
  if (sample.image.channels() != 3 || sample.label.channels() != 1) {
    throw ShapeMismatch("sample '" + sample.source_id +
                        "': expected 3-channel image and 1-channel label");
  }
  for (int v : sample.label.values()) {
    if (v != sample.ignore_id && (v < 0 || v >= num_classes)) {
      throw InvalidArgument("sample '" + sample.source_id + "': label value " +
                            std::to_string(v) + " outside [0, " +
                            std::to_string(num_classes) + ")");
    }
  }
}

void validate_dataset(const Dataset& dataset) {
  for (const auto& sample : dataset.samples) {
    if (sample.ignore_id != dataset.ignore_id) {
      throw InvalidArgument("sample '" + sample.source_id +
                            "': ignore id differs from its dataset");
    }
    validate_sample(sample, dataset.num_classes);
  }
}

ClassSet present_classes(const LabelMap& label, int ignore_id) {
  ClassSet out;
  for (int v : label.values()) {
    if (v != ignore_id) out.insert(v);
  }
  return out;
}

LabelMap mask_labels(const LabelMap& label, const ClassSet& allowed, int ignore_id) {
  if (allowed.contains(ignore_id)) {
    throw InvalidArgument("allowed class set contains the ignore id " +
                          std::to_string(ignore_id));
  }
  LabelMap out = label;
  for (int& v : out.values()) {
    if (!allowed.contains(v)) v = ignore_id;
  }
  return out;
}

}  // namespace cseg
