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
#ifndef CSEG_TASKBENCH_DATASET_IO_H_
#define CSEG_TASKBENCH_DATASET_IO_H_

#include <filesystem>
#include <string>

#include "cseg/taskbench/sample.h"

namespace cseg {

void write_png(const std::filesystem::path& path, const Image& image);
// Labels are single-channel 8-bit rasters.
void write_png(const std::filesystem::path& path, const LabelMap& label);
Image read_image_png(const std::filesystem::path& path);
LabelMap read_label_png(const std::filesystem::path& path);

// Writes `<dir>/images/<source_id>.png` and `<dir>/labels/<source_id>.png`.
void write_dataset_split(const Dataset& dataset, const std::filesystem::path& dir);

// Reads the same layout. Image and label files are paired by stem after
// stripping the Cityscapes suffixes (_leftImg8bit, _gtFine_labelTrainIds).
Dataset read_dataset_split(const std::filesystem::path& dir, int num_classes,
                           const std::string& name, int ignore_id = kDefaultIgnoreId);

}  // namespace cseg

#endif  // CSEG_TASKBENCH_DATASET_IO_H_
