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
#ifndef CSEG_TASKBENCH_SHAPEWORLD_H_
#define CSEG_TASKBENCH_SHAPEWORLD_H_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cseg/taskbench/sample.h"

namespace cseg {

// Appearance of one synthetic domain.
struct DomainParams {
  std::string name = "shapeworld";
  std::array<double, 3> background = {90.0, 90.0, 90.0};
  double texture_amplitude = 12.0;
  // Radians per pixel of the background stripe texture.
  double texture_frequency = 0.35;
  double noise_std = 6.0;
  double color_jitter = 12.0;
  // Shape classes pick their color from the palette shifted by this amount,
  // so two domains with different rotations disagree on class colors.
  int palette_rotation = 0;
  // Multiplies every shape color before jitter.
  double brightness = 1.0;
};

// Class 0 is background, classes 1..num_classes-1 are shapes. Each shape
// class has its own geometry and palette color.
struct ShapeWorldConfig {
  int height = 64;
  int width = 64;
  int num_classes = 4;
  int num_images = 100;
  int min_shapes = 1;
  int max_shapes = 4;
  int min_size = 10;
  int max_size = 22;
  // Relative draw weights for shape classes 1..num_classes-1; empty = uniform.
  std::vector<double> class_weights;
  DomainParams domain;
  std::uint64_t seed = 0;
  // Prefix for sample source ids.
  std::string id_prefix = "sw";
};

void validate_shapeworld_config(const ShapeWorldConfig& config);

// Deterministic in (config, seed). When shapes are requested, every class
// appears in at least one image.
Dataset generate_shapeworld(const ShapeWorldConfig& config);

}  // namespace cseg

#endif  // CSEG_TASKBENCH_SHAPEWORLD_H_
