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
#ifndef CSEG_LOSSES_H_
#define CSEG_LOSSES_H_

#include <cstdint>
#include <span>
#include <vector>

#include "cseg/common.h"
#include "cseg/importance_map.h"
#include "cseg/model/seg_model.h"
#include "cseg/taskbench/sample.h"

namespace cseg {

// All losses take softmax posteriors and average over the pixels that
// contribute to them (labeled pixels for cross-entropy, masked pixels for
// distillation), not over H·W. Log arguments are floored at kLogFloor.
//
// Every loss can also accumulate `scale` times its gradient with respect to
// the logits that produced the posteriors into `grad_logits`. That gradient is
// written without dividing by probabilities, so it stays exact where the log
// floor would clip.

inline constexpr double kLogFloor = 1e-12;

using LabelBatch = std::vector<LabelMap>;
// One byte per pixel of the batch (N·H·W, row-major per image); 1 selects.
using PixelMask = std::vector<std::uint8_t>;

struct LossConfig {
  double lambda = 1.0;
  // Indexed by class id; empty means weight 1 for every class.
  std::vector<double> cil_pixel_weights;
  // Old classes distilled from the teacher (C_{k-1}).
  ClassSet distill_class_set;
};

void validate_loss_config(const LossConfig& config);

struct LossValue {
  double value = 0.0;
  std::size_t pixels = 0;
  // Set when nothing contributed (all pixels ignored or an empty mask).
  bool degenerate = false;
};

struct CompositeLoss {
  double total = 0.0;
  LossValue ce;
  LossValue kd;
};

LossValue cross_entropy(const Posteriors& posteriors, const LabelBatch& labels, int ignore_id,
                        Tensor* grad_logits = nullptr, double scale = 1.0);

// Per-pixel weight = class_weights[label]; normalized by labeled pixel count.
LossValue weighted_cross_entropy(const Posteriors& posteriors, const LabelBatch& labels,
                                 int ignore_id, std::span<const double> class_weights,
                                 Tensor* grad_logits = nullptr, double scale = 1.0);

// Soft-label cross-entropy against the teacher over `distill_classes`,
// restricted to `mask` (nullptr = every pixel).
LossValue distillation_loss(const Posteriors& student, const Posteriors& teacher,
                            const ClassSet& distill_classes, const PixelMask* mask,
                            Tensor* grad_logits = nullptr, double scale = 1.0);

// cross-entropy + lambda * full-image distillation.
CompositeLoss lwf_loss(const Posteriors& posteriors, const LabelBatch& labels,
                       const Posteriors& teacher, const LossConfig& config, int ignore_id,
                       Tensor* grad_logits = nullptr);

// Weighted cross-entropy on labeled pixels + lambda * distillation on the
// ignore_id pixels.
CompositeLoss cil_loss(const Posteriors& posteriors, const LabelBatch& labels,
                       const Posteriors& teacher, const LossConfig& config, int ignore_id,
                       Tensor* grad_logits = nullptr);

PixelMask ignore_mask(const LabelBatch& labels, int ignore_id);

// sum_i importance_i * (params_i - old_i)^2. The three collections must have
// equal length (LayoutMismatch otherwise); callers pass the parameter prefix
// that existed when the importance was estimated.
double reg_penalty(std::span<const double> params, std::span<const double> old_params,
                   const ImportanceMap& importance);
// Adds scale * d(reg_penalty)/d(params) into grad.
void reg_penalty_gradient(std::span<const double> params, std::span<const double> old_params,
                          const ImportanceMap& importance, double scale, std::span<double> grad);

// Inverse log frequency weights 1 / ln(1.02 + f_c) clamped to [lo, hi], with f_c
// the share of labeled pixels of class c in `samples`.
std::vector<double> cil_class_weights(const std::vector<LabeledSample>& samples, int num_classes,
                                      double lo = 0.5, double hi = 10.0);

}  // namespace cseg

#endif  // CSEG_LOSSES_H_
