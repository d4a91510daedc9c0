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
#include "cseg/losses.h"

#include <algorithm>
#include <cmath>
#include <string>

namespace cseg {
namespace {

double safe_log(double p) { return std::log(std::max(p, kLogFloor)); }

void check_labels(const Posteriors& posteriors, const LabelBatch& labels) {
  const Tensor& p = posteriors.probs;
  if (static_cast<int>(labels.size()) != p.batch()) {
    throw ShapeMismatch("label batch size differs from posterior batch size");
  }
  for (const auto& l : labels) {
    if (l.height() != p.height() || l.width() != p.width()) {
      throw ShapeMismatch("label map size differs from posterior size");
    }
  }
}

void check_grad(const Posteriors& posteriors, const Tensor* grad) {
  if (grad != nullptr && !grad->same_shape(posteriors.probs)) {
    throw ShapeMismatch("gradient buffer " + grad->shape_string() + " does not match posteriors " +
                        posteriors.probs.shape_string());
  }
}

// Shared by the plain and weighted variants so both follow one arithmetic path.
LossValue weighted_ce_impl(const Posteriors& posteriors, const LabelBatch& labels, int ignore_id,
                           std::span<const double> class_weights, Tensor* grad, double scale) {
  check_labels(posteriors, labels);
  check_grad(posteriors, grad);
  const Tensor& p = posteriors.probs;
  const int plane = p.plane();
  const int channels = p.channels();

  std::size_t count = 0;
  for (const auto& l : labels)
    for (int v : l.values()) count += (v != ignore_id) ? 1 : 0;
  LossValue out;
  out.pixels = count;
  if (count == 0) {
    out.degenerate = true;
    return out;
  }
  const double inv = 1.0 / static_cast<double>(count);
  double sum = 0.0;
  for (int n = 0; n < p.batch(); ++n) {
    const double* q = p.sample(n);
    double* g = grad ? grad->sample(n) : nullptr;
    const auto& lv = labels[n].values();
    for (int i = 0; i < plane; ++i) {
      const int y = lv[i];
      if (y == ignore_id) continue;
      const int ch = posteriors.channel_of(y);
      if (ch < 0) throw InvalidArgument("label class " + std::to_string(y) + " has no output channel");
      double w = 1.0;
      if (!class_weights.empty()) {
        if (y >= static_cast<int>(class_weights.size())) {
          throw InvalidArgument("no pixel weight for class " + std::to_string(y));
        }
        w = class_weights[y];
      }
      sum -= w * safe_log(q[ch * plane + i]);
      if (g) {
        const double k = scale * w * inv;
        for (int c = 0; c < channels; ++c) g[c * plane + i] += k * q[c * plane + i];
        g[ch * plane + i] -= k;
      }
    }
  }
  out.value = sum * inv;
  return out;
}

}  // namespace

void validate_loss_config(const LossConfig& config) {
  if (!(config.lambda >= 0.0)) throw InvalidArgument("lambda must be nonnegative");
  for (double w : config.cil_pixel_weights) {
    if (!(w > 0.0)) throw InvalidArgument("CIL pixel weights must be positive");
  }
}

LossValue cross_entropy(const Posteriors& posteriors, const LabelBatch& labels, int ignore_id,
                        Tensor* grad_logits, double scale) {
  return weighted_ce_impl(posteriors, labels, ignore_id, {}, grad_logits, scale);
}

LossValue weighted_cross_entropy(const Posteriors& posteriors, const LabelBatch& labels,
                                 int ignore_id, std::span<const double> class_weights,
                                 Tensor* grad_logits, double scale) {
  for (double w : class_weights) {
    if (!(w > 0.0)) throw InvalidArgument("class weights must be positive");
  }
  return weighted_ce_impl(posteriors, labels, ignore_id, class_weights, grad_logits, scale);
}

LossValue distillation_loss(const Posteriors& student, const Posteriors& teacher,
                            const ClassSet& distill_classes, const PixelMask* mask,
                            Tensor* grad_logits, double scale) {
  const Tensor& s = student.probs;
  const Tensor& t = teacher.probs;
  if (s.batch() != t.batch() || s.height() != t.height() || s.width() != t.width()) {
    throw ShapeMismatch("student " + s.shape_string() + " and teacher " + t.shape_string() +
                        " are not spatially aligned");
  }
  check_grad(student, grad_logits);
  const int plane = s.plane();
  if (mask && mask->size() != static_cast<std::size_t>(s.batch()) * plane) {
    throw ShapeMismatch("pixel mask size does not match the batch");
  }
  std::vector<int> s_ch, t_ch;
  for (ClassId c : distill_classes) {
    const int a = student.channel_of(c);
    const int b = teacher.channel_of(c);
    if (a < 0 || b < 0) {
      throw InvalidArgument("distillation class " + std::to_string(c) +
                            " missing from student or teacher outputs");
    }
    s_ch.push_back(a);
    t_ch.push_back(b);
  }
  std::size_t count = 0;
  if (mask) {
    for (auto m : *mask) count += m ? 1 : 0;
  } else {
    count = static_cast<std::size_t>(s.batch()) * plane;
  }
  LossValue out;
  out.pixels = count;
  if (count == 0) {
    out.degenerate = true;
    return out;
  }
  const double inv = 1.0 / static_cast<double>(count);
  const int channels = s.channels();
  double sum = 0.0;
  for (int n = 0; n < s.batch(); ++n) {
    const double* sp = s.sample(n);
    const double* tp = t.sample(n);
    double* g = grad_logits ? grad_logits->sample(n) : nullptr;
    for (int i = 0; i < plane; ++i) {
      if (mask && !(*mask)[static_cast<std::size_t>(n) * plane + i]) continue;
      double teacher_mass = 0.0;
      for (std::size_t k = 0; k < s_ch.size(); ++k) {
        const double tv = tp[t_ch[k] * plane + i];
        sum -= tv * safe_log(sp[s_ch[k] * plane + i]);
        teacher_mass += tv;
      }
      if (g) {
        const double k = scale * inv;
        for (int c = 0; c < channels; ++c) g[c * plane + i] += k * teacher_mass * sp[c * plane + i];
        for (std::size_t j = 0; j < s_ch.size(); ++j) {
          g[s_ch[j] * plane + i] -= k * tp[t_ch[j] * plane + i];
        }
      }
    }
  }
  out.value = sum * inv;
  return out;
}

CompositeLoss lwf_loss(const Posteriors& posteriors, const LabelBatch& labels,
                       const Posteriors& teacher, const LossConfig& config, int ignore_id,
                       Tensor* grad_logits) {
  validate_loss_config(config);
  CompositeLoss out;
  out.ce = cross_entropy(posteriors, labels, ignore_id, grad_logits);
  out.kd = distillation_loss(posteriors, teacher, config.distill_class_set, nullptr,
                             config.lambda != 0.0 ? grad_logits : nullptr, config.lambda);
  out.total = out.ce.value + config.lambda * out.kd.value;
  return out;
}

CompositeLoss cil_loss(const Posteriors& posteriors, const LabelBatch& labels,
                       const Posteriors& teacher, const LossConfig& config, int ignore_id,
                       Tensor* grad_logits) {
  validate_loss_config(config);
  CompositeLoss out;
  out.ce = weighted_cross_entropy(posteriors, labels, ignore_id, config.cil_pixel_weights,
                                  grad_logits);
  const PixelMask unlabeled = ignore_mask(labels, ignore_id);
  out.kd = distillation_loss(posteriors, teacher, config.distill_class_set, &unlabeled,
                             config.lambda != 0.0 ? grad_logits : nullptr, config.lambda);
  out.total = out.ce.value + config.lambda * out.kd.value;
  return out;
}

PixelMask ignore_mask(const LabelBatch& labels, int ignore_id) {
  PixelMask mask;
  for (const auto& l : labels)
    for (int v : l.values()) mask.push_back(v == ignore_id ? 1 : 0);
  return mask;
}

namespace {
void check_aligned(std::span<const double> params, std::span<const double> old_params,
                   const ImportanceMap& importance) {
  if (params.size() != old_params.size() || params.size() != importance.size()) {
    throw LayoutMismatch("reg_penalty: parameter collections are not aligned (" +
                         std::to_string(params.size()) + ", " + std::to_string(old_params.size()) +
                         ", " + std::to_string(importance.size()) + ")");
  }
}
}  // namespace

double reg_penalty(std::span<const double> params, std::span<const double> old_params,
                   const ImportanceMap& importance) {
  check_aligned(params, old_params, importance);
  double sum = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double d = params[i] - old_params[i];
    sum += importance.values[i] * d * d;
  }
  return sum;
}

void reg_penalty_gradient(std::span<const double> params, std::span<const double> old_params,
                          const ImportanceMap& importance, double scale, std::span<double> grad) {
  check_aligned(params, old_params, importance);
  if (grad.size() < params.size()) throw LayoutMismatch("reg_penalty_gradient: gradient too short");
  for (std::size_t i = 0; i < params.size(); ++i) {
    grad[i] += scale * 2.0 * importance.values[i] * (params[i] - old_params[i]);
  }
}

std::vector<double> cil_class_weights(const std::vector<LabeledSample>& samples, int num_classes,
                                      double lo, double hi) {
  std::vector<double> counts(num_classes, 0.0);
  double total = 0.0;
  for (const auto& s : samples) {
    for (int v : s.label.values()) {
      if (v == s.ignore_id) continue;
      if (v < 0 || v >= num_classes) throw InvalidArgument("label outside class range");
      counts[v] += 1.0;
      total += 1.0;
    }
  }
  std::vector<double> weights(num_classes);
  for (int c = 0; c < num_classes; ++c) {
    const double f = total > 0.0 ? counts[c] / total : 0.0;
    weights[c] = std::clamp(1.0 / std::log(1.02 + f), lo, hi);
  }
  return weights;
}

}  // namespace cseg
