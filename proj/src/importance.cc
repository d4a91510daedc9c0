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
#include "cseg/importance.h"

#include <algorithm>
#include <cmath>

#include "cseg/losses.h"

namespace cseg {

Posteriors SegModelProbe::evaluate(std::size_t i) {
  const Image* image = &samples_.at(i).image;
  tape_ = model_.forward_eval(images_to_tensor(std::span<const Image* const>(&image, 1)));
  return model_.posteriors(tape_);
}

std::vector<double> SegModelProbe::gradient(const Tensor& grad_logits) {
  return model_.backward(tape_, grad_logits);
}

std::vector<std::size_t> importance_sample_order(std::size_t available,
                                                 const ImportanceOptions& options) {
  if (available == 0) throw InvalidArgument("importance estimation needs at least one sample");
  if (options.n_samples < 0) throw InvalidArgument("n_samples must be nonnegative");
  std::size_t n = options.n_samples == 0
                      ? std::min<std::size_t>(kDefaultImportanceSamples, available)
                      : static_cast<std::size_t>(options.n_samples);
  if (n > available) {
    throw InvalidArgument("n_samples " + std::to_string(n) + " exceeds the " +
                          std::to_string(available) + " available samples");
  }
  std::vector<std::size_t> order(available);
  for (std::size_t i = 0; i < available; ++i) order[i] = i;
  Rng rng(options.seed);
  rng.shuffle(order);
  order.resize(n);
  return order;
}

namespace {

ImportanceMap empty_map(const GradientProbe& probe, const char* method,
                        const ImportanceOptions& options, std::size_t n) {
  ImportanceMap map;
  map.values.assign(probe.parameter_count(), 0.0);
  map.method = method;
  map.task_id = options.task_id;
  map.sample_count = static_cast<int>(n);
  return map;
}

}  // namespace

ImportanceMap estimate_ewc(GradientProbe& probe, const ImportanceOptions& options) {
  const auto order = importance_sample_order(probe.sample_count(), options);
  ImportanceMap map = empty_map(probe, "ewc", options, order.size());
  const double inv = 1.0 / static_cast<double>(order.size());
  for (std::size_t i : order) {
    const Posteriors p = probe.evaluate(i);
    const LabelBatch targets = predict_mask(p);
    Tensor grad(p.probs.batch(), p.probs.channels(), p.probs.height(), p.probs.width());
    // No pixel is ignored: -1 never collides with a predicted class.
    cross_entropy(p, targets, -1, &grad);
    const std::vector<double> g = probe.gradient(grad);
    for (std::size_t k = 0; k < g.size(); ++k) map.values[k] += g[k] * g[k] * inv;
  }
  return map;
}

ImportanceMap estimate_mas(GradientProbe& probe, const ImportanceOptions& options) {
  const auto order = importance_sample_order(probe.sample_count(), options);
  ImportanceMap map = empty_map(probe, "mas", options, order.size());
  const double inv = 1.0 / static_cast<double>(order.size());
  for (std::size_t i : order) {
    const Posteriors p = probe.evaluate(i);
    const Tensor& q = p.probs;
    Tensor grad(q.batch(), q.channels(), q.height(), q.width());
    const int plane = q.plane();
    for (int n = 0; n < q.batch(); ++n) {
      const double* pv = q.sample(n);
      double* g = grad.sample(n);
      for (int px = 0; px < plane; ++px) {
        double sq = 0.0;
        for (int c = 0; c < q.channels(); ++c) sq += pv[c * plane + px] * pv[c * plane + px];
        // d/dz_j sum_c p_c^2 = 2 p_j (p_j - sum_c p_c^2)
        for (int c = 0; c < q.channels(); ++c) {
          const double pj = pv[c * plane + px];
          g[c * plane + px] = 2.0 * pj * (pj - sq);
        }
      }
    }
    const std::vector<double> g = probe.gradient(grad);
    for (std::size_t k = 0; k < g.size(); ++k) map.values[k] += std::abs(g[k]) * inv;
  }
  return map;
}

ImportanceMap uniform_importance(std::size_t parameter_count) {
  ImportanceMap map;
  map.values.assign(parameter_count, 1.0);
  map.method = "l2";
  return map;
}

ImportanceMap uniform_importance(const SegModel& model) {
  return uniform_importance(model.parameter_count());
}

ImportanceMap accumulate(const ImportanceMap& prev, const ImportanceMap& next,
                         AccumulateMode mode) {
  if (prev.size() != next.size()) {
    throw LayoutMismatch("accumulate: importance maps have " + std::to_string(prev.size()) +
                         " and " + std::to_string(next.size()) + " entries");
  }
  ImportanceMap out = next;
  out.sample_count = prev.sample_count + next.sample_count;
  out.task_count = prev.task_count + next.task_count;
  if (mode == AccumulateMode::kSum) {
    for (std::size_t i = 0; i < out.size(); ++i) out.values[i] = prev.values[i] + next.values[i];
  } else {
    const double a = prev.task_count, b = next.task_count;
    for (std::size_t i = 0; i < out.size(); ++i) {
      out.values[i] = (a * prev.values[i] + b * next.values[i]) / (a + b);
    }
  }
  return out;
}

ImportanceMap extend(const ImportanceMap& map, std::size_t size) {
  if (size < map.size()) throw LayoutMismatch("extend: cannot shrink an importance map");
  ImportanceMap out = map;
  out.values.resize(size, 0.0);
  return out;
}

}  // namespace cseg
