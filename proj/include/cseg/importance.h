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
#ifndef CSEG_IMPORTANCE_H_
#define CSEG_IMPORTANCE_H_

#include <cstdint>
#include <vector>

#include "cseg/importance_map.h"
#include "cseg/model/seg_model.h"
#include "cseg/taskbench/sample.h"

namespace cseg {

// Per-sample posteriors and parameter gradients for a differentiable model.
// Estimators only read through this interface, so the models behind it are
// never mutated.
class GradientProbe {
 public:
  virtual ~GradientProbe() = default;
  virtual std::size_t parameter_count() const = 0;
  virtual std::size_t sample_count() const = 0;
  // Inference-mode posteriors of sample i; remembered for gradient().
  virtual Posteriors evaluate(std::size_t i) = 0;
  // Parameter gradient, for the last evaluated sample, of a scalar whose
  // logit gradient is `grad_logits`.
  virtual std::vector<double> gradient(const Tensor& grad_logits) = 0;
};

// Adapts a SegModel plus a sample list. Labels are never read.
class SegModelProbe final : public GradientProbe {
 public:
  SegModelProbe(const SegModel& model, const std::vector<LabeledSample>& samples)
      : model_(model), samples_(samples) {}
  std::size_t parameter_count() const override { return model_.parameter_count(); }
  std::size_t sample_count() const override { return samples_.size(); }
  Posteriors evaluate(std::size_t i) override;
  std::vector<double> gradient(const Tensor& grad_logits) override;

 private:
  const SegModel& model_;
  const std::vector<LabeledSample>& samples_;
  SegModel::Tape tape_;
};

struct ImportanceOptions {
  // 0 selects min(200, sample count); larger than the sample count is an error.
  int n_samples = 0;
  std::uint64_t seed = 0;
  int task_id = -1;
};

inline constexpr int kDefaultImportanceSamples = 200;

// Seeded choice of which samples feed an estimate; in draw order.
std::vector<std::size_t> importance_sample_order(std::size_t available,
                                                 const ImportanceOptions& options);

// Empirical Fisher diagonal: mean over samples of the squared gradient of the
// per-image cross-entropy against the model's own argmax predictions.
ImportanceMap estimate_ewc(GradientProbe& probe, const ImportanceOptions& options = {});

// Mean over samples of |d ||f(x)||^2 / d theta|, the squared norm summed over
// all pixels and classes of the posterior tensor.
ImportanceMap estimate_mas(GradientProbe& probe, const ImportanceOptions& options = {});

ImportanceMap uniform_importance(std::size_t parameter_count);
ImportanceMap uniform_importance(const SegModel& model);

enum class AccumulateMode { kMean, kSum };

// Mean mode weights each side by its task_count.
ImportanceMap accumulate(const ImportanceMap& prev, const ImportanceMap& next,
                         AccumulateMode mode = AccumulateMode::kMean);

// Zero-pads a map to `size` entries for parameters added after estimation.
ImportanceMap extend(const ImportanceMap& map, std::size_t size);

}  // namespace cseg

#endif  // CSEG_IMPORTANCE_H_
