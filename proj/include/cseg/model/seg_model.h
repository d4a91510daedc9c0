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
#ifndef CSEG_MODEL_SEG_MODEL_H_
#define CSEG_MODEL_SEG_MODEL_H_

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "cseg/common.h"
#include "cseg/model/layers.h"
#include "cseg/taskbench/sample.h"
#include "cseg/tensor.h"

namespace cseg {

// Per-pixel class posteriors. Channel k holds class `classes[k]`; classes are
// kept in ascending order so the lowest channel in a tie is the lowest id.
struct Posteriors {
  Tensor probs;
  std::vector<ClassId> classes;

  int channel_of(ClassId c) const;
};

// Softmax over the channel axis of a logit tensor.
Posteriors softmax(const Tensor& logits, std::vector<ClassId> classes);

// Argmax decoding with ties broken toward the lowest class id.
std::vector<LabelMap> predict_mask(const Posteriors& posteriors);

// Stacks RGB images into an N × 3 × H × W tensor scaled to roughly [-2, 2].
Tensor images_to_tensor(std::span<const Image* const> images);
Tensor images_to_tensor(const std::vector<LabeledSample>& samples);

// Encoder-decoder layout. Each entry of `widths` is one stride-2 stage, so
// the downsampling factor is 2^widths.size(). Residual blocks run at the
// deepest resolution with the listed dilations; every decoder head mirrors
// the stages with 2x transposed convolutions.
struct ModelCapacity {
  std::vector<int> widths = {8, 16, 32};
  std::vector<int> dilations = {1, 2};

  bool operator==(const ModelCapacity&) const = default;
};

struct DecoderHead {
  int id = 0;
  ClassSet classes;
  std::vector<nn::LayerPtr> layers;
  std::size_t param_begin = 0;
  std::size_t param_end = 0;
};

class TeacherSnapshot;

class SegModel {
 public:
  SegModel(ModelCapacity capacity, std::uint64_t seed);

  // Appends a decoder head for classes no existing head covers. Existing
  // parameters are untouched; the head is initialised from the model seed
  // and its id.
  int add_decoder_head(const ClassSet& classes);

  struct Tape {
    Tensor input;
    std::vector<nn::LayerCache> encoder;
    std::vector<std::vector<nn::LayerCache>> heads;
    Tensor logits;
  };

  // Inference: norm layers use running statistics.
  Posteriors forward(const Tensor& images) const;
  Tensor logits(const Tensor& images) const;
  Tape forward_eval(const Tensor& images) const;
  // Training forward: unfrozen norm layers use batch statistics and update
  // their running statistics.
  Tape forward_train(const Tensor& images);
  Posteriors posteriors(const Tape& tape) const;

  // Gradient of a scalar with respect to every parameter, given its gradient
  // with respect to the logits. With include_encoder = false the encoder
  // part is left at zero and not computed.
  std::vector<double> backward(const Tape& tape, const Tensor& grad_logits,
                               bool include_encoder = true) const;

  void freeze_encoder(bool frozen = true) { encoder_frozen_ = frozen; }
  void freeze_norm_layers(bool frozen = true) { norm_frozen_ = frozen; }
  // Heads listed here receive no updates and keep their norm statistics.
  void set_frozen_heads(std::vector<int> head_ids) { frozen_heads_ = std::move(head_ids); }
  bool encoder_frozen() const { return encoder_frozen_; }
  bool norm_layers_frozen() const { return norm_frozen_; }
  const std::vector<int>& frozen_heads() const { return frozen_heads_; }
  bool head_frozen(int head_id) const;
  // 1 for parameters the optimizer may change.
  std::vector<std::uint8_t> trainable_mask() const;

  TeacherSnapshot snapshot() const;

  const ModelCapacity& capacity() const { return capacity_; }
  std::uint64_t seed() const { return seed_; }
  int downsampling() const { return 1 << capacity_.widths.size(); }
  const std::vector<DecoderHead>& heads() const { return heads_; }
  // Ascending union of all head classes; one output channel per entry.
  const std::vector<ClassId>& output_classes() const { return output_classes_; }
  std::size_t parameter_count() const { return params_.size(); }
  std::size_t encoder_parameter_count() const { return encoder_end_; }
  std::span<const double> parameters() const { return params_; }
  std::span<double> mutable_parameters() { return params_; }
  std::span<const double> buffers() const { return buffers_; }
  std::span<double> mutable_buffers() { return buffers_; }
  const std::vector<nn::ParamBlock>& parameter_blocks() const { return layout_.blocks(); }

 private:
  // With `running_out` non-empty, trainable norm layers use batch statistics.
  Tape run(const Tensor& images, std::span<double> running_out) const;
  void check_input(const Tensor& images) const;

  ModelCapacity capacity_;
  std::uint64_t seed_;
  nn::ParamLayout layout_;
  std::vector<nn::LayerPtr> encoder_;
  std::size_t encoder_end_ = 0;
  std::vector<DecoderHead> heads_;
  std::vector<ClassId> output_classes_;
  std::vector<double> params_;
  std::vector<double> buffers_;
  bool encoder_frozen_ = false;
  bool norm_frozen_ = false;
  std::vector<int> frozen_heads_;
};

// Deep, immutable copy of a model used as a distillation teacher.
class TeacherSnapshot {
 public:
  explicit TeacherSnapshot(const SegModel& model)
      : model_(std::make_shared<const SegModel>(model)) {}

  Posteriors forward(const Tensor& images) const { return model_->forward(images); }
  const std::vector<ClassId>& classes() const { return model_->output_classes(); }
  const SegModel& model() const { return *model_; }

 private:
  std::shared_ptr<const SegModel> model_;
};

}  // namespace cseg

#endif  // CSEG_MODEL_SEG_MODEL_H_
