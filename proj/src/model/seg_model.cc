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
#include "cseg/model/seg_model.h"

#include <algorithm>
#include <cmath>

namespace cseg {

int Posteriors::channel_of(ClassId c) const {
  auto it = std::lower_bound(classes.begin(), classes.end(), c);
  if (it == classes.end() || *it != c) return -1;
  return static_cast<int>(it - classes.begin());
}

Posteriors softmax(const Tensor& logits, std::vector<ClassId> classes) {
  if (static_cast<int>(classes.size()) != logits.channels()) {
    throw ShapeMismatch("softmax: class list does not match channel count");
  }
  Posteriors out{Tensor(logits.batch(), logits.channels(), logits.height(), logits.width()),
                 std::move(classes)};
  const int plane = logits.plane();
  const int channels = logits.channels();
  for (int n = 0; n < logits.batch(); ++n) {
    const double* z = logits.sample(n);
    double* p = out.probs.sample(n);
    for (int i = 0; i < plane; ++i) {
      double m = z[i];
      for (int c = 1; c < channels; ++c) m = std::max(m, z[c * plane + i]);
      double sum = 0.0;
      for (int c = 0; c < channels; ++c) {
        const double e = std::exp(z[c * plane + i] - m);
        p[c * plane + i] = e;
        sum += e;
      }
      const double inv = 1.0 / sum;
      for (int c = 0; c < channels; ++c) p[c * plane + i] *= inv;
    }
  }
  return out;
}

std::vector<LabelMap> predict_mask(const Posteriors& posteriors) {
  const Tensor& p = posteriors.probs;
  const int plane = p.plane();
  std::vector<LabelMap> masks;
  masks.reserve(p.batch());
  for (int n = 0; n < p.batch(); ++n) {
    LabelMap mask(p.height(), p.width(), 1);
    const double* q = p.sample(n);
    auto& out = mask.values();
    for (int i = 0; i < plane; ++i) {
      int best = 0;
      for (int c = 1; c < p.channels(); ++c) {
        if (q[c * plane + i] > q[best * plane + i]) best = c;
      }
      out[i] = p.channels() > 0 ? posteriors.classes[best] : 0;
    }
    masks.push_back(std::move(mask));
  }
  return masks;
}

Tensor images_to_tensor(std::span<const Image* const> images) {
  if (images.empty()) return Tensor();
  const int h = images.front()->height();
  const int w = images.front()->width();
  Tensor t(static_cast<int>(images.size()), 3, h, w);
  for (std::size_t n = 0; n < images.size(); ++n) {
    const Image& img = *images[n];
    if (img.height() != h || img.width() != w || img.channels() != 3) {
      throw ShapeMismatch("images in a batch must share one RGB size");
    }
    double* dst = t.sample(static_cast<int>(n));
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c)
          dst[(static_cast<std::size_t>(c) * h + y) * w + x] = (img.at(y, x, c) - 127.5) / 64.0;
  }
  return t;
}

Tensor images_to_tensor(const std::vector<LabeledSample>& samples) {
  std::vector<const Image*> ptrs;
  ptrs.reserve(samples.size());
  for (const auto& s : samples) ptrs.push_back(&s.image);
  return images_to_tensor(ptrs);
}

SegModel::SegModel(ModelCapacity capacity, std::uint64_t seed)
    : capacity_(std::move(capacity)), seed_(seed) {
  if (capacity_.widths.empty()) throw InvalidArgument("model needs at least one stage");
  for (int w : capacity_.widths) {
    if (w < 1) throw InvalidArgument("model widths must be positive");
  }
  for (int d : capacity_.dilations) {
    if (d < 1) throw InvalidArgument("dilations must be positive");
  }
  layout_.set_section(-1);
  int in = 3;
  for (int w : capacity_.widths) {
    encoder_.push_back(std::make_shared<nn::Conv2d>(layout_, in, w, 3, 2, 1, 1, false));
    encoder_.push_back(std::make_shared<nn::BatchNorm>(layout_, w));
    encoder_.push_back(std::make_shared<nn::Relu>());
    in = w;
  }
  for (int d : capacity_.dilations) {
    encoder_.push_back(std::make_shared<nn::ResidualBlock>(layout_, in, d));
  }
  encoder_end_ = layout_.parameter_count();
  params_.resize(layout_.parameter_count());
  buffers_.resize(layout_.buffer_count());
  Rng rng(derive_seed(seed_, "encoder"));
  for (const auto& layer : encoder_) layer->init(params_, buffers_, rng);
}

int SegModel::add_decoder_head(const ClassSet& classes) {
  if (classes.empty()) throw InvalidArgument("decoder head needs at least one class");
  std::vector<ClassId> overlap;
  for (ClassId c : classes) {
    if (c < 0) throw InvalidArgument("class ids must be nonnegative");
    if (std::binary_search(output_classes_.begin(), output_classes_.end(), c)) {
      overlap.push_back(c);
    }
  }
  if (!overlap.empty()) {
    std::string ids;
    for (ClassId c : overlap) ids += (ids.empty() ? "" : ",") + std::to_string(c);
    throw InvalidArgument("decoder head overlaps existing heads on classes " + ids);
  }
  DecoderHead head;
  head.id = static_cast<int>(heads_.size());
  head.classes = classes;
  layout_.set_section(head.id);
  head.param_begin = layout_.parameter_count();
  const auto& widths = capacity_.widths;
  for (std::size_t i = widths.size() - 1; i > 0; --i) {
    head.layers.push_back(std::make_shared<nn::Upsample2x>(layout_, widths[i], widths[i - 1], false));
    head.layers.push_back(std::make_shared<nn::BatchNorm>(layout_, widths[i - 1]));
    head.layers.push_back(std::make_shared<nn::Relu>());
  }
  head.layers.push_back(
      std::make_shared<nn::Upsample2x>(layout_, widths[0], static_cast<int>(classes.size())));
  head.param_end = layout_.parameter_count();
  params_.resize(layout_.parameter_count());
  buffers_.resize(layout_.buffer_count());
  Rng rng(derive_seed(seed_, "head/" + std::to_string(head.id)));
  for (const auto& layer : head.layers) layer->init(params_, buffers_, rng);
  heads_.push_back(std::move(head));
  output_classes_.insert(output_classes_.end(), classes.begin(), classes.end());
  std::sort(output_classes_.begin(), output_classes_.end());
  return heads_.back().id;
}

bool SegModel::head_frozen(int head_id) const {
  return std::find(frozen_heads_.begin(), frozen_heads_.end(), head_id) != frozen_heads_.end();
}

std::vector<std::uint8_t> SegModel::trainable_mask() const {
  std::vector<std::uint8_t> mask(params_.size(), 1);
  for (const auto& block : layout_.blocks()) {
    const bool norm = block.kind == nn::ParamKind::kNormScale ||
                      block.kind == nn::ParamKind::kNormShift;
    bool frozen = norm && norm_frozen_;
    if (block.section < 0) {
      frozen = frozen || encoder_frozen_;
    } else {
      frozen = frozen || head_frozen(block.section);
    }
    if (frozen) std::fill_n(mask.begin() + block.offset, block.size, 0);
  }
  return mask;
}

void SegModel::check_input(const Tensor& images) const {
  if (images.channels() != 3) throw ShapeMismatch("model expects RGB input, got " + images.shape_string());
  if (heads_.empty()) throw InvalidArgument("model has no decoder head");
  const int f = downsampling();
  if (images.height() % f != 0 || images.width() % f != 0) {
    throw ShapeMismatch("input " + images.shape_string() + " is not divisible by the downsampling factor " +
                        std::to_string(f));
  }
}

SegModel::Tape SegModel::run(const Tensor& images, std::span<double> running_out) const {
  check_input(images);
  Tape tape;
  tape.input = images;
  const bool train = !running_out.empty();
  const auto stats_for = [&](bool trainable) {
    return train && trainable && !norm_frozen_ ? running_out : std::span<double>();
  };
  nn::Context enc{params_, buffers_, stats_for(!encoder_frozen_)};
  tape.encoder.assign(encoder_.size(), nn::LayerCache{});
  const Tensor features = nn::run_forward(encoder_, enc, images, tape.encoder);
  tape.logits = Tensor(images.batch(), static_cast<int>(output_classes_.size()), images.height(),
                       images.width());
  tape.heads.resize(heads_.size());
  const int plane = images.height() * images.width();
  for (std::size_t h = 0; h < heads_.size(); ++h) {
    const DecoderHead& head = heads_[h];
    nn::Context ctx{params_, buffers_, stats_for(!head_frozen(head.id))};
    tape.heads[h].assign(head.layers.size(), nn::LayerCache{});
    const Tensor out = nn::run_forward(head.layers, ctx, features, tape.heads[h]);
    int k = 0;
    for (ClassId c : head.classes) {
      const int channel = static_cast<int>(
          std::lower_bound(output_classes_.begin(), output_classes_.end(), c) -
          output_classes_.begin());
      for (int n = 0; n < images.batch(); ++n) {
        std::copy_n(out.sample(n) + static_cast<std::size_t>(k) * plane, plane,
                    tape.logits.sample(n) + static_cast<std::size_t>(channel) * plane);
      }
      ++k;
    }
  }
  return tape;
}

SegModel::Tape SegModel::forward_eval(const Tensor& images) const { return run(images, {}); }

SegModel::Tape SegModel::forward_train(const Tensor& images) {
  std::vector<double> updated = buffers_;
  Tape tape = run(images, updated);
  buffers_ = std::move(updated);
  return tape;
}

Posteriors SegModel::posteriors(const Tape& tape) const { return softmax(tape.logits, output_classes_); }

Posteriors SegModel::forward(const Tensor& images) const { return posteriors(forward_eval(images)); }

Tensor SegModel::logits(const Tensor& images) const { return forward_eval(images).logits; }

std::vector<double> SegModel::backward(const Tape& tape, const Tensor& grad_logits,
                                       bool include_encoder) const {
  if (!grad_logits.same_shape(tape.logits)) {
    throw ShapeMismatch("logit gradient " + grad_logits.shape_string() + " does not match logits " +
                        tape.logits.shape_string());
  }
  std::vector<double> grad(params_.size(), 0.0);
  Tensor dfeatures;
  const int plane = tape.logits.plane();
  for (std::size_t h = 0; h < heads_.size(); ++h) {
    const DecoderHead& head = heads_[h];
    Tensor g(tape.logits.batch(), static_cast<int>(head.classes.size()), tape.logits.height(),
             tape.logits.width());
    int k = 0;
    for (ClassId c : head.classes) {
      const int channel = static_cast<int>(
          std::lower_bound(output_classes_.begin(), output_classes_.end(), c) -
          output_classes_.begin());
      for (int n = 0; n < g.batch(); ++n) {
        std::copy_n(grad_logits.sample(n) + static_cast<std::size_t>(channel) * plane, plane,
                    g.sample(n) + static_cast<std::size_t>(k) * plane);
      }
      ++k;
    }
    nn::Context ctx{params_, buffers_, {}};
    Tensor d = nn::run_backward(head.layers, ctx, tape.heads[h], g, grad);
    if (dfeatures.empty()) {
      dfeatures = std::move(d);
    } else {
      auto dst = dfeatures.values();
      auto src = d.values();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
  }
  if (include_encoder) {
    nn::Context ctx{params_, buffers_, {}};
    nn::run_backward(encoder_, ctx, tape.encoder, dfeatures, grad);
  }
  return grad;
}

TeacherSnapshot SegModel::snapshot() const { return TeacherSnapshot(*this); }

}  // namespace cseg
