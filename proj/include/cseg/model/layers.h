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
#ifndef CSEG_MODEL_LAYERS_H_
#define CSEG_MODEL_LAYERS_H_

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "cseg/common.h"
#include "cseg/tensor.h"

namespace cseg::nn {

enum class ParamKind { kWeight, kBias, kNormScale, kNormShift };

// A contiguous run of parameters in the model's flat parameter vector.
struct ParamBlock {
  std::size_t offset = 0;
  std::size_t size = 0;
  ParamKind kind = ParamKind::kWeight;
  // -1 for the encoder, otherwise the owning head index.
  int section = -1;
};

// Hands out offsets into the flat parameter and buffer vectors.
class ParamLayout {
 public:
  std::size_t allocate(std::size_t size, ParamKind kind);
  std::size_t allocate_buffer(std::size_t size);
  void set_section(int section) { section_ = section; }

  std::size_t parameter_count() const { return parameter_count_; }
  std::size_t buffer_count() const { return buffer_count_; }
  const std::vector<ParamBlock>& blocks() const { return blocks_; }

 private:
  std::size_t parameter_count_ = 0;
  std::size_t buffer_count_ = 0;
  int section_ = -1;
  std::vector<ParamBlock> blocks_;
};

struct Context {
  std::span<const double> params;
  std::span<const double> buffers;
  // Non-empty when norm layers run on batch statistics; they then write
  // their updated running statistics here (same layout as `buffers`).
  std::span<double> running_out;

  bool train_norm() const { return !running_out.empty(); }
};

struct LayerCache {
  Tensor input;
  Tensor output;
  Tensor aux;
  std::vector<double> scratch;
  std::vector<LayerCache> children;
  // Norm layers: whether batch statistics were used.
  bool batch_stats = false;
};

// Layers are stateless descriptions; all numbers live in the flat vectors
// referenced by the Context, so one layer graph serves a model and its
// snapshots.
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Context& ctx, const Tensor& x, LayerCache& cache) const = 0;
  // Accumulates parameter gradients into `grad` and returns dL/dx.
  virtual Tensor backward(const Context& ctx, const LayerCache& cache, const Tensor& dy,
                          std::span<double> grad) const = 0;
  virtual void init(std::span<double> params, std::span<double> buffers, Rng& rng) const = 0;
  // Norm layers report their buffer range so freezing can pin it.
  virtual bool is_norm() const { return false; }
};

using LayerPtr = std::shared_ptr<const Layer>;

class Conv2d final : public Layer {
 public:
  // Layers feeding a BatchNorm pass bias = false; the norm shift replaces it.
  Conv2d(ParamLayout& layout, int in_channels, int out_channels, int kernel, int stride,
         int padding, int dilation = 1, bool bias = true);
  Tensor forward(const Context& ctx, const Tensor& x, LayerCache& cache) const override;
  Tensor backward(const Context& ctx, const LayerCache& cache, const Tensor& dy,
                  std::span<double> grad) const override;
  void init(std::span<double> params, std::span<double> buffers, Rng& rng) const override;

 private:
  int out_extent(int in) const { return (in + 2 * padding_ - dilation_ * (kernel_ - 1) - 1) / stride_ + 1; }

  int in_channels_, out_channels_, kernel_, stride_, padding_, dilation_;
  bool has_bias_;
  std::size_t weight_, bias_ = 0;
};

// Transposed convolution with kernel 2 and stride 2 (exact 2x upsampling).
class Upsample2x final : public Layer {
 public:
  Upsample2x(ParamLayout& layout, int in_channels, int out_channels, bool bias = true);
  Tensor forward(const Context& ctx, const Tensor& x, LayerCache& cache) const override;
  Tensor backward(const Context& ctx, const LayerCache& cache, const Tensor& dy,
                  std::span<double> grad) const override;
  void init(std::span<double> params, std::span<double> buffers, Rng& rng) const override;

 private:
  int in_channels_, out_channels_;
  bool has_bias_;
  std::size_t weight_, bias_ = 0;
};

class BatchNorm final : public Layer {
 public:
  static constexpr double kEpsilon = 1e-5;
  static constexpr double kMomentum = 0.1;

  BatchNorm(ParamLayout& layout, int channels);
  Tensor forward(const Context& ctx, const Tensor& x, LayerCache& cache) const override;
  Tensor backward(const Context& ctx, const LayerCache& cache, const Tensor& dy,
                  std::span<double> grad) const override;
  void init(std::span<double> params, std::span<double> buffers, Rng& rng) const override;
  bool is_norm() const override { return true; }

 private:
  int channels_;
  std::size_t scale_, shift_, running_mean_, running_var_;
};

class Relu final : public Layer {
 public:
  Tensor forward(const Context& ctx, const Tensor& x, LayerCache& cache) const override;
  Tensor backward(const Context& ctx, const LayerCache& cache, const Tensor& dy,
                  std::span<double> grad) const override;
  void init(std::span<double>, std::span<double>, Rng&) const override {}
};

// x + f(x) followed by ReLU, f = conv3x3 -> BN -> ReLU -> dilated conv3x3 -> BN.
class ResidualBlock final : public Layer {
 public:
  ResidualBlock(ParamLayout& layout, int channels, int dilation);
  Tensor forward(const Context& ctx, const Tensor& x, LayerCache& cache) const override;
  Tensor backward(const Context& ctx, const LayerCache& cache, const Tensor& dy,
                  std::span<double> grad) const override;
  void init(std::span<double> params, std::span<double> buffers, Rng& rng) const override;

 private:
  std::vector<LayerPtr> body_;
  Relu out_relu_;
};

// Runs a layer list front to back, filling one cache per layer.
// `caches` must hold one entry per layer.
Tensor run_forward(const std::vector<LayerPtr>& layers, const Context& ctx, const Tensor& x,
                   std::span<LayerCache> caches);
Tensor run_backward(const std::vector<LayerPtr>& layers, const Context& ctx,
                    std::span<const LayerCache> caches, const Tensor& dy,
                    std::span<double> grad);

}  // namespace cseg::nn

#endif  // CSEG_MODEL_LAYERS_H_
