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
#include "cseg/model/layers.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "model/gemm.h"

namespace cseg::nn {
namespace {

void kaiming(std::span<double> w, int fan_in, Rng& rng) {
  const double stddev = std::sqrt(2.0 / fan_in);
  for (double& v : w) v = stddev * rng.normal();
}

}  // namespace

std::size_t ParamLayout::allocate(std::size_t size, ParamKind kind) {
  const std::size_t offset = parameter_count_;
  blocks_.push_back({offset, size, kind, section_});
  parameter_count_ += size;
  return offset;
}

std::size_t ParamLayout::allocate_buffer(std::size_t size) {
  const std::size_t offset = buffer_count_;
  buffer_count_ += size;
  return offset;
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(ParamLayout& layout, int in_channels, int out_channels, int kernel, int stride,
               int padding, int dilation, bool bias)
    : in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel),
      stride_(stride),
      padding_(padding),
      dilation_(dilation),
      has_bias_(bias) {
  weight_ = layout.allocate(static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel,
                            ParamKind::kWeight);
  if (has_bias_) bias_ = layout.allocate(out_channels, ParamKind::kBias);
}

void Conv2d::init(std::span<double> params, std::span<double>, Rng& rng) const {
  const std::size_t n = static_cast<std::size_t>(out_channels_) * in_channels_ * kernel_ * kernel_;
  kaiming(params.subspan(weight_, n), in_channels_ * kernel_ * kernel_, rng);
  if (has_bias_) std::fill_n(params.begin() + bias_, out_channels_, 0.0);
}

Tensor Conv2d::forward(const Context& ctx, const Tensor& x, LayerCache& cache) const {
  if (x.channels() != in_channels_) {
    throw ShapeMismatch("conv expects " + std::to_string(in_channels_) + " channels, got " +
                        x.shape_string());
  }
  const int ho = out_extent(x.height());
  const int wo = out_extent(x.width());
  const int rows = in_channels_ * kernel_ * kernel_;
  const int cols = ho * wo;
  Tensor y(x.batch(), out_channels_, ho, wo);
  cache.scratch.assign(static_cast<std::size_t>(x.batch()) * rows * cols, 0.0);
  cache.input = Tensor(x.batch(), x.channels(), x.height(), x.width());  // shape only
  const double* weight = ctx.params.data() + weight_;
  for (int n = 0; n < x.batch(); ++n) {
    double* col = cache.scratch.data() + static_cast<std::size_t>(n) * rows * cols;
    const double* src = x.sample(n);
    for (int c = 0; c < in_channels_; ++c) {
      for (int ky = 0; ky < kernel_; ++ky) {
        for (int kx = 0; kx < kernel_; ++kx) {
          double* row = col + static_cast<std::size_t>((c * kernel_ + ky) * kernel_ + kx) * cols;
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * stride_ - padding_ + ky * dilation_;
            if (iy < 0 || iy >= x.height()) continue;
            const double* line = src + (static_cast<std::size_t>(c) * x.height() + iy) * x.width();
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * stride_ - padding_ + kx * dilation_;
              if (ix >= 0 && ix < x.width()) row[oy * wo + ox] = line[ix];
            }
          }
        }
      }
    }
    double* out = y.sample(n);
    gemm::nn(out_channels_, cols, rows, weight, col, out, false);
    for (int o = 0; has_bias_ && o < out_channels_; ++o) {
      const double b = ctx.params[bias_ + o];
      double* line = out + static_cast<std::size_t>(o) * cols;
      for (int i = 0; i < cols; ++i) line[i] += b;
    }
  }
  return y;
}

Tensor Conv2d::backward(const Context& ctx, const LayerCache& cache, const Tensor& dy,
                        std::span<double> grad) const {
  const Tensor& shape = cache.input;
  const int ho = dy.height();
  const int wo = dy.width();
  const int rows = in_channels_ * kernel_ * kernel_;
  const int cols = ho * wo;
  Tensor dx(shape.batch(), shape.channels(), shape.height(), shape.width());
  const double* weight = ctx.params.data() + weight_;
  double* dweight = grad.data() + weight_;
  std::vector<double> dcol(static_cast<std::size_t>(rows) * cols);
  for (int n = 0; n < dy.batch(); ++n) {
    const double* col = cache.scratch.data() + static_cast<std::size_t>(n) * rows * cols;
    const double* g = dy.sample(n);
    gemm::nt_accumulate(out_channels_, rows, cols, g, col, dweight);
    for (int o = 0; has_bias_ && o < out_channels_; ++o) {
      grad[bias_ + o] += gemm::row_sum(g + static_cast<std::size_t>(o) * cols, cols);
    }
    gemm::tn(rows, cols, out_channels_, weight, g, dcol.data(), false);
    double* dst = dx.sample(n);
    for (int c = 0; c < in_channels_; ++c) {
      for (int ky = 0; ky < kernel_; ++ky) {
        for (int kx = 0; kx < kernel_; ++kx) {
          const double* row = dcol.data() + static_cast<std::size_t>((c * kernel_ + ky) * kernel_ + kx) * cols;
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * stride_ - padding_ + ky * dilation_;
            if (iy < 0 || iy >= shape.height()) continue;
            double* line = dst + (static_cast<std::size_t>(c) * shape.height() + iy) * shape.width();
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * stride_ - padding_ + kx * dilation_;
              if (ix >= 0 && ix < shape.width()) line[ix] += row[oy * wo + ox];
            }
          }
        }
      }
    }
  }
  return dx;
}

// ------------------------------------------------------------ Upsample2x

Upsample2x::Upsample2x(ParamLayout& layout, int in_channels, int out_channels, bool bias)
    : in_channels_(in_channels), out_channels_(out_channels), has_bias_(bias) {
  weight_ = layout.allocate(static_cast<std::size_t>(in_channels) * out_channels * 4,
                            ParamKind::kWeight);
  if (has_bias_) bias_ = layout.allocate(out_channels, ParamKind::kBias);
}

void Upsample2x::init(std::span<double> params, std::span<double>, Rng& rng) const {
  kaiming(params.subspan(weight_, static_cast<std::size_t>(in_channels_) * out_channels_ * 4),
          in_channels_, rng);
  if (has_bias_) std::fill_n(params.begin() + bias_, out_channels_, 0.0);
}

// Weight layout [in][out][2][2], viewed as an in × (out·4) matrix.
Tensor Upsample2x::forward(const Context& ctx, const Tensor& x, LayerCache& cache) const {
  if (x.channels() != in_channels_) {
    throw ShapeMismatch("upsample expects " + std::to_string(in_channels_) + " channels, got " +
                        x.shape_string());
  }
  const int h = x.height(), w = x.width(), hw = h * w;
  Tensor y(x.batch(), out_channels_, 2 * h, 2 * w);
  const double* weight = ctx.params.data() + weight_;
  std::vector<double> prod(static_cast<std::size_t>(out_channels_) * 4 * hw);
  for (int n = 0; n < x.batch(); ++n) {
    gemm::tn(out_channels_ * 4, hw, in_channels_, weight, x.sample(n), prod.data(), false);
    double* out = y.sample(n);
    for (int o = 0; o < out_channels_; ++o) {
      const double b = has_bias_ ? ctx.params[bias_ + o] : 0.0;
      double* plane = out + static_cast<std::size_t>(o) * 4 * hw;
      for (int a = 0; a < 2; ++a) {
        for (int bb = 0; bb < 2; ++bb) {
          const double* row = prod.data() + static_cast<std::size_t>(o * 4 + a * 2 + bb) * hw;
          for (int i = 0; i < h; ++i) {
            double* line = plane + static_cast<std::size_t>(2 * i + a) * 2 * w + bb;
            for (int j = 0; j < w; ++j) line[2 * j] = row[i * w + j] + b;
          }
        }
      }
    }
  }
  cache.input = x;
  return y;
}

Tensor Upsample2x::backward(const Context& ctx, const LayerCache& cache, const Tensor& dy,
                            std::span<double> grad) const {
  const Tensor& x = cache.input;
  const int h = x.height(), w = x.width(), hw = h * w;
  Tensor dx(x.batch(), x.channels(), h, w);
  const double* weight = ctx.params.data() + weight_;
  double* dweight = grad.data() + weight_;
  std::vector<double> gathered(static_cast<std::size_t>(out_channels_) * 4 * hw);
  for (int n = 0; n < x.batch(); ++n) {
    const double* g = dy.sample(n);
    for (int o = 0; o < out_channels_; ++o) {
      const double* plane = g + static_cast<std::size_t>(o) * 4 * hw;
      double bias_sum = 0.0;
      for (int a = 0; a < 2; ++a) {
        for (int bb = 0; bb < 2; ++bb) {
          double* row = gathered.data() + static_cast<std::size_t>(o * 4 + a * 2 + bb) * hw;
          for (int i = 0; i < h; ++i) {
            const double* line = plane + static_cast<std::size_t>(2 * i + a) * 2 * w + bb;
            for (int j = 0; j < w; ++j) {
              row[i * w + j] = line[2 * j];
              bias_sum += line[2 * j];
            }
          }
        }
      }
      if (has_bias_) grad[bias_ + o] += bias_sum;
    }
    gemm::nt_accumulate(in_channels_, out_channels_ * 4, hw, x.sample(n), gathered.data(), dweight);
    gemm::nn(in_channels_, hw, out_channels_ * 4, weight, gathered.data(), dx.sample(n), false);
  }
  return dx;
}

// ------------------------------------------------------------- BatchNorm

BatchNorm::BatchNorm(ParamLayout& layout, int channels) : channels_(channels) {
  scale_ = layout.allocate(channels, ParamKind::kNormScale);
  shift_ = layout.allocate(channels, ParamKind::kNormShift);
  running_mean_ = layout.allocate_buffer(channels);
  running_var_ = layout.allocate_buffer(channels);
}

void BatchNorm::init(std::span<double> params, std::span<double> buffers, Rng&) const {
  std::fill_n(params.begin() + scale_, channels_, 1.0);
  std::fill_n(params.begin() + shift_, channels_, 0.0);
  std::fill_n(buffers.begin() + running_mean_, channels_, 0.0);
  std::fill_n(buffers.begin() + running_var_, channels_, 1.0);
}

// scratch holds per-channel inverse std; aux holds the normalized input.
Tensor BatchNorm::forward(const Context& ctx, const Tensor& x, LayerCache& cache) const {
  if (x.channels() != channels_) throw ShapeMismatch("batch norm channel mismatch");
  const int plane = x.plane();
  const double count = static_cast<double>(x.batch()) * plane;
  Tensor y(x.batch(), x.channels(), x.height(), x.width());
  cache.aux = Tensor(x.batch(), x.channels(), x.height(), x.width());
  cache.scratch.assign(channels_, 0.0);
  for (int c = 0; c < channels_; ++c) {
    double mean, var;
    if (ctx.train_norm()) {
      double sum = 0.0;
      for (int n = 0; n < x.batch(); ++n) {
        const double* p = x.sample(n) + static_cast<std::size_t>(c) * plane;
        for (int i = 0; i < plane; ++i) sum += p[i];
      }
      mean = sum / count;
      double sq = 0.0;
      for (int n = 0; n < x.batch(); ++n) {
        const double* p = x.sample(n) + static_cast<std::size_t>(c) * plane;
        for (int i = 0; i < plane; ++i) sq += (p[i] - mean) * (p[i] - mean);
      }
      var = sq / count;
      const double unbiased = count > 1 ? sq / (count - 1) : var;
      ctx.running_out[running_mean_ + c] =
          (1.0 - kMomentum) * ctx.buffers[running_mean_ + c] + kMomentum * mean;
      ctx.running_out[running_var_ + c] =
          (1.0 - kMomentum) * ctx.buffers[running_var_ + c] + kMomentum * unbiased;
    } else {
      mean = ctx.buffers[running_mean_ + c];
      var = ctx.buffers[running_var_ + c];
    }
    const double inv_std = 1.0 / std::sqrt(var + kEpsilon);
    cache.scratch[c] = inv_std;
    const double gamma = ctx.params[scale_ + c];
    const double beta = ctx.params[shift_ + c];
    for (int n = 0; n < x.batch(); ++n) {
      const double* p = x.sample(n) + static_cast<std::size_t>(c) * plane;
      double* xh = cache.aux.sample(n) + static_cast<std::size_t>(c) * plane;
      double* q = y.sample(n) + static_cast<std::size_t>(c) * plane;
      for (int i = 0; i < plane; ++i) {
        xh[i] = (p[i] - mean) * inv_std;
        q[i] = gamma * xh[i] + beta;
      }
    }
  }
  cache.batch_stats = ctx.train_norm();
  return y;
}

Tensor BatchNorm::backward(const Context& ctx, const LayerCache& cache, const Tensor& dy,
                           std::span<double> grad) const {
  const Tensor& xhat = cache.aux;
  const bool batch_stats = cache.batch_stats;
  const int plane = dy.plane();
  const double count = static_cast<double>(dy.batch()) * plane;
  Tensor dx(dy.batch(), dy.channels(), dy.height(), dy.width());
  for (int c = 0; c < channels_; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int n = 0; n < dy.batch(); ++n) {
      const double* g = dy.sample(n) + static_cast<std::size_t>(c) * plane;
      const double* xh = xhat.sample(n) + static_cast<std::size_t>(c) * plane;
      for (int i = 0; i < plane; ++i) {
        sum_dy += g[i];
        sum_dy_xhat += g[i] * xh[i];
      }
    }
    grad[scale_ + c] += sum_dy_xhat;
    grad[shift_ + c] += sum_dy;
    const double gamma = ctx.params[scale_ + c];
    const double k = gamma * cache.scratch[c];
    for (int n = 0; n < dy.batch(); ++n) {
      const double* g = dy.sample(n) + static_cast<std::size_t>(c) * plane;
      const double* xh = xhat.sample(n) + static_cast<std::size_t>(c) * plane;
      double* d = dx.sample(n) + static_cast<std::size_t>(c) * plane;
      if (batch_stats) {
        for (int i = 0; i < plane; ++i) {
          d[i] = k * (g[i] - sum_dy / count - xh[i] * sum_dy_xhat / count);
        }
      } else {
        for (int i = 0; i < plane; ++i) d[i] = k * g[i];
      }
    }
  }
  return dx;
}

// ------------------------------------------------------------------ Relu

Tensor Relu::forward(const Context&, const Tensor& x, LayerCache& cache) const {
  Tensor y = x;
  for (double& v : y.values()) v = v > 0.0 ? v : 0.0;
  cache.output = y;
  return y;
}

Tensor Relu::backward(const Context&, const LayerCache& cache, const Tensor& dy,
                      std::span<double>) const {
  Tensor dx = dy;
  auto out = cache.output.values();
  auto d = dx.values();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!(out[i] > 0.0)) d[i] = 0.0;
  }
  return dx;
}

// --------------------------------------------------------- ResidualBlock

ResidualBlock::ResidualBlock(ParamLayout& layout, int channels, int dilation) {
  body_.push_back(std::make_shared<Conv2d>(layout, channels, channels, 3, 1, 1, 1, false));
  body_.push_back(std::make_shared<BatchNorm>(layout, channels));
  body_.push_back(std::make_shared<Relu>());
  body_.push_back(std::make_shared<Conv2d>(layout, channels, channels, 3, 1, dilation, dilation, false));
  body_.push_back(std::make_shared<BatchNorm>(layout, channels));
}

void ResidualBlock::init(std::span<double> params, std::span<double> buffers, Rng& rng) const {
  for (const auto& layer : body_) layer->init(params, buffers, rng);
}

Tensor ResidualBlock::forward(const Context& ctx, const Tensor& x, LayerCache& cache) const {
  cache.children.assign(body_.size() + 1, LayerCache{});
  Tensor f = run_forward(body_, ctx, x, std::span(cache.children).first(body_.size()));
  auto fv = f.values();
  auto xv = x.values();
  for (std::size_t i = 0; i < fv.size(); ++i) fv[i] += xv[i];
  return out_relu_.forward(ctx, f, cache.children.back());
}

Tensor ResidualBlock::backward(const Context& ctx, const LayerCache& cache, const Tensor& dy,
                               std::span<double> grad) const {
  Tensor d = out_relu_.backward(ctx, cache.children.back(), dy, grad);
  Tensor dx = run_backward(body_, ctx, std::span(cache.children).first(body_.size()), d, grad);
  auto dxv = dx.values();
  auto dv = d.values();
  for (std::size_t i = 0; i < dxv.size(); ++i) dxv[i] += dv[i];
  return dx;
}

Tensor run_forward(const std::vector<LayerPtr>& layers, const Context& ctx, const Tensor& x,
                   std::span<LayerCache> caches) {
  Tensor h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) h = layers[i]->forward(ctx, h, caches[i]);
  return h;
}

Tensor run_backward(const std::vector<LayerPtr>& layers, const Context& ctx,
                    std::span<const LayerCache> caches, const Tensor& dy,
                    std::span<double> grad) {
  Tensor d = dy;
  for (std::size_t i = layers.size(); i-- > 0;) d = layers[i]->backward(ctx, caches[i], d, grad);
  return d;
}

}  // namespace cseg::nn
