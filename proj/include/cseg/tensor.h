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
#ifndef CSEG_TENSOR_H_
#define CSEG_TENSOR_H_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace cseg {

// Dense batch × channel × height × width tensor of doubles (NCHW).
class Tensor {
 public:
  Tensor() = default;
  Tensor(int batch, int channels, int height, int width, double fill = 0.0)
      : batch_(batch),
        channels_(channels),
        height_(height),
        width_(width),
        data_(static_cast<std::size_t>(batch) * channels * height * width, fill) {}

  int batch() const { return batch_; }
  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  int plane() const { return height_ * width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool same_shape(const Tensor& other) const {
    return batch_ == other.batch_ && channels_ == other.channels_ &&
           height_ == other.height_ && width_ == other.width_;
  }
  std::string shape_string() const;

  double& at(int n, int c, int y, int x) { return data_[index(n, c, y, x)]; }
  double at(int n, int c, int y, int x) const { return data_[index(n, c, y, x)]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  // Contiguous channels × plane block of one batch element.
  double* sample(int n) { return data_.data() + sample_offset(n); }
  const double* sample(int n) const { return data_.data() + sample_offset(n); }

  void fill(double value);

 private:
  std::size_t index(int n, int c, int y, int x) const {
    return ((static_cast<std::size_t>(n) * channels_ + c) * height_ + y) * width_ + x;
  }
  std::size_t sample_offset(int n) const {
    return static_cast<std::size_t>(n) * channels_ * height_ * width_;
  }

  int batch_ = 0;
  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

}  // namespace cseg

#endif  // CSEG_TENSOR_H_
