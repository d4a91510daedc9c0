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
#include "cseg/tensor.h"

#include <algorithm>
#include <sstream>

namespace cseg {

std::string Tensor::shape_string() const {
  std::ostringstream out;
  out << batch_ << 'x' << channels_ << 'x' << height_ << 'x' << width_;
  return out.str();
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

}  // namespace cseg
