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
#ifndef CSEG_IMPORTANCE_MAP_H_
#define CSEG_IMPORTANCE_MAP_H_

#include <string>
#include <vector>

namespace cseg {

// Nonnegative per-parameter weights, index-aligned with a model's flat
// parameter vector (a prefix of it once newer heads have been added).
struct ImportanceMap {
  std::vector<double> values;
  std::string method;
  int task_id = -1;
  int sample_count = 0;
  // Number of tasks folded into `values` by accumulate().
  int task_count = 1;

  std::size_t size() const { return values.size(); }
};

}  // namespace cseg

#endif  // CSEG_IMPORTANCE_MAP_H_
