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
#ifndef CSEG_MODEL_GEMM_H_
#define CSEG_MODEL_GEMM_H_

// Row-major matrix products for the convolution layers. Every output entry
// is accumulated in a fixed order that does not depend on pointer alignment,
// so results are bitwise reproducible across runs and allocations.

namespace cseg::nn::gemm {

// C (m×n) = A (m×k) · B (k×n), or += when `accumulate`.
void nn(int m, int n, int k, const double* a, const double* b, double* c, bool accumulate);

// C (m×n) = Aᵀ · B with A stored k×m and B stored k×n, or += when `accumulate`.
void tn(int m, int n, int k, const double* a, const double* b, double* c, bool accumulate);

// C (m×n) += A · Bᵀ with A stored m×k and B stored n×k.
void nt_accumulate(int m, int n, int k, const double* a, const double* b, double* c);

// Sum of a contiguous row.
double row_sum(const double* x, int n);

}  // namespace cseg::nn::gemm

#endif  // CSEG_MODEL_GEMM_H_
