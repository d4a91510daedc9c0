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
#include "model/gemm.h"

#include <algorithm>
#include <cstddef>
#include <cstring>

namespace cseg::nn::gemm {
namespace {

constexpr int kMr = 4;

// Four doubles; plain GCC/Clang vector extension, no intrinsics.
typedef double V4 __attribute__((vector_size(32)));
constexpr int kVec = 4;
constexpr int kNr = 4 * kVec;

inline V4 load(const double* p) {
  V4 v;
  std::memcpy(&v, p, sizeof(v));
  return v;
}
inline void store(double* p, V4 v) { std::memcpy(p, &v, sizeof(v)); }

// Scalar path for the tile remainders; same per-entry order as the tiles.
void edge(int i0, int i1, int j0, int j1, int n, int k, const double* a, std::ptrdiff_t ars,
          std::ptrdiff_t acs, const double* b, double* c, bool accumulate) {
  for (int i = i0; i < i1; ++i) {
    for (int j = j0; j < j1; ++j) {
      double acc = accumulate ? c[static_cast<std::size_t>(i) * n + j] : 0.0;
      for (int p = 0; p < k; ++p) acc += a[i * ars + p * acs] * b[static_cast<std::size_t>(p) * n + j];
      c[static_cast<std::size_t>(i) * n + j] = acc;
    }
  }
}

// C[i][j] (+)= sum_p A(i, p) * B[p][j], with A(i, p) = a[i * ars + p * acs].
// Each entry sums over p in ascending order, whatever the tile it falls in.
void general(int m, int n, int k, const double* a, std::ptrdiff_t ars, std::ptrdiff_t acs,
             const double* b, double* c, bool accumulate) {
  const int mt = m - m % kMr;
  const int nt = n - n % kNr;
  for (int i = 0; i < mt; i += kMr) {
    for (int j = 0; j < nt; j += kNr) {
      V4 acc[kMr][4];
      for (int r = 0; r < kMr; ++r) {
        for (int v = 0; v < 4; ++v) {
          acc[r][v] = accumulate ? load(c + static_cast<std::size_t>(i + r) * n + j + v * kVec) : V4{};
        }
      }
      for (int p = 0; p < k; ++p) {
        const double* bp = b + static_cast<std::size_t>(p) * n + j;
        const V4 b0 = load(bp), b1 = load(bp + 4), b2 = load(bp + 8), b3 = load(bp + 12);
        for (int r = 0; r < kMr; ++r) {
          const double av = a[(i + r) * ars + p * acs];
          acc[r][0] += av * b0;
          acc[r][1] += av * b1;
          acc[r][2] += av * b2;
          acc[r][3] += av * b3;
        }
      }
      for (int r = 0; r < kMr; ++r)
        for (int v = 0; v < 4; ++v) store(c + static_cast<std::size_t>(i + r) * n + j + v * kVec, acc[r][v]);
    }
    for (int j = nt; j + kVec <= n; j += kVec) {
      for (int r = 0; r < kMr; ++r) {
        V4 acc = accumulate ? load(c + static_cast<std::size_t>(i + r) * n + j) : V4{};
        for (int p = 0; p < k; ++p) {
          acc += a[(i + r) * ars + p * acs] * load(b + static_cast<std::size_t>(p) * n + j);
        }
        store(c + static_cast<std::size_t>(i + r) * n + j, acc);
      }
    }
    edge(i, i + kMr, n - n % kVec, n, n, k, a, ars, acs, b, c, accumulate);
  }
  for (int i = mt; i < m; ++i) {
    for (int j = 0; j + kVec <= n; j += kVec) {
      V4 acc = accumulate ? load(c + static_cast<std::size_t>(i) * n + j) : V4{};
      for (int p = 0; p < k; ++p) acc += a[i * ars + p * acs] * load(b + static_cast<std::size_t>(p) * n + j);
      store(c + static_cast<std::size_t>(i) * n + j, acc);
    }
    edge(i, i + 1, n - n % kVec, n, n, k, a, ars, acs, b, c, accumulate);
  }
}

// Horizontal sum combined as (l0 + l1) + (l2 + l3).
inline double reduce(V4 v) { return (v[0] + v[1]) + (v[2] + v[3]); }

// Dot product of length k: four lanes over the vector part, then the tail
// into lane 0.
inline double dot(const double* x, const double* y, int k) {
  const int kv = k - k % kVec;
  V4 acc{};
  for (int p = 0; p < kv; p += kVec) acc += load(x + p) * load(y + p);
  for (int p = kv; p < k; ++p) acc[0] += x[p] * y[p];
  return reduce(acc);
}

}  // namespace

void nn(int m, int n, int k, const double* a, const double* b, double* c, bool accumulate) {
  general(m, n, k, a, k, 1, b, c, accumulate);
}

void tn(int m, int n, int k, const double* a, const double* b, double* c, bool accumulate) {
  general(m, n, k, a, 1, m, b, c, accumulate);
}

void nt_accumulate(int m, int n, int k, const double* a, const double* b, double* c) {
  const int kv = k - k % kVec;
  const int mt = m - m % kMr;
  for (int i = 0; i < mt; i += kMr) {
    const double* a0 = a + static_cast<std::size_t>(i) * k;
    for (int j = 0; j < n; ++j) {
      const double* bj = b + static_cast<std::size_t>(j) * k;
      V4 acc[kMr] = {};
      for (int p = 0; p < kv; p += kVec) {
        const V4 bv = load(bj + p);
        for (int r = 0; r < kMr; ++r) acc[r] += load(a0 + static_cast<std::size_t>(r) * k + p) * bv;
      }
      for (int r = 0; r < kMr; ++r) {
        const double* ar = a0 + static_cast<std::size_t>(r) * k;
        for (int p = kv; p < k; ++p) acc[r][0] += ar[p] * bj[p];
        c[static_cast<std::size_t>(i + r) * n + j] += reduce(acc[r]);
      }
    }
  }
  for (int i = mt; i < m; ++i) {
    const double* ai = a + static_cast<std::size_t>(i) * k;
    for (int j = 0; j < n; ++j) c[static_cast<std::size_t>(i) * n + j] += dot(ai, b + static_cast<std::size_t>(j) * k, k);
  }
}

double row_sum(const double* x, int n) {
  const int nv = n - n % kVec;
  V4 acc{};
  for (int i = 0; i < nv; i += kVec) acc += load(x + i);
  for (int i = nv; i < n; ++i) acc[0] += x[i];
  return reduce(acc);
}

}  // namespace cseg::nn::gemm
