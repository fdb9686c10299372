/*
 * Copyright 2026 The p3d Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

// Dense row-major matrix kernels used by the convolution lowering. Every
// output element of gemm_nn is accumulated in increasing k order starting
// from zero, which is the same order conv3d_ref uses, so the two agree
// bitwise when fp contraction is disabled.

#include <algorithm>
#include <cstddef>
#include <cstring>
#include <vector>

namespace p3d::detail {

template <typename T>
struct Simd;

template <>
struct Simd<float> {
  typedef float type __attribute__((vector_size(64)));
  static constexpr std::size_t lanes = 16;
};

template <>
struct Simd<double> {
  typedef double type __attribute__((vector_size(64)));
  static constexpr std::size_t lanes = 8;
};

template <typename T>
inline typename Simd<T>::type load(const T* p) {
  typename Simd<T>::type v;
  std::memcpy(&v, p, sizeof(v));
  return v;
}

template <typename T>
inline void store(T* p, typename Simd<T>::type v) {
  std::memcpy(p, &v, sizeof(v));
}

template <typename T>
inline T horizontal_sum(typename Simd<T>::type v) {
  T s = 0;
  for (std::size_t i = 0; i < Simd<T>::lanes; ++i) s += v[i];
  return s;
}

inline constexpr std::size_t kRowTile = 4;
inline constexpr std::size_t kVecPerRow = 4;

// C[m0..m0+4, n0..n0+NR) = A[m0.., :] * B[:, n0..)
template <typename T>
inline void micro_4xnr(std::size_t K, const T* a, std::size_t lda, const T* b, std::size_t ldb,
                       T* c, std::size_t ldc) {
  using V = typename Simd<T>::type;
  constexpr std::size_t L = Simd<T>::lanes;
  V acc[kRowTile][kVecPerRow] = {};
  const T* a0 = a;
  const T* a1 = a + lda;
  const T* a2 = a + 2 * lda;
  const T* a3 = a + 3 * lda;
  for (std::size_t k = 0; k < K; ++k) {
    const T* bk = b + k * ldb;
    V bv[kVecPerRow];
    for (std::size_t v = 0; v < kVecPerRow; ++v) bv[v] = load(bk + v * L);
    // scalar * vector broadcasts the scalar
    const T x0 = a0[k];
    const T x1 = a1[k];
    const T x2 = a2[k];
    const T x3 = a3[k];
    for (std::size_t v = 0; v < kVecPerRow; ++v) {
      acc[0][v] += x0 * bv[v];
      acc[1][v] += x1 * bv[v];
      acc[2][v] += x2 * bv[v];
      acc[3][v] += x3 * bv[v];
    }
  }
  for (std::size_t r = 0; r < kRowTile; ++r)
    for (std::size_t v = 0; v < kVecPerRow; ++v) store(c + r * ldc + v * L, acc[r][v]);
}

// Single row, one vector wide; used for row and column remainders.
template <typename T>
inline void micro_1xv(std::size_t K, const T* a, const T* b, std::size_t ldb, T* c) {
  using V = typename Simd<T>::type;
  V acc = {};
  for (std::size_t k = 0; k < K; ++k) acc += a[k] * load(b + k * ldb);
  store(c, acc);
}

template <typename T>
inline void scalar_cell(std::size_t K, const T* a, const T* b, std::size_t ldb, T* c) {
  T acc = 0;
  for (std::size_t k = 0; k < K; ++k) acc += a[k] * b[k * ldb];
  *c = acc;
}

/// C (M x N) = A (M x K) * B (K x N). C is overwritten.
template <typename T>
void gemm_nn(std::size_t M, std::size_t N, std::size_t K, const T* A, const T* B, T* C) {
  constexpr std::size_t L = Simd<T>::lanes;
  constexpr std::size_t NR = L * kVecPerRow;
  if (K == 0) {
    std::fill(C, C + M * N, T(0));
    return;
  }
  // Column chunk sized so a packed K x chunk panel of B stays near 1 MiB.
  std::size_t chunk = (std::size_t{1} << 20) / (K * sizeof(T));
  chunk = std::max<std::size_t>(NR, chunk / NR * NR);
  const std::size_t n_chunks = (N + chunk - 1) / chunk;

#pragma omp parallel
  {
    std::vector<T> panel(K * chunk);
#pragma omp for schedule(static)
    for (std::size_t ci = 0; ci < n_chunks; ++ci) {
      const std::size_t c0 = ci * chunk;
      const std::size_t c1 = std::min(N, c0 + chunk);
      const std::size_t full_tiles = (c1 - c0) / NR;
      const std::size_t tail = c0 + full_tiles * NR;
      // Pack full NR-wide column tiles contiguously: [tile][k][NR].
      for (std::size_t j = 0; j < full_tiles; ++j) {
        T* dst = panel.data() + j * K * NR;
        const T* src = B + c0 + j * NR;
        for (std::size_t k = 0; k < K; ++k) std::memcpy(dst + k * NR, src + k * N, NR * sizeof(T));
      }
      std::size_t m = 0;
      for (; m + kRowTile <= M; m += kRowTile) {
        for (std::size_t j = 0; j < full_tiles; ++j)
          micro_4xnr(K, A + m * K, K, panel.data() + j * K * NR, NR, C + m * N + c0 + j * NR, N);
        for (std::size_t r = 0; r < kRowTile; ++r) {
          std::size_t nn = tail;
          for (; nn + L <= c1; nn += L)
            micro_1xv(K, A + (m + r) * K, B + nn, N, C + (m + r) * N + nn);
          for (; nn < c1; ++nn) scalar_cell(K, A + (m + r) * K, B + nn, N, C + (m + r) * N + nn);
        }
      }
      for (; m < M; ++m) {
        for (std::size_t j = 0; j < full_tiles; ++j)
          for (std::size_t v = 0; v < kVecPerRow; ++v)
            micro_1xv(K, A + m * K, panel.data() + j * K * NR + v * L, NR,
                      C + m * N + c0 + j * NR + v * L);
        std::size_t nn = tail;
        for (; nn + L <= c1; nn += L) micro_1xv(K, A + m * K, B + nn, N, C + m * N + nn);
        for (; nn < c1; ++nn) scalar_cell(K, A + m * K, B + nn, N, C + m * N + nn);
      }
    }
  }
}

/// C (M x K) += A (M x N) * B (K x N)^T. Reductions run over N with fixed
/// lane partitioning, so results do not depend on the thread count.
template <typename T>
void gemm_nt_accumulate(std::size_t M, std::size_t K, std::size_t N, const T* A, const T* B,
                        T* C) {
  using V = typename Simd<T>::type;
  constexpr std::size_t L = Simd<T>::lanes;
  const std::size_t n_vec = N / L * L;
  const std::size_t k_tiles = (K + 3) / 4;
#pragma omp parallel for schedule(static)
  for (std::size_t m = 0; m < M; ++m) {
    const T* a = A + m * N;
    for (std::size_t kt = 0; kt < k_tiles; ++kt) {
      const std::size_t k0 = kt * 4;
      const std::size_t kn = std::min<std::size_t>(4, K - k0);
      V acc[4] = {};
      for (std::size_t n = 0; n < n_vec; n += L) {
        const V av = load(a + n);
        for (std::size_t j = 0; j < kn; ++j) acc[j] += av * load(B + (k0 + j) * N + n);
      }
      for (std::size_t j = 0; j < kn; ++j) {
        T s = horizontal_sum<T>(acc[j]);
        const T* b = B + (k0 + j) * N;
        for (std::size_t n = n_vec; n < N; ++n) s += a[n] * b[n];
        C[m * K + k0 + j] += s;
      }
    }
  }
}

}  // namespace p3d::detail
