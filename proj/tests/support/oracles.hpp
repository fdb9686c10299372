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

// Test-only reference implementations. None of these call into the library's
// numeric kernels; they are written straight from the definitions so that the
// optimized code paths have something independent to be compared against.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "p3d/tensor.hpp"

namespace p3d::testing {

/// Uniform values in [lo, hi) from std::mt19937_64, a generator unrelated to
/// the library's own.
Tensor<double> random_tensor(const Shape5& shape, std::uint64_t seed, double lo = -1.0,
                             double hi = 1.0);
Tensor<float> random_tensor_f(const Shape5& shape, std::uint64_t seed, double lo = -1.0,
                              double hi = 1.0);

/// Output-stationary cross-correlation with zero padding: each output sums
/// its in-bounds taps. Weight layout (out, in, d, k, k).
Tensor<double> naive_conv3d(const Tensor<double>& x, const Tensor<double>& w, int stride_t,
                            int stride_s, int pad_t, int pad_s);

/// Per-channel normalization with biased batch variance.
Tensor<double> naive_batch_norm_train(const Tensor<double>& x, std::span<const double> gamma,
                                      std::span<const double> beta, double eps);

/// Mean and (biased) variance of channel c over N, T, H, W.
std::pair<double, double> channel_moments(const Tensor<double>& x, std::size_t c);

template <typename A, typename B>
double max_abs_between(const Tensor<A>& a, const Tensor<B>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    m = std::max(m, d < 0 ? -d : d);
  }
  return m;
}

/// Central-difference gradient of a scalar function of `x`.
std::vector<double> numeric_gradient(std::vector<double> x,
                                     const std::function<double(const std::vector<double>&)>& f,
                                     double h = 1e-6);

/// Copies frame t of every (n, c) into a T = 1 tensor.
template <typename T>
Tensor<T> frame_at(const Tensor<T>& x, std::size_t t) {
  const Shape5& s = x.shape();
  Tensor<T> out(Shape5(s.n, s.c, 1, s.h, s.w));
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t h = 0; h < s.h; ++h)
        for (std::size_t w = 0; w < s.w; ++w) out(n, c, 0, h, w) = x(n, c, t, h, w);
  return out;
}

}  // namespace p3d::testing
