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

#include <cstddef>

#include "p3d/tensor.hpp"

namespace p3d {

/// Geometry of a d x k x k convolution over NCTHW clips. Convolutions are
/// cross-correlations with zero padding and no bias.
struct KernelSpec {
  int d = 1;  ///< temporal depth in frames
  int k = 1;  ///< spatial size (square)
  int in_ch = 1;
  int out_ch = 1;
  int stride_t = 1;
  int stride_s = 1;
  int pad_t = 0;
  int pad_s = 0;

  /// "Same" padding: pad_t = (d - 1) / 2, pad_s = (k - 1) / 2. d and k must be odd.
  static KernelSpec same(int d, int k, int in_ch, int out_ch, int stride_t = 1,
                         int stride_s = 1);

  /// Throws SpecError on non-positive sizes or strides, or negative padding.
  void validate() const;

  /// (out_ch, in_ch, d, k, k).
  Shape5 weight_shape() const;
  std::size_t weight_count() const;

  /// T' = floor((T + 2 pad_t - d) / stride_t) + 1, likewise H' and W'.
  /// Throws ShapeError on a channel mismatch or an output extent below one.
  Shape5 output_shape(const Shape5& input) const;

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

/// Kernel tensor laid out as (out_ch, in_ch, d, k, k).
template <typename T>
using ConvWeights = Tensor<T>;

template <typename T>
struct ConvGrads {
  Tensor<T> dx;
  Tensor<T> dw;
};

/// Direct nine-loop cross-correlation. Kept as the correctness oracle for
/// every optimized path; accumulates taps in (in_ch, dt, dh, dw) order.
template <typename T>
Tensor<T> conv3d_ref(const Tensor<T>& x, const ConvWeights<T>& w, const KernelSpec& spec);

/// im2col lowering plus a register-blocked GEMM. Each output element sums its
/// taps in the same order as conv3d_ref.
template <typename T>
Tensor<T> conv3d(const Tensor<T>& x, const ConvWeights<T>& w, const KernelSpec& spec);

template <typename T>
ConvGrads<T> conv3d_backward(const Tensor<T>& x, const ConvWeights<T>& w,
                             const KernelSpec& spec, const Tensor<T>& dy);

/// 1 x k x k filter applied to every frame independently. Requires d = 1,
/// pad_t = 0, stride_t = 1.
template <typename T>
Tensor<T> conv_spatial(const Tensor<T>& x, const ConvWeights<T>& w, const KernelSpec& spec);
template <typename T>
ConvGrads<T> conv_spatial_backward(const Tensor<T>& x, const ConvWeights<T>& w,
                                   const KernelSpec& spec, const Tensor<T>& dy);

/// d x 1 x 1 filter along time at every pixel. Requires k = 1, pad_s = 0,
/// stride_s = 1.
template <typename T>
Tensor<T> conv_temporal(const Tensor<T>& x, const ConvWeights<T>& w, const KernelSpec& spec);
template <typename T>
ConvGrads<T> conv_temporal_backward(const Tensor<T>& x, const ConvWeights<T>& w,
                                    const KernelSpec& spec, const Tensor<T>& dy);

/// 1 x 1 x 1 channel mixing. Requires d = k = 1 and no padding; spatial and
/// temporal strides are allowed (projection shortcuts use them).
template <typename T>
Tensor<T> conv_pointwise(const Tensor<T>& x, const ConvWeights<T>& w, const KernelSpec& spec);
template <typename T>
ConvGrads<T> conv_pointwise_backward(const Tensor<T>& x, const ConvWeights<T>& w,
                                     const KernelSpec& spec, const Tensor<T>& dy);

void check_spatial_spec(const KernelSpec& spec);
void check_temporal_spec(const KernelSpec& spec);
void check_pointwise_spec(const KernelSpec& spec);

}  // namespace p3d
