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
#include "p3d/conv.hpp"

#include <string>
#include <vector>

#include "gemm.hpp"

namespace p3d {

namespace {

std::size_t as_size(int v) { return static_cast<std::size_t>(v); }

// Input coordinate for output position `o` and tap `tap`; negative or past
// the end means the tap reads zero padding.
inline long src_index(std::size_t o, int stride, int pad, int tap) {
  return static_cast<long>(o) * stride - pad + tap;
}

void check_weights(const Shape5& w, const KernelSpec& spec) {
  if (!(w == spec.weight_shape())) {
    throw ShapeError("kernel shape " + w.str() + " does not match spec " +
                     spec.weight_shape().str());
  }
}

// Unfold one batch element into a (in_ch*d*k*k) x (T'*H'*W') matrix whose row
// order matches the flattened kernel.
template <typename T>
void im2col(const T* x, const Shape5& in, const Shape5& out, const KernelSpec& s, T* col) {
  const std::size_t np = out.t * out.h * out.w;
  const long T_in = static_cast<long>(in.t), H_in = static_cast<long>(in.h),
             W_in = static_cast<long>(in.w);
  std::size_t row = 0;
  for (int i = 0; i < s.in_ch; ++i)
    for (int dt = 0; dt < s.d; ++dt)
      for (int dh = 0; dh < s.k; ++dh)
        for (int dw = 0; dw < s.k; ++dw, ++row) {
          T* dst = col + row * np;
          for (std::size_t t = 0; t < out.t; ++t) {
            const long ti = src_index(t, s.stride_t, s.pad_t, dt);
            for (std::size_t h = 0; h < out.h; ++h) {
              const long hi = src_index(h, s.stride_s, s.pad_s, dh);
              T* d = dst + (t * out.h + h) * out.w;
              if (ti < 0 || ti >= T_in || hi < 0 || hi >= H_in) {
                std::fill(d, d + out.w, T(0));
                continue;
              }
              const T* src = x + ((as_size(i) * in.t + ti) * in.h + hi) * in.w;
              for (std::size_t w = 0; w < out.w; ++w) {
                const long wi = src_index(w, s.stride_s, s.pad_s, dw);
                d[w] = (wi < 0 || wi >= W_in) ? T(0) : src[wi];
              }
            }
          }
        }
}

template <typename T>
void col2im_add(const T* col, const Shape5& in, const Shape5& out, const KernelSpec& s, T* dx) {
  const std::size_t np = out.t * out.h * out.w;
  const long T_in = static_cast<long>(in.t), H_in = static_cast<long>(in.h),
             W_in = static_cast<long>(in.w);
  std::size_t row = 0;
  for (int i = 0; i < s.in_ch; ++i)
    for (int dt = 0; dt < s.d; ++dt)
      for (int dh = 0; dh < s.k; ++dh)
        for (int dw = 0; dw < s.k; ++dw, ++row) {
          const T* src = col + row * np;
          for (std::size_t t = 0; t < out.t; ++t) {
            const long ti = src_index(t, s.stride_t, s.pad_t, dt);
            if (ti < 0 || ti >= T_in) continue;
            for (std::size_t h = 0; h < out.h; ++h) {
              const long hi = src_index(h, s.stride_s, s.pad_s, dh);
              if (hi < 0 || hi >= H_in) continue;
              T* d = dx + ((as_size(i) * in.t + ti) * in.h + hi) * in.w;
              const T* c = src + (t * out.h + h) * out.w;
              for (std::size_t w = 0; w < out.w; ++w) {
                const long wi = src_index(w, s.stride_s, s.pad_s, dw);
                if (wi >= 0 && wi < W_in) d[wi] += c[w];
              }
            }
          }
        }
}

bool is_plain_pointwise(const KernelSpec& s) {
  return s.d == 1 && s.k == 1 && s.stride_t == 1 && s.stride_s == 1 && s.pad_t == 0 &&
         s.pad_s == 0;
}

}  // namespace

KernelSpec KernelSpec::same(int d, int k, int in_ch, int out_ch, int stride_t, int stride_s) {
  if (d % 2 == 0 || k % 2 == 0) {
    throw SpecError("same padding needs odd kernel sizes, got d=" + std::to_string(d) +
                    " k=" + std::to_string(k));
  }
  KernelSpec s{d, k, in_ch, out_ch, stride_t, stride_s, (d - 1) / 2, (k - 1) / 2};
  s.validate();
  return s;
}

void KernelSpec::validate() const {
  if (d < 1 || k < 1 || in_ch < 1 || out_ch < 1 || stride_t < 1 || stride_s < 1 || pad_t < 0 ||
      pad_s < 0) {
    throw SpecError("invalid kernel spec d=" + std::to_string(d) + " k=" + std::to_string(k) +
                    " in=" + std::to_string(in_ch) + " out=" + std::to_string(out_ch) +
                    " stride=(" + std::to_string(stride_t) + "," + std::to_string(stride_s) +
                    ") pad=(" + std::to_string(pad_t) + "," + std::to_string(pad_s) + ")");
  }
}

Shape5 KernelSpec::weight_shape() const { return Shape5(out_ch, in_ch, d, k, k); }

std::size_t KernelSpec::weight_count() const { return weight_shape().count(); }

Shape5 KernelSpec::output_shape(const Shape5& in) const {
  validate();
  if (in.c != as_size(in_ch)) {
    throw ShapeError("input has " + std::to_string(in.c) + " channels, kernel expects " +
                     std::to_string(in_ch));
  }
  auto extent = [](std::size_t n, int pad, int size, int stride) -> long {
    const long span = static_cast<long>(n) + 2L * pad - size;
    if (span < 0) return 0;
    return span / stride + 1;
  };
  const long t = extent(in.t, pad_t, d, stride_t);
  const long h = extent(in.h, pad_s, k, stride_s);
  const long w = extent(in.w, pad_s, k, stride_s);
  if (t < 1 || h < 1 || w < 1) {
    throw ShapeError("kernel larger than padded input " + in.str());
  }
  return Shape5(static_cast<std::int64_t>(in.n), out_ch, t, h, w);
}

void check_spatial_spec(const KernelSpec& s) {
  s.validate();
  if (s.d != 1 || s.pad_t != 0 || s.stride_t != 1) {
    throw SpecError("spatial convolution requires d=1, pad_t=0, stride_t=1");
  }
}

void check_temporal_spec(const KernelSpec& s) {
  s.validate();
  if (s.k != 1 || s.pad_s != 0 || s.stride_s != 1) {
    throw SpecError("temporal convolution requires k=1, pad_s=0, stride_s=1");
  }
}

void check_pointwise_spec(const KernelSpec& s) {
  s.validate();
  if (s.d != 1 || s.k != 1 || s.pad_t != 0 || s.pad_s != 0) {
    throw SpecError("pointwise convolution requires d=k=1 and no padding");
  }
}

template <typename T>
Tensor<T> conv3d_ref(const Tensor<T>& x, const ConvWeights<T>& w, const KernelSpec& spec) {
  const Shape5 in = x.shape();
  const Shape5 out = spec.output_shape(in);
  check_weights(w.shape(), spec);
  Tensor<T> y(out);
  const long T_in = static_cast<long>(in.t), H_in = static_cast<long>(in.h),
             W_in = static_cast<long>(in.w);
  for (std::size_t n = 0; n < out.n; ++n)
    for (std::size_t o = 0; o < out.c; ++o)
      for (std::size_t t = 0; t < out.t; ++t)
        for (std::size_t h = 0; h < out.h; ++h)
          for (std::size_t v = 0; v < out.w; ++v) {
            T acc = 0;
            for (int i = 0; i < spec.in_ch; ++i)
              for (int dt = 0; dt < spec.d; ++dt) {
                const long ti = src_index(t, spec.stride_t, spec.pad_t, dt);
                if (ti < 0 || ti >= T_in) continue;
                for (int dh = 0; dh < spec.k; ++dh) {
                  const long hi = src_index(h, spec.stride_s, spec.pad_s, dh);
                  if (hi < 0 || hi >= H_in) continue;
                  for (int dw = 0; dw < spec.k; ++dw) {
                    const long wi = src_index(v, spec.stride_s, spec.pad_s, dw);
                    if (wi < 0 || wi >= W_in) continue;
                    acc += x(n, as_size(i), as_size(ti), as_size(hi), as_size(wi)) *
                           w(o, as_size(i), as_size(dt), as_size(dh), as_size(dw));
                  }
                }
              }
            y(n, o, t, h, v) = acc;
          }
  return y;
}

template <typename T>
Tensor<T> conv3d(const Tensor<T>& x, const ConvWeights<T>& w, const KernelSpec& spec) {
  const Shape5 in = x.shape();
  const Shape5 out = spec.output_shape(in);
  check_weights(w.shape(), spec);
  Tensor<T> y(out);
  const std::size_t M = as_size(spec.out_ch);
  const std::size_t K = spec.weight_count() / M;
  const std::size_t np = out.t * out.h * out.w;
  const std::size_t in_per = in.count() / in.n;
  const bool plain = is_plain_pointwise(spec);
  std::vector<T> col(plain ? 0 : K * np);
  for (std::size_t n = 0; n < in.n; ++n) {
    const T* xn = x.data() + n * in_per;
    const T* b = xn;
    if (!plain) {
      im2col(xn, in, out, spec, col.data());
      b = col.data();
    }
    detail::gemm_nn(M, np, K, w.data(), b, y.data() + n * M * np);
  }
  return y;
}

template <typename T>
ConvGrads<T> conv3d_backward(const Tensor<T>& x, const ConvWeights<T>& w,
                             const KernelSpec& spec, const Tensor<T>& dy) {
  const Shape5 in = x.shape();
  const Shape5 out = spec.output_shape(in);
  check_weights(w.shape(), spec);
  require_same_shape(dy.shape(), out, "conv3d_backward upstream");
  const std::size_t M = as_size(spec.out_ch);
  const std::size_t K = spec.weight_count() / M;
  const std::size_t np = out.t * out.h * out.w;
  const std::size_t in_per = in.count() / in.n;
  const bool plain = is_plain_pointwise(spec);

  // W^T so the input gradient is another row-major gemm_nn.
  std::vector<T> wt(K * M);
  for (std::size_t m = 0; m < M; ++m)
    for (std::size_t k = 0; k < K; ++k) wt[k * M + m] = w.data()[m * K + k];

  ConvGrads<T> g{Tensor<T>(in), Tensor<T>(w.shape())};
  std::vector<T> col(plain ? 0 : K * np);
  std::vector<T> dcol(plain ? 0 : K * np);
  for (std::size_t n = 0; n < in.n; ++n) {
    const T* xn = x.data() + n * in_per;
    const T* dyn = dy.data() + n * M * np;
    T* dxn = g.dx.data() + n * in_per;
    if (plain) {
      detail::gemm_nt_accumulate(M, K, np, dyn, xn, g.dw.data());
      detail::gemm_nn(K, np, M, wt.data(), dyn, dxn);
    } else {
      im2col(xn, in, out, spec, col.data());
      detail::gemm_nt_accumulate(M, K, np, dyn, col.data(), g.dw.data());
      detail::gemm_nn(K, np, M, wt.data(), dyn, dcol.data());
      col2im_add(dcol.data(), in, out, spec, dxn);
    }
  }
  return g;
}

template <typename T>
Tensor<T> conv_spatial(const Tensor<T>& x, const ConvWeights<T>& w, const KernelSpec& spec) {
  check_spatial_spec(spec);
  return conv3d(x, w, spec);
}

template <typename T>
ConvGrads<T> conv_spatial_backward(const Tensor<T>& x, const ConvWeights<T>& w,
                                   const KernelSpec& spec, const Tensor<T>& dy) {
  check_spatial_spec(spec);
  return conv3d_backward(x, w, spec, dy);
}

template <typename T>
Tensor<T> conv_temporal(const Tensor<T>& x, const ConvWeights<T>& w, const KernelSpec& spec) {
  check_temporal_spec(spec);
  return conv3d(x, w, spec);
}

template <typename T>
ConvGrads<T> conv_temporal_backward(const Tensor<T>& x, const ConvWeights<T>& w,
                                    const KernelSpec& spec, const Tensor<T>& dy) {
  check_temporal_spec(spec);
  return conv3d_backward(x, w, spec, dy);
}

template <typename T>
Tensor<T> conv_pointwise(const Tensor<T>& x, const ConvWeights<T>& w, const KernelSpec& spec) {
  check_pointwise_spec(spec);
  return conv3d(x, w, spec);
}

template <typename T>
ConvGrads<T> conv_pointwise_backward(const Tensor<T>& x, const ConvWeights<T>& w,
                                     const KernelSpec& spec, const Tensor<T>& dy) {
  check_pointwise_spec(spec);
  return conv3d_backward(x, w, spec, dy);
}

#define P3D_INSTANTIATE_CONV(T)                                                               \
  template Tensor<T> conv3d_ref(const Tensor<T>&, const ConvWeights<T>&, const KernelSpec&);  \
  template Tensor<T> conv3d(const Tensor<T>&, const ConvWeights<T>&, const KernelSpec&);      \
  template ConvGrads<T> conv3d_backward(const Tensor<T>&, const ConvWeights<T>&,             \
                                        const KernelSpec&, const Tensor<T>&);                 \
  template Tensor<T> conv_spatial(const Tensor<T>&, const ConvWeights<T>&, const KernelSpec&); \
  template ConvGrads<T> conv_spatial_backward(const Tensor<T>&, const ConvWeights<T>&,       \
                                              const KernelSpec&, const Tensor<T>&);           \
  template Tensor<T> conv_temporal(const Tensor<T>&, const ConvWeights<T>&,                  \
                                   const KernelSpec&);                                        \
  template ConvGrads<T> conv_temporal_backward(const Tensor<T>&, const ConvWeights<T>&,      \
                                               const KernelSpec&, const Tensor<T>&);          \
  template Tensor<T> conv_pointwise(const Tensor<T>&, const ConvWeights<T>&,                 \
                                    const KernelSpec&);                                       \
  template ConvGrads<T> conv_pointwise_backward(const Tensor<T>&, const ConvWeights<T>&,     \
                                                const KernelSpec&, const Tensor<T>&);

P3D_INSTANTIATE_CONV(float)
P3D_INSTANTIATE_CONV(double)

}  // namespace p3d
