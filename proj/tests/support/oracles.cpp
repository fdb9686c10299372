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
#include "oracles.hpp"

#include <cmath>
#include <random>

namespace p3d::testing {

Tensor<double> random_tensor(const Shape5& shape, std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor<double> t(shape);
  for (auto& v : t.storage()) v = dist(gen);
  return t;
}

Tensor<float> random_tensor_f(const Shape5& shape, std::uint64_t seed, double lo, double hi) {
  return random_tensor(shape, seed, lo, hi).cast<float>();
}

Tensor<double> naive_conv3d(const Tensor<double>& x, const Tensor<double>& w, int stride_t,
                            int stride_s, int pad_t, int pad_s) {
  const Shape5& xs = x.shape();
  const Shape5& ws = w.shape();
  const long d = static_cast<long>(ws.t), kh = static_cast<long>(ws.h),
             kw = static_cast<long>(ws.w);
  const long T = static_cast<long>(xs.t), H = static_cast<long>(xs.h),
             W = static_cast<long>(xs.w);
  const long To = (T + 2 * pad_t - d) / stride_t + 1;
  const long Ho = (H + 2 * pad_s - kh) / stride_s + 1;
  const long Wo = (W + 2 * pad_s - kw) / stride_s + 1;
  Tensor<double> y(Shape5(static_cast<std::int64_t>(xs.n), static_cast<std::int64_t>(ws.n), To,
                          Ho, Wo));
  for (std::size_t n = 0; n < xs.n; ++n)
    for (std::size_t o = 0; o < ws.n; ++o)
      for (long t = 0; t < To; ++t)
        for (long h = 0; h < Ho; ++h)
          for (long v = 0; v < Wo; ++v) {
            double acc = 0.0;
            for (std::size_t i = 0; i < ws.c; ++i)
              for (long a = 0; a < d; ++a) {
                long ti = t * stride_t - pad_t + a;
                if (ti < 0 || ti >= T) continue;
                for (long b = 0; b < kh; ++b) {
                  long hi = h * stride_s - pad_s + b;
                  if (hi < 0 || hi >= H) continue;
                  for (long c = 0; c < kw; ++c) {
                    long wi = v * stride_s - pad_s + c;
                    if (wi < 0 || wi >= W) continue;
                    acc += x(n, i, ti, hi, wi) * w(o, i, a, b, c);
                  }
                }
              }
            y(n, o, t, h, v) = acc;
          }
  return y;
}

std::pair<double, double> channel_moments(const Tensor<double>& x, std::size_t c) {
  const Shape5& s = x.shape();
  double sum = 0.0, sq = 0.0;
  std::size_t m = 0;
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t t = 0; t < s.t; ++t)
      for (std::size_t h = 0; h < s.h; ++h)
        for (std::size_t w = 0; w < s.w; ++w) {
          double v = x(n, c, t, h, w);
          sum += v;
          sq += v * v;
          ++m;
        }
  double mean = sum / static_cast<double>(m);
  return {mean, sq / static_cast<double>(m) - mean * mean};
}

Tensor<double> naive_batch_norm_train(const Tensor<double>& x, std::span<const double> gamma,
                                      std::span<const double> beta, double eps) {
  const Shape5& s = x.shape();
  Tensor<double> y(s);
  for (std::size_t c = 0; c < s.c; ++c) {
    auto [mean, var] = channel_moments(x, c);
    double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t t = 0; t < s.t; ++t)
        for (std::size_t h = 0; h < s.h; ++h)
          for (std::size_t w = 0; w < s.w; ++w)
            y(n, c, t, h, w) = gamma[c] * (x(n, c, t, h, w) - mean) * inv + beta[c];
  }
  return y;
}

std::vector<double> numeric_gradient(std::vector<double> x,
                                     const std::function<double(const std::vector<double>&)>& f,
                                     double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double keep = x[i];
    x[i] = keep + h;
    double up = f(x);
    x[i] = keep - h;
    double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

}  // namespace p3d::testing
