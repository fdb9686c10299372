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
#include "p3d/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "p3d/rng.hpp"

namespace p3d {

// ---------------------------------------------------------------------------
// Batch normalization

template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, std::span<const T> gamma, std::span<const T> beta,
                     BnMode mode, BnState<T>& state, const BnConfig& cfg, BnCache<T>* cache,
                     bool update_running) {
  if (!(cfg.eps > 0.0)) throw SpecError("batch norm eps must be positive");
  const Shape5& s = x.shape();
  const std::size_t C = s.c;
  if (gamma.size() != C || beta.size() != C) {
    throw ShapeError("batch norm scale/shift length does not match " + std::to_string(C) +
                     " channels");
  }
  if (state.running_mean.size() != C || state.running_var.size() != C) {
    throw ShapeError("batch norm running statistics do not match channel count");
  }
  const std::size_t plane = s.t * s.h * s.w;
  const std::size_t count = s.n * plane;

  std::vector<T> mean(C), inv_std(C);
  if (mode == BnMode::kTrain) {
#pragma omp parallel for schedule(static)
    for (std::size_t c = 0; c < C; ++c) {
      double sum = 0.0;
      for (std::size_t n = 0; n < s.n; ++n) {
        const T* p = x.data() + (n * C + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) sum += p[i];
      }
      const double mu = sum / static_cast<double>(count);
      double sq = 0.0;
      for (std::size_t n = 0; n < s.n; ++n) {
        const T* p = x.data() + (n * C + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const double d = p[i] - mu;
          sq += d * d;
        }
      }
      const double var = sq / static_cast<double>(count);
      mean[c] = static_cast<T>(mu);
      inv_std[c] = static_cast<T>(1.0 / std::sqrt(var + cfg.eps));
      if (update_running) {
        const double unbiased = count > 1 ? var * count / (count - 1.0) : var;
        state.running_mean[c] =
            static_cast<T>(cfg.momentum * state.running_mean[c] + (1.0 - cfg.momentum) * mu);
        state.running_var[c] = static_cast<T>(cfg.momentum * state.running_var[c] +
                                              (1.0 - cfg.momentum) * unbiased);
      }
    }
  } else {
    for (std::size_t c = 0; c < C; ++c) {
      mean[c] = state.running_mean[c];
      inv_std[c] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(state.running_var[c]) +
                                                  cfg.eps));
    }
  }

  Tensor<T> y(s);
  Tensor<T> xhat;
  if (cache) xhat = Tensor<T>(s);
#pragma omp parallel for schedule(static)
  for (std::size_t nc = 0; nc < s.n * C; ++nc) {
    const std::size_t c = nc % C;
    const T* p = x.data() + nc * plane;
    T* q = y.data() + nc * plane;
    const T m = mean[c], is = inv_std[c], g = gamma[c], b = beta[c];
    if (cache) {
      T* h = xhat.data() + nc * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        h[i] = (p[i] - m) * is;
        q[i] = g * h[i] + b;
      }
    } else {
      for (std::size_t i = 0; i < plane; ++i) q[i] = g * ((p[i] - m) * is) + b;
    }
  }
  if (cache) {
    cache->mode = mode;
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

template <typename T>
BnGrads<T> batch_norm_backward(const BnCache<T>& cache, std::span<const T> gamma,
                               const Tensor<T>& dy) {
  const Shape5& s = cache.xhat.shape();
  require_same_shape(s, dy.shape(), "batch_norm_backward");
  const std::size_t C = s.c;
  const std::size_t plane = s.t * s.h * s.w;
  const double count = static_cast<double>(s.n * plane);
  BnGrads<T> g{Tensor<T>(s), std::vector<T>(C), std::vector<T>(C)};
#pragma omp parallel for schedule(static)
  for (std::size_t c = 0; c < C; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::size_t n = 0; n < s.n; ++n) {
      const T* d = dy.data() + (n * C + c) * plane;
      const T* h = cache.xhat.data() + (n * C + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        sum_dy += d[i];
        sum_dy_xhat += static_cast<double>(d[i]) * h[i];
      }
    }
    g.dgamma[c] = static_cast<T>(sum_dy_xhat);
    g.dbeta[c] = static_cast<T>(sum_dy);
    const T scale = gamma[c] * cache.inv_std[c];
    if (cache.mode == BnMode::kTrain) {
      const T mean_dy = static_cast<T>(sum_dy / count);
      const T mean_dy_xhat = static_cast<T>(sum_dy_xhat / count);
      for (std::size_t n = 0; n < s.n; ++n) {
        const T* d = dy.data() + (n * C + c) * plane;
        const T* h = cache.xhat.data() + (n * C + c) * plane;
        T* o = g.dx.data() + (n * C + c) * plane;
        for (std::size_t i = 0; i < plane; ++i)
          o[i] = scale * (d[i] - mean_dy - h[i] * mean_dy_xhat);
      }
    } else {
      for (std::size_t n = 0; n < s.n; ++n) {
        const T* d = dy.data() + (n * C + c) * plane;
        T* o = g.dx.data() + (n * C + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) o[i] = scale * d[i];
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Pooling

Shape5 max_pool_output_shape(const Shape5& in, const PoolSpec& p) {
  if (p.window < 1 || p.stride < 1 || p.pad < 0 || p.pad >= p.window) {
    throw SpecError("invalid pooling window/stride/pad");
  }
  const long h = static_cast<long>(in.h) + 2L * p.pad - p.window;
  const long w = static_cast<long>(in.w) + 2L * p.pad - p.window;
  if (h < 0 || w < 0) {
    throw ShapeError("pooling window " + std::to_string(p.window) + " larger than input " +
                     in.str());
  }
  return Shape5(static_cast<std::int64_t>(in.n), static_cast<std::int64_t>(in.c),
                static_cast<std::int64_t>(in.t), h / p.stride + 1, w / p.stride + 1);
}

template <typename T>
MaxPoolResult<T> max_pool_spatial(const Tensor<T>& x, const PoolSpec& p) {
  const Shape5& in = x.shape();
  const Shape5 out = max_pool_output_shape(in, p);
  MaxPoolResult<T> r{Tensor<T>(out), std::vector<std::uint32_t>(out.count())};
  const std::size_t frames = in.n * in.c * in.t;
  const long H = static_cast<long>(in.h), W = static_cast<long>(in.w);
#pragma omp parallel for schedule(static)
  for (std::size_t f = 0; f < frames; ++f) {
    const std::size_t in_base = f * in.h * in.w;
    const std::size_t out_base = f * out.h * out.w;
    for (std::size_t oh = 0; oh < out.h; ++oh)
      for (std::size_t ow = 0; ow < out.w; ++ow) {
        T best = -std::numeric_limits<T>::infinity();
        std::size_t arg = in_base;
        bool found = false;
        for (int dh = 0; dh < p.window; ++dh) {
          const long ih = static_cast<long>(oh) * p.stride - p.pad + dh;
          if (ih < 0 || ih >= H) continue;
          for (int dw = 0; dw < p.window; ++dw) {
            const long iw = static_cast<long>(ow) * p.stride - p.pad + dw;
            if (iw < 0 || iw >= W) continue;
            const std::size_t idx = in_base + static_cast<std::size_t>(ih * W + iw);
            if (!found || x[idx] > best) {
              best = x[idx];
              arg = idx;
              found = true;
            }
          }
        }
        r.y[out_base + oh * out.w + ow] = best;
        r.argmax[out_base + oh * out.w + ow] = static_cast<std::uint32_t>(arg);
      }
  }
  return r;
}

template <typename T>
Tensor<T> max_pool_spatial_backward(const Shape5& input_shape,
                                    std::span<const std::uint32_t> argmax, const Tensor<T>& dy) {
  if (argmax.size() != dy.size()) throw ShapeError("max_pool_spatial_backward: argmax size");
  Tensor<T> dx(input_shape);
  for (std::size_t i = 0; i < dy.size(); ++i) dx[argmax[i]] += dy[i];
  return dx;
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  const Shape5& s = x.shape();
  const std::size_t plane = s.t * s.h * s.w;
  Tensor<T> y(Shape5(static_cast<std::int64_t>(s.n), static_cast<std::int64_t>(s.c), 1, 1, 1));
  for (std::size_t nc = 0; nc < s.n * s.c; ++nc) {
    const T* p = x.data() + nc * plane;
    double sum = 0.0;
    for (std::size_t i = 0; i < plane; ++i) sum += p[i];
    y[nc] = static_cast<T>(sum / static_cast<double>(plane));
  }
  return y;
}

template <typename T>
Tensor<T> global_avg_pool_backward(const Shape5& s, const Tensor<T>& dy) {
  if (dy.size() != s.n * s.c) throw ShapeError("global_avg_pool_backward: upstream shape");
  const std::size_t plane = s.t * s.h * s.w;
  Tensor<T> dx(s);
  const T inv = static_cast<T>(1.0 / static_cast<double>(plane));
  for (std::size_t nc = 0; nc < s.n * s.c; ++nc) {
    T* p = dx.data() + nc * plane;
    std::fill(p, p + plane, dy[nc] * inv);
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Classifier head

template <typename T>
Tensor<T> fully_connected(const Tensor<T>& x, const Tensor<T>& weight, std::span<const T> bias) {
  const std::size_t N = x.shape().n;
  const std::size_t F = x.size() / N;
  const std::size_t K = weight.shape().c;
  if (weight.shape().n != F || weight.size() != F * K || bias.size() != K) {
    throw ShapeError("fully_connected: input has " + std::to_string(F) +
                     " features, weight is " + weight.shape().str());
  }
  Tensor<T> y(Shape5(static_cast<std::int64_t>(N), static_cast<std::int64_t>(K), 1, 1, 1));
  for (std::size_t n = 0; n < N; ++n) {
    const T* xn = x.data() + n * F;
    T* yn = y.data() + n * K;
    for (std::size_t k = 0; k < K; ++k) yn[k] = bias[k];
    for (std::size_t f = 0; f < F; ++f) {
      const T a = xn[f];
      const T* wf = weight.data() + f * K;
      for (std::size_t k = 0; k < K; ++k) yn[k] += a * wf[k];
    }
  }
  return y;
}

template <typename T>
FcGrads<T> fully_connected_backward(const Tensor<T>& x, const Tensor<T>& weight,
                                    const Tensor<T>& dy) {
  const std::size_t N = x.shape().n;
  const std::size_t F = x.size() / N;
  const std::size_t K = weight.shape().c;
  if (dy.size() != N * K) throw ShapeError("fully_connected_backward: upstream shape");
  FcGrads<T> g{Tensor<T>(x.shape()), Tensor<T>(weight.shape()), std::vector<T>(K)};
  for (std::size_t n = 0; n < N; ++n) {
    const T* xn = x.data() + n * F;
    const T* dn = dy.data() + n * K;
    T* dxn = g.dx.data() + n * F;
    for (std::size_t k = 0; k < K; ++k) g.dbias[k] += dn[k];
    for (std::size_t f = 0; f < F; ++f) {
      const T* wf = weight.data() + f * K;
      T* gwf = g.dweight.data() + f * K;
      T acc = 0;
      for (std::size_t k = 0; k < K; ++k) {
        acc += wf[k] * dn[k];
        gwf[k] += xn[f] * dn[k];
      }
      dxn[f] = acc;
    }
  }
  return g;
}

template <typename T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels) {
  const std::size_t N = logits.shape().n;
  const std::size_t K = logits.size() / N;
  if (labels.size() != N) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                     " labels for batch of " + std::to_string(N));
  }
  LossResult<T> r{0.0, Tensor<T>(logits.shape()), std::vector<int>(N)};
  for (std::size_t n = 0; n < N; ++n) {
    const int label = labels[n];
    if (label < 0 || static_cast<std::size_t>(label) >= K) {
      throw DataError("label " + std::to_string(label) + " outside [0, " + std::to_string(K) +
                      ")");
    }
    const T* z = logits.data() + n * K;
    std::size_t best = 0;
    double zmax = z[0];
    for (std::size_t k = 1; k < K; ++k)
      if (z[k] > zmax) {
        zmax = z[k];
        best = k;
      }
    r.predictions[n] = static_cast<int>(best);
    double sum = 0.0;
    for (std::size_t k = 0; k < K; ++k) sum += std::exp(static_cast<double>(z[k]) - zmax);
    const double log_sum = zmax + std::log(sum);
    r.loss += log_sum - static_cast<double>(z[label]);
    T* g = r.dlogits.data() + n * K;
    for (std::size_t k = 0; k < K; ++k) {
      const double p = std::exp(static_cast<double>(z[k]) - log_sum);
      g[k] = static_cast<T>((p - (static_cast<std::size_t>(label) == k ? 1.0 : 0.0)) /
                            static_cast<double>(N));
    }
  }
  r.loss /= static_cast<double>(N);
  return r;
}

template <typename T>
DropoutResult<T> dropout(const Tensor<T>& x, double rate, std::uint64_t seed) {
  if (rate < 0.0 || rate >= 1.0) throw SpecError("dropout rate must lie in [0, 1)");
  DropoutResult<T> r{x, Tensor<T>(x.shape(), T(1))};
  if (rate == 0.0) return r;
  Rng rng(seed);
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T m = rng.next_unit() < rate ? T(0) : keep_scale;
    r.mask[i] = m;
    r.y[i] = x[i] * m;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Layers

const char* role_name(ParamRole role) {
  switch (role) {
    case ParamRole::kConvWeight: return "conv";
    case ParamRole::kBnScale: return "bn_scale";
    case ParamRole::kBnShift: return "bn_shift";
    case ParamRole::kBnRunningMean: return "bn_mean";
    case ParamRole::kBnRunningVar: return "bn_var";
    case ParamRole::kFcWeight: return "fc_weight";
    case ParamRole::kFcBias: return "fc_bias";
  }
  return "?";
}

bool is_trainable(ParamRole role) {
  return role != ParamRole::kBnRunningMean && role != ParamRole::kBnRunningVar;
}

template <typename T>
ConvLayer<T>::ConvLayer(std::string name, const KernelSpec& spec)
    : name_(std::move(name)), spec_(spec) {
  spec_.validate();
  weight_ = Tensor<T>(spec_.weight_shape());
  grad_ = Tensor<T>(spec_.weight_shape());
}

template <typename T>
Tensor<T> ConvLayer<T>::forward(const Tensor<T>& x, bool keep_cache) {
  if (keep_cache) input_ = x;
  const bool plain_t = spec_.stride_t == 1 && spec_.pad_t == 0;
  const bool plain_s = spec_.stride_s == 1 && spec_.pad_s == 0;
  if (spec_.d == 1 && spec_.k == 1 && spec_.pad_t == 0 && spec_.pad_s == 0)
    return conv_pointwise(x, weight_, spec_);
  if (spec_.d == 1 && plain_t) return conv_spatial(x, weight_, spec_);
  if (spec_.k == 1 && plain_s) return conv_temporal(x, weight_, spec_);
  // Strided temporal filters of B blocks, and anything else, take the general path.
  return conv3d(x, weight_, spec_);
}

template <typename T>
Tensor<T> ConvLayer<T>::backward(const Tensor<T>& dy) {
  if (input_.empty()) throw Error(name_ + ": backward without cached forward");
  ConvGrads<T> g = conv3d_backward(input_, weight_, spec_, dy);
  add_inplace(grad_, g.dw);
  return std::move(g.dx);
}

template <typename T>
void ConvLayer<T>::collect(std::vector<ParamView<T>>& out) {
  const auto d = spec_.weight_shape().dims();
  out.push_back({name_ + ".weight", ParamRole::kConvWeight, {d.begin(), d.end()},
                 weight_.values(), grad_.values()});
}

template <typename T>
void ConvLayer<T>::zero_grad() {
  grad_.fill(T(0));
}

template <typename T>
BatchNormLayer<T>::BatchNormLayer(std::string name, std::size_t channels, const BnConfig& cfg)
    : name_(std::move(name)),
      cfg_(cfg),
      gamma_(channels, T(1)),
      beta_(channels, T(0)),
      dgamma_(channels, T(0)),
      dbeta_(channels, T(0)),
      state_(BnState<T>::unit(channels)) {}

template <typename T>
Tensor<T> BatchNormLayer<T>::forward(const Tensor<T>& x, bool keep_cache) {
  const BnMode m = mode();
  return batch_norm<T>(x, gamma_, beta_, m, state_, cfg_, keep_cache ? &cache_ : nullptr,
                       m == BnMode::kTrain);
}

template <typename T>
Tensor<T> BatchNormLayer<T>::backward(const Tensor<T>& dy) {
  if (cache_.xhat.empty()) throw Error(name_ + ": backward without cached forward");
  BnGrads<T> g = batch_norm_backward<T>(cache_, gamma_, dy);
  if (!frozen_) {
    for (std::size_t c = 0; c < gamma_.size(); ++c) {
      dgamma_[c] += g.dgamma[c];
      dbeta_[c] += g.dbeta[c];
    }
  }
  return std::move(g.dx);
}

template <typename T>
void BatchNormLayer<T>::collect(std::vector<ParamView<T>>& out) {
  const std::vector<std::size_t> d{gamma_.size()};
  out.push_back({name_ + ".gamma", ParamRole::kBnScale, d, gamma_, dgamma_});
  out.push_back({name_ + ".beta", ParamRole::kBnShift, d, beta_, dbeta_});
  out.push_back({name_ + ".running_mean", ParamRole::kBnRunningMean, d, state_.running_mean, {}});
  out.push_back({name_ + ".running_var", ParamRole::kBnRunningVar, d, state_.running_var, {}});
}

template <typename T>
void BatchNormLayer<T>::zero_grad() {
  std::fill(dgamma_.begin(), dgamma_.end(), T(0));
  std::fill(dbeta_.begin(), dbeta_.end(), T(0));
}

template <typename T>
LinearLayer<T>::LinearLayer(std::string name, std::size_t in_features, std::size_t classes)
    : name_(std::move(name)),
      weight_(Shape5(static_cast<std::int64_t>(in_features), static_cast<std::int64_t>(classes),
                     1, 1, 1)),
      dweight_(weight_.shape()),
      bias_(classes, T(0)),
      dbias_(classes, T(0)) {}

template <typename T>
Tensor<T> LinearLayer<T>::forward(const Tensor<T>& x, bool keep_cache) {
  if (keep_cache) input_ = x;
  return fully_connected<T>(x, weight_, bias_);
}

template <typename T>
Tensor<T> LinearLayer<T>::backward(const Tensor<T>& dy) {
  if (input_.empty()) throw Error(name_ + ": backward without cached forward");
  FcGrads<T> g = fully_connected_backward<T>(input_, weight_, dy);
  add_inplace(dweight_, g.dweight);
  for (std::size_t k = 0; k < bias_.size(); ++k) dbias_[k] += g.dbias[k];
  return std::move(g.dx);
}

template <typename T>
void LinearLayer<T>::collect(std::vector<ParamView<T>>& out) {
  out.push_back({name_ + ".weight", ParamRole::kFcWeight, {in_features(), classes()},
                 weight_.values(), dweight_.values()});
  out.push_back({name_ + ".bias", ParamRole::kFcBias, {classes()}, bias_, dbias_});
}

template <typename T>
void LinearLayer<T>::zero_grad() {
  dweight_.fill(T(0));
  std::fill(dbias_.begin(), dbias_.end(), T(0));
}

#define P3D_INSTANTIATE_LAYERS(T)                                                          \
  template Tensor<T> batch_norm(const Tensor<T>&, std::span<const T>, std::span<const T>,  \
                                BnMode, BnState<T>&, const BnConfig&, BnCache<T>*, bool);  \
  template BnGrads<T> batch_norm_backward(const BnCache<T>&, std::span<const T>,           \
                                          const Tensor<T>&);                               \
  template MaxPoolResult<T> max_pool_spatial(const Tensor<T>&, const PoolSpec&);           \
  template Tensor<T> max_pool_spatial_backward(const Shape5&, std::span<const std::uint32_t>, \
                                               const Tensor<T>&);                          \
  template Tensor<T> global_avg_pool(const Tensor<T>&);                                    \
  template Tensor<T> global_avg_pool_backward(const Shape5&, const Tensor<T>&);            \
  template Tensor<T> fully_connected(const Tensor<T>&, const Tensor<T>&, std::span<const T>); \
  template FcGrads<T> fully_connected_backward(const Tensor<T>&, const Tensor<T>&,         \
                                               const Tensor<T>&);                          \
  template LossResult<T> softmax_cross_entropy(const Tensor<T>&, std::span<const int>);    \
  template DropoutResult<T> dropout(const Tensor<T>&, double, std::uint64_t);              \
  template class ConvLayer<T>;                                                             \
  template class BatchNormLayer<T>;                                                        \
  template class LinearLayer<T>;

P3D_INSTANTIATE_LAYERS(float)
P3D_INSTANTIATE_LAYERS(double)

}  // namespace p3d
