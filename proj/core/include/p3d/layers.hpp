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

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "p3d/conv.hpp"
#include "p3d/tensor.hpp"

namespace p3d {

// ---------------------------------------------------------------------------
// Batch normalization over (N, T, H, W) per channel.

enum class BnMode { kTrain, kInference };

struct BnConfig {
  double eps = 1e-5;
  /// Fraction of the old running statistic kept on each update.
  double momentum = 0.9;
};

template <typename T>
struct BnState {
  std::vector<T> running_mean;
  std::vector<T> running_var;

  static BnState unit(std::size_t channels) {
    return {std::vector<T>(channels, T(0)), std::vector<T>(channels, T(1))};
  }
};

template <typename T>
struct BnCache {
  BnMode mode = BnMode::kTrain;
  Tensor<T> xhat;
  std::vector<T> inv_std;
};

template <typename T>
struct BnGrads {
  Tensor<T> dx;
  std::vector<T> dgamma;
  std::vector<T> dbeta;
};

/// Train mode normalizes by batch statistics (biased variance) and, when
/// `update_running` is set, folds them into `state` (unbiased variance).
/// Inference mode reads `state` only. Throws SpecError for eps <= 0.
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, std::span<const T> gamma, std::span<const T> beta,
                     BnMode mode, BnState<T>& state, const BnConfig& cfg,
                     BnCache<T>* cache = nullptr, bool update_running = true);

template <typename T>
BnGrads<T> batch_norm_backward(const BnCache<T>& cache, std::span<const T> gamma,
                               const Tensor<T>& dy);

// ---------------------------------------------------------------------------
// Pooling.

struct PoolSpec {
  int window = 2;
  int stride = 2;
  int pad = 0;
};

template <typename T>
struct MaxPoolResult {
  Tensor<T> y;
  std::vector<std::uint32_t> argmax;  ///< flat input index per output element
};

/// Spatial max pool applied per frame; padded taps never win.
template <typename T>
MaxPoolResult<T> max_pool_spatial(const Tensor<T>& x, const PoolSpec& spec);

Shape5 max_pool_output_shape(const Shape5& in, const PoolSpec& spec);

template <typename T>
Tensor<T> max_pool_spatial_backward(const Shape5& input_shape,
                                    std::span<const std::uint32_t> argmax, const Tensor<T>& dy);

/// Mean over (T, H, W) per channel; output shape (N, C, 1, 1, 1).
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x);

template <typename T>
Tensor<T> global_avg_pool_backward(const Shape5& input_shape, const Tensor<T>& dy);

// ---------------------------------------------------------------------------
// Classifier head.

/// x: (N, C, ...) flattened per sample to C features; weight: (C, classes)
/// stored as shape (C, classes, 1, 1, 1); bias: classes. Output (N, classes, 1, 1, 1).
template <typename T>
Tensor<T> fully_connected(const Tensor<T>& x, const Tensor<T>& weight, std::span<const T> bias);

template <typename T>
struct FcGrads {
  Tensor<T> dx;
  Tensor<T> dweight;
  std::vector<T> dbias;
};

template <typename T>
FcGrads<T> fully_connected_backward(const Tensor<T>& x, const Tensor<T>& weight,
                                    const Tensor<T>& dy);

template <typename T>
struct LossResult {
  double loss = 0.0;       ///< mean negative log-likelihood of the true class
  Tensor<T> dlogits;       ///< (softmax - onehot) / N
  std::vector<int> predictions;
};

/// Throws DataError for a label outside [0, classes).
template <typename T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels);

/// Inverted dropout: kept entries are scaled by 1 / (1 - rate).
template <typename T>
struct DropoutResult {
  Tensor<T> y;
  Tensor<T> mask;
};

template <typename T>
DropoutResult<T> dropout(const Tensor<T>& x, double rate, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Stateful layers used to compose blocks and networks. Each forward() caches
// what its backward() needs; backward() accumulates parameter gradients and
// returns the input gradient.

enum class ParamRole { kConvWeight, kBnScale, kBnShift, kBnRunningMean, kBnRunningVar,
                       kFcWeight, kFcBias };

const char* role_name(ParamRole role);

/// True for learnable tensors, false for BN running statistics.
bool is_trainable(ParamRole role);

template <typename T>
struct ParamView {
  std::string name;
  ParamRole role;
  std::vector<std::size_t> dims;
  std::span<T> value;
  std::span<T> grad;  ///< empty for running statistics
};

template <typename T>
class ConvLayer {
 public:
  ConvLayer() = default;
  ConvLayer(std::string name, const KernelSpec& spec);

  Tensor<T> forward(const Tensor<T>& x, bool keep_cache);
  Tensor<T> backward(const Tensor<T>& dy);

  void collect(std::vector<ParamView<T>>& out);
  void zero_grad();

  const std::string& name() const { return name_; }
  const KernelSpec& spec() const { return spec_; }
  Tensor<T>& weight() { return weight_; }
  const Tensor<T>& weight() const { return weight_; }
  const Tensor<T>& grad() const { return grad_; }

 private:
  std::string name_;
  KernelSpec spec_;
  Tensor<T> weight_;
  Tensor<T> grad_;
  Tensor<T> input_;
};

template <typename T>
class BatchNormLayer {
 public:
  BatchNormLayer() = default;
  BatchNormLayer(std::string name, std::size_t channels, const BnConfig& cfg = {});

  Tensor<T> forward(const Tensor<T>& x, bool keep_cache);
  Tensor<T> backward(const Tensor<T>& dy);

  void collect(std::vector<ParamView<T>>& out);
  void zero_grad();

  void set_mode(BnMode mode) { mode_ = mode; }
  BnMode mode() const { return frozen_ ? BnMode::kInference : mode_; }
  /// Frozen layers always run in inference mode and report no trainable grads.
  void set_frozen(bool frozen) { frozen_ = frozen; }
  bool frozen() const { return frozen_; }

  const std::string& name() const { return name_; }
  std::size_t channels() const { return gamma_.size(); }
  std::vector<T>& gamma() { return gamma_; }
  std::vector<T>& beta() { return beta_; }
  BnState<T>& state() { return state_; }
  const BnConfig& config() const { return cfg_; }

 private:
  std::string name_;
  BnConfig cfg_;
  BnMode mode_ = BnMode::kTrain;
  bool frozen_ = false;
  std::vector<T> gamma_, beta_, dgamma_, dbeta_;
  BnState<T> state_;
  BnCache<T> cache_;
};

template <typename T>
class LinearLayer {
 public:
  LinearLayer() = default;
  LinearLayer(std::string name, std::size_t in_features, std::size_t classes);

  Tensor<T> forward(const Tensor<T>& x, bool keep_cache);
  Tensor<T> backward(const Tensor<T>& dy);

  void collect(std::vector<ParamView<T>>& out);
  void zero_grad();

  std::size_t in_features() const { return weight_.shape().n; }
  std::size_t classes() const { return weight_.shape().c; }
  Tensor<T>& weight() { return weight_; }
  std::vector<T>& bias() { return bias_; }

 private:
  std::string name_;
  Tensor<T> weight_, dweight_;
  std::vector<T> bias_, dbias_;
  Tensor<T> input_;
};

}  // namespace p3d
