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
#include <optional>
#include <string>
#include <vector>

#include "p3d/layers.hpp"

namespace p3d {

/// Residual bottleneck variants. kBasic2D uses a 1x3x3 spatial core only;
/// the P3D kinds add a 3x1x1 temporal filter in cascade (A), in parallel (B)
/// or in cascade with a skip from the spatial output (C).
enum class BlockKind { kBasic2D, kA, kB, kC };

enum class Shortcut { kIdentity, kProjection };

const char* kind_name(BlockKind kind);  ///< "2D", "A", "B", "C"

struct BlockSpec {
  BlockKind kind = BlockKind::kA;
  int in_ch = 256;
  int mid_ch = 64;
  int out_ch = 256;
  int spatial_stride = 1;
  Shortcut shortcut = Shortcut::kIdentity;

  /// out_ch = 4 * mid_ch; projection iff in != out or stride != 1.
  static BlockSpec bottleneck(BlockKind kind, int in_ch, int mid_ch, int spatial_stride = 1);

  /// Throws SpecError when the invariants above do not hold.
  void validate() const;
};

struct BlockParamCount {
  std::size_t reduce = 0, spatial = 0, temporal = 0, restore = 0, projection = 0;
  std::size_t total() const { return reduce + spatial + temporal + restore + projection; }
};

/// Convolution weights only; BN parameters are excluded.
BlockParamCount block_param_count(const BlockSpec& spec);

/// Weight count of the same bottleneck with a full 3x3x3 middle convolution.
std::size_t full3d_bottleneck_param_count(const BlockSpec& spec);

struct InitRule {
  std::uint64_t seed = 0;
  /// Start each block's restore BN scale at zero.
  bool zero_final_bn_scale = false;
};

/// Deterministic per-tensor stream: depends on the seed and the tensor name only.
std::uint64_t param_seed(std::uint64_t seed, const std::string& name);

/// He-normal fill with variance 2 / fan_in, fan_in = in_ch * d * k * k.
template <typename T>
void he_normal_init(ConvLayer<T>& conv, std::uint64_t seed);

/// One bottleneck residual unit with BN after every convolution:
///   u = r(B(R x))
///   2D: m = r(B(S u))
///   A:  m = r(B(T r(B(S u))))
///   B:  m = r(B(S u)) + r(B(T u))
///   C:  v = r(B(S u)), m = v + r(B(T v))
///   y = r(shortcut(x) + B(W m))
/// The spatial stride is applied by S and by the projection shortcut. In B
/// blocks T reads the unstrided u, so it subsamples spatially with the same stride.
template <typename T>
class Block {
 public:
  Block() = default;
  Block(std::string prefix, const BlockSpec& spec, const BnConfig& bn = {});

  void init(const InitRule& rule);

  Tensor<T> forward(const Tensor<T>& x, bool keep_cache);
  Tensor<T> backward(const Tensor<T>& dy);

  Shape5 output_shape(const Shape5& in) const;

  void collect(std::vector<ParamView<T>>& out);
  void zero_grad();
  void set_bn_mode(BnMode mode);
  std::vector<BatchNormLayer<T>*> batch_norms();

  /// Temporal kernel := per-channel taps [0, 1, 0]. For A blocks the temporal
  /// BN is set to an exact identity so T becomes the identity operator; for
  /// B and C blocks its scale is zeroed so the temporal branch adds nothing.
  /// Either way the block then computes its 2D counterpart frame by frame.
  void set_temporal_identity();
  void set_temporal_zero();

  const BlockSpec& spec() const { return spec_; }
  const std::string& prefix() const { return prefix_; }
  bool has_temporal() const { return temporal_.has_value(); }

  ConvLayer<T>& reduce() { return reduce_; }
  ConvLayer<T>& spatial() { return spatial_; }
  ConvLayer<T>& temporal() { return *temporal_; }
  ConvLayer<T>& restore() { return restore_; }
  BatchNormLayer<T>& reduce_bn() { return reduce_bn_; }
  BatchNormLayer<T>& spatial_bn() { return spatial_bn_; }
  BatchNormLayer<T>& temporal_bn() { return *temporal_bn_; }
  BatchNormLayer<T>& restore_bn() { return restore_bn_; }
  bool has_projection() const { return projection_.has_value(); }
  ConvLayer<T>& projection() { return *projection_; }
  BatchNormLayer<T>& projection_bn() { return *projection_bn_; }

 private:
  std::string prefix_;
  BlockSpec spec_;
  ConvLayer<T> reduce_, spatial_, restore_;
  BatchNormLayer<T> reduce_bn_, spatial_bn_, restore_bn_;
  std::optional<ConvLayer<T>> temporal_, projection_;
  std::optional<BatchNormLayer<T>> temporal_bn_, projection_bn_;

  // Post-ReLU activations kept for backward.
  Tensor<T> u_, a2_, a3_, y_;
};

}  // namespace p3d
