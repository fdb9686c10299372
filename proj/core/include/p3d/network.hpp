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

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "p3d/block.hpp"
#include "p3d/layers.hpp"

namespace p3d {

enum class BlockPolicy { kBasic2D, kAllA, kAllB, kAllC, kMixed };

const char* policy_name(BlockPolicy policy);            ///< "2d", "a", "b", "c", "mixed"
BlockPolicy parse_policy(const std::string& name);       ///< throws SpecError

struct ClipGeometry {
  int frames = 16;
  int height = 160;
  int width = 160;
};

/// Whole-network description. Widths default to the standard ResNet
/// bottleneck widths; the reduced() preset shrinks them for CPU training.
struct ArchSpec {
  int depth = 50;                      ///< 50 -> (3,4,6,3), 152 -> (3,8,36,3)
  BlockPolicy policy = BlockPolicy::kMixed;
  int num_classes = 487;
  ClipGeometry input{};
  double dropout_rate = 0.0;
  int in_channels = 3;
  int stem_channels = 64;
  std::array<int, 4> mid_channels{64, 128, 256, 512};
  BnConfig bn{};

  static ArchSpec standard(int depth, BlockPolicy policy, int num_classes);
  /// Stem 8 and mids (8, 16, 32, 64) at 16x32x32 input.
  static ArchSpec reduced(int depth, BlockPolicy policy, int num_classes);

  std::array<int, 4> stage_blocks() const;
  int total_blocks() const;
  /// Kind of flattened block i; mixed cycles A, B, C.
  BlockKind kind_at(int block_index) const;
  int feature_dim() const { return 4 * mid_channels[3]; }

  /// Throws SpecError for unsupported depths or non-positive widths.
  void validate() const;
};

/// Receives (layer name, seconds) after each top-level layer when timing.
using LayerTimer = std::function<void(const std::string&, double)>;

/// stem (1x7x7/2 conv, BN, ReLU, 3x3/2 max pool) -> 4 residual stages ->
/// global average pool (pool5) -> dropout -> fully connected.
template <typename T>
class Network {
 public:
  Network() = default;
  explicit Network(const ArchSpec& spec);

  void init(const InitRule& rule);

  /// Logits (N, classes, 1, 1, 1). `training` caches activations for
  /// backward() and enables dropout; BN mode is set separately.
  Tensor<T> forward(const Tensor<T>& x, bool training, const LayerTimer* timer = nullptr);
  Tensor<T> backward(const Tensor<T>& dlogits);

  /// Pool5 activations (N, 4 * mid[3], 1, 1, 1), no caching, no dropout.
  Tensor<T> pool5(const Tensor<T>& x);

  void set_bn_mode(BnMode mode);
  /// Freeze every BN layer except the stem's (fine-tuning option).
  void freeze_bn_except_first(bool frozen);
  void zero_grad();

  std::vector<ParamView<T>> params();
  const ArchSpec& spec() const { return spec_; }
  std::vector<Block<T>>& blocks() { return blocks_; }
  const std::vector<Block<T>>& blocks() const { return blocks_; }
  ConvLayer<T>& stem_conv() { return stem_conv_; }
  BatchNormLayer<T>& stem_bn() { return stem_bn_; }
  LinearLayer<T>& classifier() { return fc_; }

  void set_dropout_seed(std::uint64_t seed) { dropout_seed_ = seed; }
  /// Throws SpecError outside [0, 1).
  void set_dropout_rate(double rate);

  /// Output extents after each top-level layer for an N = 1 input.
  std::vector<std::pair<std::string, Shape5>> trace_shapes(const ClipGeometry& g) const;

 private:
  Tensor<T> trunk(const Tensor<T>& x, bool training, const LayerTimer* timer);

  ArchSpec spec_;
  ConvLayer<T> stem_conv_;
  BatchNormLayer<T> stem_bn_;
  PoolSpec stem_pool_{3, 2, 1};
  std::vector<Block<T>> blocks_;
  LinearLayer<T> fc_;

  Shape5 stem_out_shape_{};
  std::vector<std::uint32_t> pool_argmax_;
  Tensor<T> stem_act_;
  Shape5 trunk_shape_{};
  Tensor<T> dropout_mask_;
  std::uint64_t dropout_seed_ = 0;
  std::uint64_t dropout_calls_ = 0;
};

template <typename T>
Network<T> build_network(const ArchSpec& spec, const InitRule& init);

// ---------------------------------------------------------------------------
// Parameter accounting

struct ParamRow {
  std::string layer;
  std::size_t weights = 0;  ///< kernel entries (plus bias for the classifier)
  std::size_t bn = 0;       ///< BN scale + shift of the BN following this layer
};

struct ParamTable {
  std::vector<ParamRow> rows;
  std::size_t weights = 0;
  std::size_t bn = 0;
  std::size_t running_stats = 0;  ///< BN running mean + variance
  std::size_t total() const { return weights + bn; }
};

template <typename T>
ParamTable count_parameters(Network<T>& net);

/// 4 bytes per parameter: weights, classifier, BN scale/shift; running
/// statistics only when `include_running_stats` is set.
template <typename T>
std::size_t model_size_bytes(Network<T>& net, bool include_running_stats = false);

/// Sum of 3 * mid^2 over blocks carrying a temporal kernel.
std::size_t temporal_weight_count(const ArchSpec& spec);

/// Column-aligned layer table for the given input geometry, ending with a
/// totals row. Deterministic.
template <typename T>
std::string summarize(Network<T>& net, const ClipGeometry& geometry);

// ---------------------------------------------------------------------------
// 2D -> P3D weight inflation

enum class TemporalInit { kIdentity, kZeros, kRandom };
TemporalInit parse_temporal_init(const std::string& name);

struct Checkpoint;

/// Copies every non-temporal tensor from a 2D checkpoint (kernels may be
/// rank 4 (out, in, k, k) or rank 5 with d = 1), then initializes temporal
/// kernels. The classifier is kept as built when its class count differs.
/// Throws ShapeError naming the first mismatching or missing tensor.
template <typename T>
void inflate_from_2d(Network<T>& net, const Checkpoint& ckpt2d, TemporalInit temporal_init,
                     std::uint64_t seed = 0);

}  // namespace p3d
