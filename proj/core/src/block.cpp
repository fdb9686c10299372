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
#include "p3d/block.hpp"

#include <cmath>

#include "p3d/rng.hpp"

namespace p3d {

const char* kind_name(BlockKind kind) {
  switch (kind) {
    case BlockKind::kBasic2D: return "2D";
    case BlockKind::kA: return "A";
    case BlockKind::kB: return "B";
    case BlockKind::kC: return "C";
  }
  return "?";
}

BlockSpec BlockSpec::bottleneck(BlockKind kind, int in_ch, int mid_ch, int spatial_stride) {
  BlockSpec s;
  s.kind = kind;
  s.in_ch = in_ch;
  s.mid_ch = mid_ch;
  s.out_ch = 4 * mid_ch;
  s.spatial_stride = spatial_stride;
  s.shortcut = (in_ch != s.out_ch || spatial_stride != 1) ? Shortcut::kProjection
                                                          : Shortcut::kIdentity;
  s.validate();
  return s;
}

void BlockSpec::validate() const {
  if (in_ch < 1 || mid_ch < 1 || out_ch < 1) throw SpecError("block channels must be positive");
  if (out_ch != 4 * mid_ch) {
    throw SpecError("bottleneck expects out_ch = 4 * mid_ch, got mid " + std::to_string(mid_ch) +
                    " out " + std::to_string(out_ch));
  }
  if (spatial_stride != 1 && spatial_stride != 2) throw SpecError("block stride must be 1 or 2");
  const bool needs_projection = in_ch != out_ch || spatial_stride != 1;
  if (needs_projection != (shortcut == Shortcut::kProjection)) {
    throw SpecError(needs_projection ? "block changes shape but has an identity shortcut"
                                     : "projection shortcut on a shape-preserving block");
  }
}

BlockParamCount block_param_count(const BlockSpec& s) {
  s.validate();
  const std::size_t in = static_cast<std::size_t>(s.in_ch);
  const std::size_t mid = static_cast<std::size_t>(s.mid_ch);
  const std::size_t out = static_cast<std::size_t>(s.out_ch);
  BlockParamCount c;
  c.reduce = in * mid;
  c.spatial = mid * mid * 9;
  c.temporal = s.kind == BlockKind::kBasic2D ? 0 : mid * mid * 3;
  c.restore = mid * out;
  c.projection = s.shortcut == Shortcut::kProjection ? in * out : 0;
  return c;
}

std::size_t full3d_bottleneck_param_count(const BlockSpec& s) {
  BlockParamCount c = block_param_count(s);
  const std::size_t mid = static_cast<std::size_t>(s.mid_ch);
  return c.reduce + mid * mid * 27 + c.restore + c.projection;
}

std::uint64_t param_seed(std::uint64_t seed, const std::string& name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char ch : name) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(seed ^ h);
}

template <typename T>
void he_normal_init(ConvLayer<T>& conv, std::uint64_t seed) {
  const KernelSpec& s = conv.spec();
  const double fan_in = static_cast<double>(s.in_ch) * s.d * s.k * s.k;
  const double stddev = std::sqrt(2.0 / fan_in);
  Rng rng(param_seed(seed, conv.name()));
  for (auto& v : conv.weight().storage()) v = static_cast<T>(stddev * rng.normal());
}

template <typename T>
Block<T>::Block(std::string prefix, const BlockSpec& spec, const BnConfig& bn)
    : prefix_(std::move(prefix)), spec_(spec) {
  spec_.validate();
  const int mid = spec_.mid_ch;
  const int stride = spec_.spatial_stride;
  reduce_ = ConvLayer<T>(prefix_ + ".reduce", KernelSpec{1, 1, spec_.in_ch, mid, 1, 1, 0, 0});
  reduce_bn_ = BatchNormLayer<T>(prefix_ + ".reduce_bn", mid, bn);
  spatial_ = ConvLayer<T>(prefix_ + ".spatial", KernelSpec{1, 3, mid, mid, 1, stride, 0, 1});
  spatial_bn_ = BatchNormLayer<T>(prefix_ + ".spatial_bn", mid, bn);
  if (spec_.kind != BlockKind::kBasic2D) {
    const int t_stride = spec_.kind == BlockKind::kB ? stride : 1;
    temporal_.emplace(prefix_ + ".temporal", KernelSpec{3, 1, mid, mid, 1, t_stride, 1, 0});
    temporal_bn_.emplace(prefix_ + ".temporal_bn", mid, bn);
  }
  restore_ = ConvLayer<T>(prefix_ + ".restore", KernelSpec{1, 1, mid, spec_.out_ch, 1, 1, 0, 0});
  restore_bn_ = BatchNormLayer<T>(prefix_ + ".restore_bn", spec_.out_ch, bn);
  if (spec_.shortcut == Shortcut::kProjection) {
    projection_.emplace(prefix_ + ".shortcut",
                        KernelSpec{1, 1, spec_.in_ch, spec_.out_ch, 1, stride, 0, 0});
    projection_bn_.emplace(prefix_ + ".shortcut_bn", spec_.out_ch, bn);
  }
}

template <typename T>
void Block<T>::init(const InitRule& rule) {
  he_normal_init(reduce_, rule.seed);
  he_normal_init(spatial_, rule.seed);
  if (temporal_) he_normal_init(*temporal_, rule.seed);
  he_normal_init(restore_, rule.seed);
  if (projection_) he_normal_init(*projection_, rule.seed);
  for (BatchNormLayer<T>* bn : batch_norms()) {
    std::fill(bn->gamma().begin(), bn->gamma().end(), T(1));
    std::fill(bn->beta().begin(), bn->beta().end(), T(0));
    bn->state() = BnState<T>::unit(bn->channels());
  }
  if (rule.zero_final_bn_scale) std::fill(restore_bn_.gamma().begin(), restore_bn_.gamma().end(), T(0));
}

template <typename T>
Shape5 Block<T>::output_shape(const Shape5& in) const {
  Shape5 s = reduce_.spec().output_shape(in);
  s = spatial_.spec().output_shape(s);
  return restore_.spec().output_shape(s);
}

template <typename T>
Tensor<T> Block<T>::forward(const Tensor<T>& x, bool keep_cache) {
  Tensor<T> u = relu(reduce_bn_.forward(reduce_.forward(x, keep_cache), keep_cache));
  Tensor<T> a2 = relu(spatial_bn_.forward(spatial_.forward(u, keep_cache), keep_cache));
  Tensor<T> a3;
  Tensor<T> m;
  switch (spec_.kind) {
    case BlockKind::kBasic2D:
      m = a2;
      break;
    case BlockKind::kA:
      a3 = relu(temporal_bn_->forward(temporal_->forward(a2, keep_cache), keep_cache));
      m = a3;
      break;
    case BlockKind::kB:
      a3 = relu(temporal_bn_->forward(temporal_->forward(u, keep_cache), keep_cache));
      m = add(a2, a3);
      break;
    case BlockKind::kC:
      a3 = relu(temporal_bn_->forward(temporal_->forward(a2, keep_cache), keep_cache));
      m = add(a2, a3);
      break;
  }
  Tensor<T> z = restore_bn_.forward(restore_.forward(m, keep_cache), keep_cache);
  if (projection_) {
    add_inplace(z, projection_bn_->forward(projection_->forward(x, keep_cache), keep_cache));
  } else {
    add_inplace(z, x);
  }
  Tensor<T> y = relu(z);
  if (keep_cache) {
    u_ = std::move(u);
    a2_ = std::move(a2);
    a3_ = std::move(a3);
    y_ = y;
  }
  return y;
}

template <typename T>
Tensor<T> Block<T>::backward(const Tensor<T>& dy) {
  if (y_.empty()) throw Error(prefix_ + ": backward without cached forward");
  const Tensor<T> dz = relu_backward(y_, dy);
  const Tensor<T> dm = restore_.backward(restore_bn_.backward(dz));

  Tensor<T> da2;
  Tensor<T> du;
  switch (spec_.kind) {
    case BlockKind::kBasic2D:
      da2 = dm;
      break;
    case BlockKind::kA:
      da2 = temporal_->backward(temporal_bn_->backward(relu_backward(a3_, dm)));
      break;
    case BlockKind::kB:
      da2 = dm;
      du = temporal_->backward(temporal_bn_->backward(relu_backward(a3_, dm)));
      break;
    case BlockKind::kC:
      da2 = add(dm, temporal_->backward(temporal_bn_->backward(relu_backward(a3_, dm))));
      break;
  }
  Tensor<T> du_s = spatial_.backward(spatial_bn_.backward(relu_backward(a2_, da2)));
  if (du.empty()) {
    du = std::move(du_s);
  } else {
    add_inplace(du, du_s);
  }
  Tensor<T> dx = reduce_.backward(reduce_bn_.backward(relu_backward(u_, du)));
  if (projection_) {
    add_inplace(dx, projection_->backward(projection_bn_->backward(dz)));
  } else {
    add_inplace(dx, dz);
  }
  return dx;
}

template <typename T>
void Block<T>::collect(std::vector<ParamView<T>>& out) {
  reduce_.collect(out);
  reduce_bn_.collect(out);
  spatial_.collect(out);
  spatial_bn_.collect(out);
  if (temporal_) {
    temporal_->collect(out);
    temporal_bn_->collect(out);
  }
  restore_.collect(out);
  restore_bn_.collect(out);
  if (projection_) {
    projection_->collect(out);
    projection_bn_->collect(out);
  }
}

template <typename T>
void Block<T>::zero_grad() {
  reduce_.zero_grad();
  spatial_.zero_grad();
  restore_.zero_grad();
  if (temporal_) temporal_->zero_grad();
  if (projection_) projection_->zero_grad();
  for (BatchNormLayer<T>* bn : batch_norms()) bn->zero_grad();
}

template <typename T>
std::vector<BatchNormLayer<T>*> Block<T>::batch_norms() {
  std::vector<BatchNormLayer<T>*> out{&reduce_bn_, &spatial_bn_};
  if (temporal_bn_) out.push_back(&*temporal_bn_);
  out.push_back(&restore_bn_);
  if (projection_bn_) out.push_back(&*projection_bn_);
  return out;
}

template <typename T>
void Block<T>::set_bn_mode(BnMode mode) {
  for (BatchNormLayer<T>* bn : batch_norms()) bn->set_mode(mode);
}

template <typename T>
void Block<T>::set_temporal_identity() {
  if (!temporal_) return;
  Tensor<T>& w = temporal_->weight();
  w.fill(T(0));
  for (int c = 0; c < spec_.mid_ch; ++c) {
    const auto ch = static_cast<std::size_t>(c);
    w(ch, ch, 1, 0, 0) = T(1);
  }
  BatchNormLayer<T>& bn = *temporal_bn_;
  bn.state() = BnState<T>::unit(bn.channels());
  std::fill(bn.beta().begin(), bn.beta().end(), T(0));
  if (spec_.kind != BlockKind::kA) {
    std::fill(bn.gamma().begin(), bn.gamma().end(), T(0));
    return;
  }
  // A running variance of 1 - eps makes the inference-mode 1 / sqrt(var + eps)
  // round to exactly one, so the layer passes values through unchanged.
  const double eps = bn.config().eps;
  const T var = static_cast<T>(1.0 - eps);
  const bool exact = static_cast<T>(1.0 / std::sqrt(static_cast<double>(var) + eps)) == T(1);
  std::fill(bn.state().running_var.begin(), bn.state().running_var.end(), exact ? var : T(1));
  const T g = exact ? T(1) : static_cast<T>(std::sqrt(1.0 + eps));
  std::fill(bn.gamma().begin(), bn.gamma().end(), g);
}

template <typename T>
void Block<T>::set_temporal_zero() {
  if (!temporal_) return;
  temporal_->weight().fill(T(0));
  BatchNormLayer<T>& bn = *temporal_bn_;
  bn.state() = BnState<T>::unit(bn.channels());
  std::fill(bn.gamma().begin(), bn.gamma().end(), T(1));
  std::fill(bn.beta().begin(), bn.beta().end(), T(0));
}

template void he_normal_init(ConvLayer<float>&, std::uint64_t);
template void he_normal_init(ConvLayer<double>&, std::uint64_t);
template class Block<float>;
template class Block<double>;

}  // namespace p3d
