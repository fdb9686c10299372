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
#include "p3d/network.hpp"

#include <algorithm>
#include <chrono>
#include <iomanip>
#include <map>
#include <sstream>

#include "p3d/checkpoint.hpp"
#include "p3d/rng.hpp"

namespace p3d {

const char* policy_name(BlockPolicy policy) {
  switch (policy) {
    case BlockPolicy::kBasic2D: return "2d";
    case BlockPolicy::kAllA: return "a";
    case BlockPolicy::kAllB: return "b";
    case BlockPolicy::kAllC: return "c";
    case BlockPolicy::kMixed: return "mixed";
  }
  return "?";
}

BlockPolicy parse_policy(const std::string& name) {
  if (name == "2d") return BlockPolicy::kBasic2D;
  if (name == "a") return BlockPolicy::kAllA;
  if (name == "b") return BlockPolicy::kAllB;
  if (name == "c") return BlockPolicy::kAllC;
  if (name == "mixed") return BlockPolicy::kMixed;
  throw SpecError("unknown block policy '" + name + "' (expected 2d, a, b, c or mixed)");
}

TemporalInit parse_temporal_init(const std::string& name) {
  if (name == "identity") return TemporalInit::kIdentity;
  if (name == "zeros") return TemporalInit::kZeros;
  if (name == "random") return TemporalInit::kRandom;
  throw SpecError("unknown temporal init '" + name + "' (expected identity, zeros or random)");
}

ArchSpec ArchSpec::standard(int depth, BlockPolicy policy, int num_classes) {
  ArchSpec s;
  s.depth = depth;
  s.policy = policy;
  s.num_classes = num_classes;
  s.validate();
  return s;
}

ArchSpec ArchSpec::reduced(int depth, BlockPolicy policy, int num_classes) {
  ArchSpec s = standard(depth, policy, num_classes);
  s.stem_channels = 8;
  s.mid_channels = {8, 16, 32, 64};
  s.input = {16, 32, 32};
  return s;
}

std::array<int, 4> ArchSpec::stage_blocks() const {
  switch (depth) {
    case 50: return {3, 4, 6, 3};
    case 152: return {3, 8, 36, 3};
    default: throw SpecError("unsupported depth " + std::to_string(depth) + " (expected 50 or 152)");
  }
}

int ArchSpec::total_blocks() const {
  const auto b = stage_blocks();
  return b[0] + b[1] + b[2] + b[3];
}

BlockKind ArchSpec::kind_at(int i) const {
  switch (policy) {
    case BlockPolicy::kBasic2D: return BlockKind::kBasic2D;
    case BlockPolicy::kAllA: return BlockKind::kA;
    case BlockPolicy::kAllB: return BlockKind::kB;
    case BlockPolicy::kAllC: return BlockKind::kC;
    case BlockPolicy::kMixed: {
      static constexpr BlockKind cycle[3] = {BlockKind::kA, BlockKind::kB, BlockKind::kC};
      return cycle[i % 3];
    }
  }
  return BlockKind::kA;
}

void ArchSpec::validate() const {
  stage_blocks();
  if (num_classes < 1) throw SpecError("num_classes must be positive");
  if (in_channels < 1 || stem_channels < 1) throw SpecError("channel counts must be positive");
  for (int m : mid_channels)
    if (m < 1) throw SpecError("mid channels must be positive");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw SpecError("dropout rate must lie in [0, 1)");
  if (input.frames < 1 || input.height < 1 || input.width < 1) {
    throw SpecError("input geometry must be positive");
  }
}

std::size_t temporal_weight_count(const ArchSpec& spec) {
  const auto counts = spec.stage_blocks();
  std::size_t total = 0;
  int idx = 0;
  for (int s = 0; s < 4; ++s) {
    const auto mid = static_cast<std::size_t>(spec.mid_channels[s]);
    for (int j = 0; j < counts[s]; ++j, ++idx)
      if (spec.kind_at(idx) != BlockKind::kBasic2D) total += 3 * mid * mid;
  }
  return total;
}

template <typename T>
Network<T>::Network(const ArchSpec& spec) : spec_(spec) {
  spec_.validate();
  stem_conv_ = ConvLayer<T>("stem.conv",
                            KernelSpec{1, 7, spec_.in_channels, spec_.stem_channels, 1, 2, 0, 3});
  stem_bn_ = BatchNormLayer<T>("stem.bn", static_cast<std::size_t>(spec_.stem_channels), spec_.bn);
  const auto counts = spec_.stage_blocks();
  int in_ch = spec_.stem_channels;
  int idx = 0;
  for (int s = 0; s < 4; ++s) {
    for (int j = 0; j < counts[s]; ++j, ++idx) {
      const int stride = (s > 0 && j == 0) ? 2 : 1;
      const BlockSpec bs =
          BlockSpec::bottleneck(spec_.kind_at(idx), in_ch, spec_.mid_channels[s], stride);
      blocks_.emplace_back("stage" + std::to_string(s + 1) + ".block" + std::to_string(j), bs,
                           spec_.bn);
      in_ch = bs.out_ch;
    }
  }
  fc_ = LinearLayer<T>("fc", static_cast<std::size_t>(in_ch),
                       static_cast<std::size_t>(spec_.num_classes));
}

template <typename T>
void Network<T>::init(const InitRule& rule) {
  he_normal_init(stem_conv_, rule.seed);
  std::fill(stem_bn_.gamma().begin(), stem_bn_.gamma().end(), T(1));
  std::fill(stem_bn_.beta().begin(), stem_bn_.beta().end(), T(0));
  stem_bn_.state() = BnState<T>::unit(stem_bn_.channels());
  for (auto& b : blocks_) b.init(rule);
  Rng rng(param_seed(rule.seed, "fc.weight"));
  for (auto& v : fc_.weight().storage()) v = static_cast<T>(0.01 * rng.normal());
  std::fill(fc_.bias().begin(), fc_.bias().end(), T(0));
  dropout_seed_ = param_seed(rule.seed, "dropout");
  dropout_calls_ = 0;
}

namespace {

class Stopwatch {
 public:
  explicit Stopwatch(const LayerTimer* timer) : timer_(timer) { reset(); }
  void reset() {
    if (timer_) start_ = std::chrono::steady_clock::now();
  }
  void lap(const std::string& name) {
    if (!timer_) return;
    const auto now = std::chrono::steady_clock::now();
    (*timer_)(name, std::chrono::duration<double>(now - start_).count());
    start_ = now;
  }

 private:
  const LayerTimer* timer_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace

template <typename T>
Tensor<T> Network<T>::trunk(const Tensor<T>& x, bool training, const LayerTimer* timer) {
  Stopwatch sw(timer);
  Tensor<T> a = relu(stem_bn_.forward(stem_conv_.forward(x, training), training));
  MaxPoolResult<T> pooled = max_pool_spatial(a, stem_pool_);
  if (training) {
    stem_out_shape_ = a.shape();
    pool_argmax_ = std::move(pooled.argmax);
    stem_act_ = std::move(a);
  }
  a = std::move(pooled.y);
  sw.lap("stem");
  for (auto& b : blocks_) {
    a = b.forward(a, training);
    sw.lap(b.prefix());
  }
  return a;
}

template <typename T>
Tensor<T> Network<T>::forward(const Tensor<T>& x, bool training, const LayerTimer* timer) {
  Tensor<T> a = trunk(x, training, timer);
  Stopwatch sw(timer);
  trunk_shape_ = a.shape();
  Tensor<T> f = global_avg_pool(a);
  sw.lap("pool5");
  dropout_mask_ = Tensor<T>();
  if (training && spec_.dropout_rate > 0.0) {
    DropoutResult<T> d = dropout(f, spec_.dropout_rate, splitmix64(dropout_seed_ + dropout_calls_++));
    f = std::move(d.y);
    dropout_mask_ = std::move(d.mask);
  }
  Tensor<T> logits = fc_.forward(f, training);
  sw.lap("fc");
  return logits;
}

template <typename T>
Tensor<T> Network<T>::backward(const Tensor<T>& dlogits) {
  if (stem_act_.empty()) throw Error("network backward without a training forward pass");
  Tensor<T> df = fc_.backward(dlogits);
  if (!dropout_mask_.empty()) {
    for (std::size_t i = 0; i < df.size(); ++i) df[i] *= dropout_mask_[i];
  }
  Tensor<T> da = global_avg_pool_backward(trunk_shape_, df);
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) da = it->backward(da);
  da = max_pool_spatial_backward<T>(stem_out_shape_, pool_argmax_, da);
  da = relu_backward(stem_act_, da);
  da = stem_bn_.backward(da);
  return stem_conv_.backward(da);
}

template <typename T>
Tensor<T> Network<T>::pool5(const Tensor<T>& x) {
  return global_avg_pool(trunk(x, false, nullptr));
}

template <typename T>
void Network<T>::set_bn_mode(BnMode mode) {
  stem_bn_.set_mode(mode);
  for (auto& b : blocks_) b.set_bn_mode(mode);
}

template <typename T>
void Network<T>::freeze_bn_except_first(bool frozen) {
  for (auto& b : blocks_)
    for (BatchNormLayer<T>* bn : b.batch_norms()) bn->set_frozen(frozen);
}

template <typename T>
void Network<T>::set_dropout_rate(double rate) {
  ArchSpec s = spec_;
  s.dropout_rate = rate;
  s.validate();
  spec_ = s;
}

template <typename T>
void Network<T>::zero_grad() {
  stem_conv_.zero_grad();
  stem_bn_.zero_grad();
  for (auto& b : blocks_) b.zero_grad();
  fc_.zero_grad();
}

template <typename T>
std::vector<ParamView<T>> Network<T>::params() {
  std::vector<ParamView<T>> out;
  stem_conv_.collect(out);
  stem_bn_.collect(out);
  for (auto& b : blocks_) b.collect(out);
  fc_.collect(out);
  return out;
}

template <typename T>
std::vector<std::pair<std::string, Shape5>> Network<T>::trace_shapes(const ClipGeometry& g) const {
  std::vector<std::pair<std::string, Shape5>> out;
  Shape5 s(1, spec_.in_channels, g.frames, g.height, g.width);
  s = stem_conv_.spec().output_shape(s);
  out.emplace_back("stem", s);
  s = max_pool_output_shape(s, stem_pool_);
  out.emplace_back("pool1", s);
  for (const auto& b : blocks_) {
    s = b.output_shape(s);
    out.emplace_back(b.prefix(), s);
  }
  const Shape5 pooled(1, static_cast<std::int64_t>(s.c), 1, 1, 1);
  out.emplace_back("pool5", pooled);
  out.emplace_back("dropout", pooled);
  out.emplace_back("fc", Shape5(1, spec_.num_classes, 1, 1, 1));
  return out;
}

template <typename T>
Network<T> build_network(const ArchSpec& spec, const InitRule& init) {
  Network<T> net(spec);
  net.init(init);
  return net;
}

template <typename T>
ParamTable count_parameters(Network<T>& net) {
  ParamTable table;
  auto views = net.params();
  // Views arrive as conv, then its BN (gamma, beta, mean, var); fc last.
  for (const auto& v : views) {
    switch (v.role) {
      case ParamRole::kConvWeight: {
        const std::string layer = v.name.substr(0, v.name.size() - std::string(".weight").size());
        table.rows.push_back({layer, v.value.size(), 0});
        table.weights += v.value.size();
        break;
      }
      case ParamRole::kBnScale:
      case ParamRole::kBnShift:
        table.rows.back().bn += v.value.size();
        table.bn += v.value.size();
        break;
      case ParamRole::kBnRunningMean:
      case ParamRole::kBnRunningVar:
        table.running_stats += v.value.size();
        break;
      case ParamRole::kFcWeight:
        table.rows.push_back({"fc", v.value.size(), 0});
        table.weights += v.value.size();
        break;
      case ParamRole::kFcBias:
        table.rows.back().weights += v.value.size();
        table.weights += v.value.size();
        break;
    }
  }
  return table;
}

template <typename T>
std::size_t model_size_bytes(Network<T>& net, bool include_running_stats) {
  const ParamTable t = count_parameters(net);
  return 4 * (t.total() + (include_running_stats ? t.running_stats : 0));
}

namespace {

std::string shape_cell(const Shape5& s) {
  std::ostringstream os;
  os << s.c << "x" << s.t << "x" << s.h << "x" << s.w;
  return os.str();
}

std::string with_commas(std::size_t v) {
  std::string digits = std::to_string(v);
  std::string out;
  const std::size_t n = digits.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0 && (n - i) % 3 == 0) out += ',';
    out += digits[i];
  }
  return out;
}

}  // namespace

template <typename T>
std::string summarize(Network<T>& net, const ClipGeometry& geometry) {
  const ParamTable table = count_parameters(net);
  std::map<std::string, std::size_t> per_prefix;
  for (const auto& r : table.rows) {
    const auto dot = r.layer.rfind('.');
    const std::string prefix = r.layer == "fc" ? "fc" : r.layer.substr(0, dot);
    per_prefix[prefix] += r.weights + r.bn;
  }
  std::vector<std::array<std::string, 4>> rows;
  rows.push_back({"layer", "kind", "output", "params"});
  const auto shapes = net.trace_shapes(geometry);
  std::size_t block = 0;
  for (const auto& [name, shape] : shapes) {
    std::string kind;
    std::size_t params = 0;
    if (name == "stem") {
      kind = "conv1x7x7/2";
      params = per_prefix["stem"];
    } else if (name == "pool1") {
      kind = "maxpool1x3x3/2";
    } else if (name == "pool5") {
      kind = "avgpool";
    } else if (name == "dropout") {
      kind = "dropout";
    } else if (name == "fc") {
      kind = "fc";
      params = per_prefix["fc"];
    } else {
      kind = std::string("P3D-") + kind_name(net.blocks()[block].spec().kind);
      if (net.blocks()[block].spec().kind == BlockKind::kBasic2D) kind = "res2d";
      params = per_prefix[name];
      ++block;
    }
    rows.push_back({name, kind, shape_cell(shape), with_commas(params)});
  }
  rows.push_back({"total", "", "", with_commas(table.total())});

  std::array<std::size_t, 4> width{};
  for (const auto& r : rows)
    for (std::size_t c = 0; c < 4; ++c) width[c] = std::max(width[c], r[c].size());
  std::ostringstream os;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (i + 1 == rows.size()) {
      os << std::string(width[0] + width[1] + width[2] + width[3] + 6, '-') << "\n";
    }
    os << std::left << std::setw(static_cast<int>(width[0])) << r[0] << "  "
       << std::setw(static_cast<int>(width[1])) << r[1] << "  "
       << std::setw(static_cast<int>(width[2])) << r[2] << "  " << std::right
       << std::setw(static_cast<int>(width[3])) << r[3] << "\n";
  }
  return os.str();
}

namespace {

bool is_temporal_param(const std::string& name) {
  return name.find(".temporal.") != std::string::npos ||
         name.find(".temporal_bn.") != std::string::npos;
}

std::string dims_text(const std::vector<std::uint64_t>& d) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < d.size(); ++i) os << (i ? "," : "") << d[i];
  os << "]";
  return os.str();
}

}  // namespace

template <typename T>
void inflate_from_2d(Network<T>& net, const Checkpoint& ckpt2d, TemporalInit temporal_init,
                     std::uint64_t seed) {
  for (auto& p : net.params()) {
    if (is_temporal_param(p.name)) continue;
    const std::vector<std::uint64_t> want(p.dims.begin(), p.dims.end());
    const NamedTensor* src = ckpt2d.find(p.name);
    if (p.role == ParamRole::kFcWeight || p.role == ParamRole::kFcBias) {
      // Classifier is kept as initialized when the head size differs.
      if (!src || src->dims == want) {
        if (src) std::copy(src->data.begin(), src->data.end(), p.value.begin());
        continue;
      }
      const bool class_mismatch = (p.role == ParamRole::kFcBias) ||
                                  (src->dims.size() == 2 && src->dims[0] == want[0]);
      if (class_mismatch) continue;
      throw ShapeError("layer '" + p.name + "': 2D checkpoint dims " + dims_text(src->dims) +
                       " vs graph dims " + dims_text(want));
    }
    if (!src) throw ShapeError("layer '" + p.name + "': missing from 2D checkpoint");
    bool ok = src->dims == want;
    if (!ok && p.role == ParamRole::kConvWeight && src->dims.size() == 4 && want.size() == 5) {
      // 2D kernel (out, in, k, k) fills a (out, in, 1, k, k) slot.
      ok = want[2] == 1 && src->dims[0] == want[0] && src->dims[1] == want[1] &&
           src->dims[2] == want[3] && src->dims[3] == want[4];
    }
    if (!ok) {
      throw ShapeError("layer '" + p.name + "': 2D checkpoint dims " + dims_text(src->dims) +
                       " vs graph dims " + dims_text(want));
    }
    std::copy(src->data.begin(), src->data.end(), p.value.begin());
  }
  for (auto& b : net.blocks()) {
    if (!b.has_temporal()) continue;
    switch (temporal_init) {
      case TemporalInit::kIdentity:
        b.set_temporal_identity();
        break;
      case TemporalInit::kZeros:
        b.set_temporal_zero();
        break;
      case TemporalInit::kRandom:
        b.set_temporal_zero();
        he_normal_init(b.temporal(), seed);
        break;
    }
  }
}

#define P3D_INSTANTIATE_NETWORK(T)                                                      \
  template class Network<T>;                                                            \
  template Network<T> build_network<T>(const ArchSpec&, const InitRule&);               \
  template ParamTable count_parameters(Network<T>&);                                    \
  template std::size_t model_size_bytes(Network<T>&, bool);                             \
  template std::string summarize(Network<T>&, const ClipGeometry&);                     \
  template void inflate_from_2d(Network<T>&, const Checkpoint&, TemporalInit, std::uint64_t);

P3D_INSTANTIATE_NETWORK(float)
P3D_INSTANTIATE_NETWORK(double)

}  // namespace p3d
