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
#include "p3d/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "p3d/block.hpp"
#include "p3d/conv.hpp"
#include "p3d/layers.hpp"
#include "p3d/network.hpp"
#include "p3d/rng.hpp"

namespace p3d {

GradCheckReport grad_check(DiffOp& op, std::uint64_t seed, int directions, double kink_tol,
                           int max_redraws) {
  const Tensor<double> y = op.forward();
  const Tensor<double> r = Tensor<double>::uniform(y.shape(), -1.0, 1.0, splitmix64(seed));
  const std::vector<std::vector<double>> grads = op.backward(r);
  if (grads.size() != op.probes.size()) throw Error(op.name + ": backward returned wrong grad count");

  auto objective = [&]() {
    const Tensor<double> out = op.forward();
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += r[i] * out[i];
    return s;
  };

  GradCheckReport report;
  Rng rng(splitmix64(seed + 1));
  for (std::size_t p = 0; p < op.probes.size(); ++p) {
    std::span<double> x = op.probes[p].value;
    if (grads[p].size() != x.size()) throw Error(op.name + ": gradient size mismatch");
    const std::vector<double> saved(x.begin(), x.end());
    std::vector<double> v(x.size());
    auto difference = [&](double h) {
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = saved[i] + h * v[i];
      const double plus = objective();
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = saved[i] - h * v[i];
      const double minus = objective();
      std::copy(saved.begin(), saved.end(), x.begin());
      return (plus - minus) / (2.0 * h);
    };

    ProbeError worst{op.probes[p].name};
    int redraws = 0;
    for (int d = 0; d < directions; ++d) {
      for (auto& e : v) e = rng.uniform(-1.0, 1.0);
      double analytic = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) analytic += grads[p][i] * v[i];
      const double coarse = difference(op.step);
      const double fine = difference(op.step / 2);
      const double scale = std::max({std::abs(coarse), std::abs(fine), 1e-8});
      if (std::abs(coarse - fine) > kink_tol * scale) {
        if (redraws < max_redraws) {
          ++redraws;
          --d;
          continue;
        }
        report.kink_limited = true;
      }
      const double rel = std::abs(analytic - fine) / std::max({std::abs(analytic), std::abs(fine), 1e-8});
      if (!(rel <= worst.rel_error)) worst = {op.probes[p].name, analytic, fine, rel};
    }
    report.redrawn += redraws;
    if (!(worst.rel_error <= report.max_rel_error)) report.max_rel_error = worst.rel_error;
    report.worst_per_probe.push_back(worst);
  }
  return report;
}

namespace {

using TD = Tensor<double>;

DiffOp named_op(std::string name, std::vector<GradProbe> probes) {
  DiffOp op;
  op.name = std::move(name);
  op.probes = std::move(probes);
  return op;
}

std::vector<double> to_vec(const TD& t) { return t.storage(); }

// Inputs and convolution weights owned by the op.
struct ConvState {
  TD x, w;
  KernelSpec spec;
};

DiffOp conv_op(const std::string& name, const Shape5& in, const KernelSpec& spec,
               std::uint64_t seed) {
  auto st = std::make_shared<ConvState>();
  st->x = TD::uniform(in, -1, 1, seed);
  st->w = TD::uniform(spec.weight_shape(), -1, 1, seed + 1);
  st->spec = spec;
  DiffOp op;
  op.name = name;
  op.probes = {{"x", st->x.values()}, {"w", st->w.values()}};
  auto* s = st.get();
  std::function<TD(const TD&, const TD&, const KernelSpec&)> fwd;
  std::function<ConvGrads<double>(const TD&, const TD&, const KernelSpec&, const TD&)> bwd;
  if (name == "conv_spatial") {
    fwd = conv_spatial<double>;
    bwd = conv_spatial_backward<double>;
  } else if (name == "conv_temporal") {
    fwd = conv_temporal<double>;
    bwd = conv_temporal_backward<double>;
  } else if (name == "conv_pointwise") {
    fwd = conv_pointwise<double>;
    bwd = conv_pointwise_backward<double>;
  } else {
    fwd = conv3d<double>;
    bwd = conv3d_backward<double>;
  }
  op.forward = [s, fwd] { return fwd(s->x, s->w, s->spec); };
  op.backward = [s, bwd](const TD& dy) {
    ConvGrads<double> g = bwd(s->x, s->w, s->spec, dy);
    return std::vector<std::vector<double>>{to_vec(g.dx), to_vec(g.dw)};
  };
  op.state = st;
  return op;
}

struct BnOpState {
  TD x;
  std::vector<double> gamma, beta;
  BnState<double> state;
  BnCache<double> cache;
  BnMode mode;
};

DiffOp bn_op(const std::string& name, BnMode mode, std::uint64_t seed) {
  auto st = std::make_shared<BnOpState>();
  const Shape5 s(2, 3, 3, 4, 4);
  st->x = TD::uniform(s, -2, 2, seed);
  Rng rng(seed + 7);
  for (int c = 0; c < 3; ++c) {
    st->gamma.push_back(rng.uniform(0.5, 1.5));
    st->beta.push_back(rng.uniform(-0.5, 0.5));
    st->state.running_mean.push_back(rng.uniform(-0.3, 0.3));
    st->state.running_var.push_back(rng.uniform(0.5, 2.0));
  }
  st->mode = mode;
  DiffOp op;
  op.name = name;
  op.probes = {{"x", st->x.values()}, {"gamma", st->gamma}, {"beta", st->beta}};
  auto* p = st.get();
  op.forward = [p] {
    return batch_norm<double>(p->x, p->gamma, p->beta, p->mode, p->state, BnConfig{}, &p->cache,
                              false);
  };
  op.backward = [p](const TD& dy) {
    BnGrads<double> g = batch_norm_backward<double>(p->cache, p->gamma, dy);
    return std::vector<std::vector<double>>{to_vec(g.dx), g.dgamma, g.dbeta};
  };
  op.state = st;
  return op;
}

struct UnaryState {
  TD x, y, aux;
  std::vector<std::uint32_t> argmax;
  std::vector<double> bias;
  std::vector<int> labels;
};

DiffOp relu_op(std::uint64_t seed) {
  auto st = std::make_shared<UnaryState>();
  // Magnitudes in [0.1, 1] keep every probe away from the kink.
  st->x = TD::uniform(Shape5(2, 3, 2, 3, 3), 0.1, 1.0, seed);
  Rng rng(seed + 3);
  for (auto& v : st->x.storage())
    if (rng.next_unit() < 0.5) v = -v;
  DiffOp op = named_op("relu", {{"x", st->x.values()}});
  auto* p = st.get();
  op.forward = [p] { return relu(p->x); };
  op.backward = [p](const TD& dy) {
    return std::vector<std::vector<double>>{to_vec(relu_backward(p->x, dy))};
  };
  op.state = st;
  return op;
}

DiffOp add_op(std::uint64_t seed) {
  auto st = std::make_shared<UnaryState>();
  st->x = TD::uniform(Shape5(1, 2, 3, 2, 2), -1, 1, seed);
  st->aux = TD::uniform(Shape5(1, 2, 3, 2, 2), -1, 1, seed + 1);
  DiffOp op = named_op("add", {{"a", st->x.values()}, {"b", st->aux.values()}});
  auto* p = st.get();
  op.forward = [p] { return add(p->x, p->aux); };
  op.backward = [](const TD& dy) { return std::vector<std::vector<double>>{to_vec(dy), to_vec(dy)}; };
  op.state = st;
  return op;
}

DiffOp max_pool_op(std::uint64_t seed) {
  auto st = std::make_shared<UnaryState>();
  st->x = TD::uniform(Shape5(1, 2, 2, 6, 6), -1, 1, seed);
  DiffOp op = named_op("max_pool", {{"x", st->x.values()}});
  auto* p = st.get();
  op.forward = [p] {
    MaxPoolResult<double> r = max_pool_spatial(p->x, PoolSpec{3, 2, 1});
    p->argmax = r.argmax;
    return r.y;
  };
  op.backward = [p](const TD& dy) {
    return std::vector<std::vector<double>>{
        to_vec(max_pool_spatial_backward<double>(p->x.shape(), p->argmax, dy))};
  };
  op.state = st;
  return op;
}

DiffOp gap_op(std::uint64_t seed) {
  auto st = std::make_shared<UnaryState>();
  st->x = TD::uniform(Shape5(2, 3, 2, 3, 3), -1, 1, seed);
  DiffOp op = named_op("global_avg_pool", {{"x", st->x.values()}});
  auto* p = st.get();
  op.forward = [p] { return global_avg_pool(p->x); };
  op.backward = [p](const TD& dy) {
    return std::vector<std::vector<double>>{to_vec(global_avg_pool_backward(p->x.shape(), dy))};
  };
  op.state = st;
  return op;
}

DiffOp fc_op(std::uint64_t seed) {
  auto st = std::make_shared<UnaryState>();
  st->x = TD::uniform(Shape5(3, 6, 1, 1, 1), -1, 1, seed);
  st->aux = TD::uniform(Shape5(6, 4, 1, 1, 1), -1, 1, seed + 1);
  Rng rng(seed + 2);
  for (int k = 0; k < 4; ++k) st->bias.push_back(rng.uniform(-1, 1));
  DiffOp op = named_op("fully_connected", {{"x", st->x.values()}, {"W", st->aux.values()}, {"b", st->bias}});
  auto* p = st.get();
  op.forward = [p] { return fully_connected<double>(p->x, p->aux, p->bias); };
  op.backward = [p](const TD& dy) {
    FcGrads<double> g = fully_connected_backward(p->x, p->aux, dy);
    return std::vector<std::vector<double>>{to_vec(g.dx), to_vec(g.dweight), g.dbias};
  };
  op.state = st;
  return op;
}

DiffOp softmax_op(std::uint64_t seed) {
  auto st = std::make_shared<UnaryState>();
  st->x = TD::uniform(Shape5(4, 5, 1, 1, 1), -3, 3, seed);
  st->labels = {0, 3, 4, 1};
  DiffOp op = named_op("softmax_cross_entropy", {{"logits", st->x.values()}});
  auto* p = st.get();
  op.forward = [p] {
    LossResult<double> r = softmax_cross_entropy<double>(p->x, p->labels);
    return TD(Shape5(1, 1, 1, 1, 1), r.loss);
  };
  op.backward = [p](const TD& dy) {
    LossResult<double> r = softmax_cross_entropy<double>(p->x, p->labels);
    return std::vector<std::vector<double>>{to_vec(scale(r.dlogits, dy[0]))};
  };
  op.state = st;
  return op;
}

DiffOp dropout_op(std::uint64_t seed) {
  auto st = std::make_shared<UnaryState>();
  st->x = TD::uniform(Shape5(2, 4, 1, 1, 1), -1, 1, seed);
  DiffOp op = named_op("dropout", {{"x", st->x.values()}});
  auto* p = st.get();
  // Fixed mask seed: the op is linear in x for a given draw.
  op.forward = [p, seed] {
    DropoutResult<double> r = dropout(p->x, 0.5, seed + 11);
    p->aux = r.mask;
    return r.y;
  };
  op.backward = [p](const TD& dy) {
    TD dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= p->aux[i];
    return std::vector<std::vector<double>>{to_vec(dx)};
  };
  op.state = st;
  return op;
}

struct BlockState {
  Block<double> block;
  TD x;
  std::vector<ParamView<double>> params;
};

// Perturbs BN parameters away from their 1/0 defaults so every path is exercised.
void jitter_bn(std::vector<BatchNormLayer<double>*> bns, std::uint64_t seed) {
  Rng rng(seed);
  for (auto* bn : bns) {
    for (auto& g : bn->gamma()) g = rng.uniform(0.5, 1.5);
    for (auto& b : bn->beta()) b = rng.uniform(-0.3, 0.3);
  }
}

DiffOp block_op(const std::string& name, BlockKind kind, bool projection, std::uint64_t seed) {
  auto st = std::make_shared<BlockState>();
  const BlockSpec spec = projection ? BlockSpec::bottleneck(kind, 4, 2, 2)
                                    : BlockSpec::bottleneck(kind, 8, 2, 1);
  st->block = Block<double>(name, spec);
  st->block.init(InitRule{seed});
  jitter_bn(st->block.batch_norms(), seed + 5);
  st->x = TD::uniform(projection ? Shape5(2, 4, 4, 6, 6) : Shape5(2, 8, 4, 5, 5), -1, 1, seed + 9);
  st->block.collect(st->params);
  DiffOp op;
  op.name = name;
  op.probes.push_back({"x", st->x.values()});
  for (auto& p : st->params)
    if (is_trainable(p.role)) op.probes.push_back({p.name, p.value});
  auto* s = st.get();
  op.forward = [s] { return s->block.forward(s->x, true); };
  op.backward = [s](const TD& dy) {
    s->block.zero_grad();
    std::vector<std::vector<double>> g{to_vec(s->block.backward(dy))};
    for (auto& p : s->params)
      if (is_trainable(p.role)) g.emplace_back(p.grad.begin(), p.grad.end());
    return g;
  };
  op.state = st;
  return op;
}

std::vector<BatchNormLayer<double>*> collect_batch_norms(Network<double>& net) {
  std::vector<BatchNormLayer<double>*> out{&net.stem_bn()};
  for (auto& b : net.blocks())
    for (auto* bn : b.batch_norms()) out.push_back(bn);
  return out;
}

struct NetState {
  Network<double> net;
  TD x;
  std::vector<ParamView<double>> params;
};

DiffOp network_op(std::uint64_t seed) {
  auto st = std::make_shared<NetState>();
  ArchSpec spec = ArchSpec::standard(50, BlockPolicy::kMixed, 3);
  spec.stem_channels = 4;
  spec.mid_channels = {2, 2, 2, 2};
  spec.input = {4, 16, 16};
  st->net = build_network<double>(spec, InitRule{seed});
  // Batch statistics over the few positions left in the last stages make the
  // loss surface too curved for finite differences; the blocks are checked
  // in training mode on their own, so here BN runs on stored statistics.
  Rng rng(seed + 2);
  for (auto* bn : collect_batch_norms(st->net)) {
    for (auto& g : bn->gamma()) g = rng.uniform(0.5, 1.5);
    for (auto& b : bn->beta()) b = rng.uniform(-0.3, 0.3);
    for (auto& m : bn->state().running_mean) m = rng.uniform(-0.3, 0.3);
    for (auto& v : bn->state().running_var) v = rng.uniform(0.5, 2.0);
  }
  st->net.set_bn_mode(BnMode::kInference);
  st->x = TD::uniform(Shape5(2, 3, 4, 16, 16), -1, 1, seed + 1);
  // Every layer type is covered by the block checks; here the probes are the
  // ends of the chain plus one tensor per stage, which all carry gradients well
  // above finite-difference noise.
  for (auto& p : st->net.params()) {
    const bool wanted = p.name.starts_with("stem.") || p.name.starts_with("fc.") ||
                        p.name.ends_with(".block0.reduce.weight");
    if (wanted) st->params.push_back(p);
  }
  DiffOp op;
  op.name = "network";
  op.step = 1e-6;
  op.probes.push_back({"x", st->x.values()});
  for (auto& p : st->params)
    if (is_trainable(p.role)) op.probes.push_back({p.name, p.value});
  auto* s = st.get();
  op.forward = [s] { return s->net.forward(s->x, true); };
  op.backward = [s](const TD& dy) {
    s->net.zero_grad();
    std::vector<std::vector<double>> g{to_vec(s->net.backward(dy))};
    for (auto& p : s->params)
      if (is_trainable(p.role)) g.emplace_back(p.grad.begin(), p.grad.end());
    return g;
  };
  op.state = st;
  return op;
}

}  // namespace

GradCheckReport check_named_op(const std::string& name, std::uint64_t seed, int max_points) {
  GradCheckReport report;
  for (int k = 0; k < max_points; ++k) {
    const std::uint64_t point_seed = k == 0 ? seed : splitmix64(seed + 0x9e3779b97f4a7c15ULL * k);
    DiffOp op = make_gradcheck_op(name, point_seed);
    report = grad_check(op, point_seed);
    report.points = k + 1;
    if (!report.kink_limited) break;
  }
  return report;
}

const std::vector<std::string>& gradcheck_op_names() {
  static const std::vector<std::string> names = {
      "conv3d",         "conv_spatial",    "conv_temporal",    "conv_pointwise",
      "batch_norm",     "batch_norm_inference", "relu",        "max_pool",
      "global_avg_pool", "fully_connected", "softmax_cross_entropy", "dropout",
      "add",            "block_2d",        "block_a",          "block_b",
      "block_c",        "block_2d_proj",   "block_a_proj",     "block_b_proj",
      "block_c_proj",   "network"};
  return names;
}

DiffOp make_gradcheck_op(const std::string& name, std::uint64_t seed) {
  if (name == "conv3d")
    return conv_op(name, Shape5(1, 2, 4, 5, 5), KernelSpec{3, 3, 2, 3, 1, 2, 1, 1}, seed);
  if (name == "conv_spatial")
    return conv_op(name, Shape5(1, 2, 2, 4, 4), KernelSpec::same(1, 3, 2, 3), seed);
  if (name == "conv_temporal")
    return conv_op(name, Shape5(1, 2, 5, 2, 2), KernelSpec::same(3, 1, 2, 3), seed);
  if (name == "conv_pointwise")
    return conv_op(name, Shape5(1, 3, 2, 4, 4), KernelSpec{1, 1, 3, 4, 1, 2, 0, 0}, seed);
  if (name == "batch_norm") return bn_op(name, BnMode::kTrain, seed);
  if (name == "batch_norm_inference") return bn_op(name, BnMode::kInference, seed);
  if (name == "relu") return relu_op(seed);
  if (name == "max_pool") return max_pool_op(seed);
  if (name == "global_avg_pool") return gap_op(seed);
  if (name == "fully_connected") return fc_op(seed);
  if (name == "softmax_cross_entropy") return softmax_op(seed);
  if (name == "dropout") return dropout_op(seed);
  if (name == "add") return add_op(seed);
  if (name == "network") return network_op(seed);
  const bool proj = name.ends_with("_proj");
  const std::string base = proj ? name.substr(0, name.size() - 5) : name;
  if (base == "block_2d") return block_op(name, BlockKind::kBasic2D, proj, seed);
  if (base == "block_a") return block_op(name, BlockKind::kA, proj, seed);
  if (base == "block_b") return block_op(name, BlockKind::kB, proj, seed);
  if (base == "block_c") return block_op(name, BlockKind::kC, proj, seed);
  throw SpecError("unknown gradcheck op '" + name + "'");
}

}  // namespace p3d
