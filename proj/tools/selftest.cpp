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
// Self-contained equivalence suites behind `p3d selftest`.

#include <algorithm>
#include <cstdio>
#include <functional>

#include "commands.hpp"
#include "p3d/checkpoint.hpp"
#include "p3d/conv.hpp"
#include "p3d/rng.hpp"

namespace p3d::cli {

namespace {

using ConvFn = std::function<ClipTensor(const ClipTensor&, const ClipTensor&, const KernelSpec&)>;

struct SuiteLine {
  std::string name;
  int cases = 0;
  double max_err = 0.0;
  double bound = 0.0;
  bool ok() const { return max_err < bound; }
};

int pick(Rng& rng, int lo, int hi) { return lo + static_cast<int>(rng.below(hi - lo + 1)); }

// Random input and kernel whose output is non-empty.
struct ConvCase {
  Shape5 in;
  KernelSpec spec;
};

ConvCase random_case(Rng& rng, const std::string& family) {
  KernelSpec k{1, 1, pick(rng, 1, 4), pick(rng, 1, 5), 1, 1, 0, 0};
  if (family == "spatial" || family == "full") {
    k.k = 1 + 2 * pick(rng, 0, 2);
    k.stride_s = pick(rng, 1, 2);
    k.pad_s = pick(rng, 0, k.k / 2);
  }
  if (family == "temporal" || family == "full") {
    k.d = 1 + 2 * pick(rng, 0, 2);
    k.stride_t = pick(rng, 1, 2);
    k.pad_t = pick(rng, 0, k.d / 2);
  }
  if (family == "pointwise") {
    k.stride_t = pick(rng, 1, 2);
    k.stride_s = pick(rng, 1, 2);
  }
  const int t = pick(rng, k.d, k.d + 5), h = pick(rng, k.k, k.k + 6), w = pick(rng, k.k, k.k + 6);
  return {Shape5(pick(rng, 1, 2), k.in_ch, t, h, w), k};
}

SuiteLine oracle_family(const std::string& family, const ConvFn& fn, int cases, double bound,
                        std::uint64_t seed) {
  SuiteLine line{family + " vs reference", cases, 0.0, bound};
  Rng rng(seed);
  for (int i = 0; i < cases; ++i) {
    const ConvCase c = random_case(rng, family);
    const ClipTensor x = ClipTensor::uniform(c.in, -1, 1, rng.next_u64());
    const ClipTensor w = ClipTensor::uniform(c.spec.weight_shape(), -1, 1, rng.next_u64());
    line.max_err = std::max(line.max_err, max_abs_diff(fn(x, w, c.spec), conv3d_ref(x, w, c.spec)));
  }
  return line;
}

SuiteLine separable_suite(int cases, std::uint64_t seed) {
  SuiteLine line{"temporal(spatial(x)) vs composed 3D", cases, 0.0, 1e-4};
  Rng rng(seed);
  for (int i = 0; i < cases; ++i) {
    const int in = pick(rng, 1, 3), mid = pick(rng, 1, 3), out = pick(rng, 1, 3);
    const int k = 1 + 2 * pick(rng, 0, 1), d = 1 + 2 * pick(rng, 0, 1);
    const KernelSpec s = KernelSpec::same(1, k, in, mid);
    const KernelSpec t = KernelSpec::same(d, 1, mid, out);
    const KernelSpec full = KernelSpec::same(d, k, in, out);
    const ClipTensor x =
        ClipTensor::uniform(Shape5(1, in, pick(rng, d, 6), pick(rng, k, 7), pick(rng, k, 7)), -1, 1,
                            rng.next_u64());
    const ClipTensor ws = ClipTensor::uniform(s.weight_shape(), -1, 1, rng.next_u64());
    const ClipTensor wt = ClipTensor::uniform(t.weight_shape(), -1, 1, rng.next_u64());
    ClipTensor wf(full.weight_shape());
    for (int o = 0; o < out; ++o)
      for (int c = 0; c < in; ++c)
        for (int dt = 0; dt < d; ++dt)
          for (int dh = 0; dh < k; ++dh)
            for (int dw = 0; dw < k; ++dw) {
              double acc = 0.0;
              for (int m = 0; m < mid; ++m) acc += double(wt(o, m, dt, 0, 0)) * ws(m, c, 0, dh, dw);
              wf(o, c, dt, dh, dw) = static_cast<float>(acc);
            }
    const ClipTensor cascade = conv_temporal(conv_spatial(x, ws, s), wt, t);
    line.max_err = std::max(line.max_err, max_abs_diff(cascade, conv3d(x, wf, full)));
  }
  return line;
}

// Non-trivial BN parameters and statistics so inflation is tested off the unit case.
void randomize_bn(Network<float>& net, std::uint64_t seed) {
  Rng rng(seed);
  for (auto& p : net.params()) {
    for (auto& v : p.value) {
      switch (p.role) {
        case ParamRole::kBnScale: v = static_cast<float>(rng.uniform(0.5, 1.5)); break;
        case ParamRole::kBnShift: v = static_cast<float>(rng.uniform(-0.2, 0.2)); break;
        case ParamRole::kBnRunningMean: v = static_cast<float>(rng.uniform(-0.1, 0.1)); break;
        case ParamRole::kBnRunningVar: v = static_cast<float>(rng.uniform(0.5, 2.0)); break;
        default: break;
      }
    }
  }
}

SuiteLine inflation_suite(BlockPolicy policy, int frames, std::uint64_t seed) {
  SuiteLine line{std::string("inflated ") + policy_name(policy) + " vs 2D frame feature", 1, 0.0,
                 1e-4};
  ArchSpec spec2d = ArchSpec::reduced(50, BlockPolicy::kBasic2D, 10);
  spec2d.input = {frames, 32, 32};
  Network<float> net2d = build_network<float>(spec2d, InitRule{seed});
  randomize_bn(net2d, seed + 1);
  const Checkpoint ckpt2d = to_checkpoint(net2d);

  ArchSpec spec3d = spec2d;
  spec3d.policy = policy;
  Network<float> net3d = build_network<float>(spec3d, InitRule{seed + 2});
  inflate_from_2d(net3d, ckpt2d, TemporalInit::kIdentity);

  net2d.set_bn_mode(BnMode::kInference);
  net3d.set_bn_mode(BnMode::kInference);
  const ClipTensor frame = ClipTensor::uniform(Shape5(1, 3, 1, 32, 32), 0, 1, seed + 3);
  ClipTensor clip(Shape5(1, 3, frames, 32, 32));
  for (int t = 0; t < frames; ++t)
    for (int c = 0; c < 3; ++c)
      for (int h = 0; h < 32; ++h)
        for (int w = 0; w < 32; ++w) clip(0, c, t, h, w) = frame(0, c, 0, h, w);
  line.max_err = max_abs_diff(net3d.pool5(clip), net2d.pool5(frame));
  return line;
}

}  // namespace

int run_selftest(const SelftestArgs& a, std::ostream& out) {
  const int n = a.quick ? 10 : 60;
  std::vector<SuiteLine> lines;
  lines.push_back(oracle_family("spatial", conv_spatial<float>, n, 1e-6, a.seed + 1));
  lines.push_back(oracle_family("temporal", conv_temporal<float>, n, 1e-6, a.seed + 2));
  lines.push_back(oracle_family("pointwise", conv_pointwise<float>, n, 1e-6, a.seed + 3));
  lines.push_back(oracle_family("full", conv3d<float>, n, 1e-5, a.seed + 4));
  lines.push_back(separable_suite(a.quick ? 5 : 20, a.seed + 5));
  for (BlockPolicy p : {BlockPolicy::kAllA, BlockPolicy::kAllB, BlockPolicy::kAllC, BlockPolicy::kMixed})
    lines.push_back(inflation_suite(p, a.quick ? 4 : 16, a.seed + 6));

  bool ok = true;
  for (const auto& l : lines) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "%-40s cases %3d  max err %.3e  bound %.0e  %s\n", l.name.c_str(),
                  l.cases, l.max_err, l.bound, l.ok() ? "PASS" : "FAIL");
    out << buf;
    ok = ok && l.ok();
  }
  out << (ok ? "selftest passed\n" : "selftest FAILED\n");
  return ok ? kExitOk : kExitNumerical;
}

}  // namespace p3d::cli
