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
#include <benchmark/benchmark.h>

#include "p3d/conv.hpp"

namespace {

using p3d::ClipTensor;
using p3d::KernelSpec;
using p3d::Shape5;

// Stage-1 sized input of a P3D-50 on 16x160x160 clips: 64 channels, 16 x 40 x 40.
const Shape5 kStage1(1, 64, 16, 40, 40);

void run_conv(benchmark::State& state, const KernelSpec& spec,
              ClipTensor (*fn)(const ClipTensor&, const ClipTensor&, const KernelSpec&)) {
  const ClipTensor x = ClipTensor::uniform(kStage1, -1, 1, 1);
  const ClipTensor w = ClipTensor::uniform(spec.weight_shape(), -1, 1, 2);
  const Shape5 out = spec.output_shape(kStage1);
  for (auto _ : state) benchmark::DoNotOptimize(fn(x, w, spec));
  const double flops = 2.0 * out.count() * spec.in_ch * spec.d * spec.k * spec.k;
  state.counters["GFLOP/s"] =
      benchmark::Counter(flops * state.iterations() / 1e9, benchmark::Counter::kIsRate);
}

void BM_ConvSpatial(benchmark::State& state) {
  run_conv(state, KernelSpec::same(1, 3, 64, 64), p3d::conv_spatial<float>);
}
void BM_ConvTemporal(benchmark::State& state) {
  run_conv(state, KernelSpec::same(3, 1, 64, 64), p3d::conv_temporal<float>);
}
void BM_ConvPointwise(benchmark::State& state) {
  run_conv(state, KernelSpec::same(1, 1, 64, 256), p3d::conv_pointwise<float>);
}
void BM_Conv3x3x3(benchmark::State& state) {
  run_conv(state, KernelSpec::same(3, 3, 64, 64), p3d::conv3d<float>);
}

void BM_ConvSpatialBackward(benchmark::State& state) {
  const KernelSpec spec = KernelSpec::same(1, 3, 64, 64);
  const ClipTensor x = ClipTensor::uniform(kStage1, -1, 1, 1);
  const ClipTensor w = ClipTensor::uniform(spec.weight_shape(), -1, 1, 2);
  const ClipTensor dy = ClipTensor::uniform(spec.output_shape(kStage1), -1, 1, 3);
  for (auto _ : state) benchmark::DoNotOptimize(p3d::conv_spatial_backward(x, w, spec, dy));
}

}  // namespace

BENCHMARK(BM_ConvSpatial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvTemporal)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvPointwise)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Conv3x3x3)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvSpatialBackward)->Unit(benchmark::kMillisecond);
