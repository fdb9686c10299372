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

#include <string>
#include <utility>
#include <vector>

#include "p3d/network.hpp"

namespace p3d {

struct BenchConfig {
  ClipGeometry geometry{};
  int iters = 3;
  int threads = 0;  ///< 0 keeps the OpenMP default
  std::size_t batch = 1;
  std::uint64_t seed = 0;
};

struct LayerTime {
  std::string name;
  double seconds = 0.0;
};

struct BenchResult {
  int threads = 1;
  std::size_t batch = 1;
  std::vector<double> run_seconds;
  double median_seconds = 0.0;
  double clips_per_second = 0.0;
  std::vector<LayerTime> layers;  ///< breakdown of the median run
  double layer_sum_seconds = 0.0;
};

/// Inference-mode forward passes on a random clip after one untimed warm-up.
/// Throughput is batch / median wall time.
BenchResult bench(Network<float>& net, const BenchConfig& cfg);

std::string format_bench(const BenchResult& result);

/// The same architecture rebuilt with all-A, all-B and all-C blocks, timed under
/// one config and reported side by side.
std::vector<std::pair<std::string, BenchResult>> bench_block_kinds(const ArchSpec& base,
                                                                   const BenchConfig& cfg);
std::string format_comparison(const std::vector<std::pair<std::string, BenchResult>>& rows);

}  // namespace p3d
