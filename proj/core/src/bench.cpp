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
#include "p3d/bench.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>

#include "p3d/error.hpp"

namespace p3d {

namespace {

class ThreadScope {
 public:
  explicit ThreadScope(int threads) : saved_(omp_get_max_threads()) {
    if (threads > 0) omp_set_num_threads(threads);
  }
  ~ThreadScope() { omp_set_num_threads(saved_); }
  ThreadScope(const ThreadScope&) = delete;
  ThreadScope& operator=(const ThreadScope&) = delete;

 private:
  int saved_;
};

}  // namespace

BenchResult bench(Network<float>& net, const BenchConfig& cfg) {
  if (cfg.iters < 1) throw SpecError("bench needs at least one iteration");
  if (cfg.batch < 1) throw SpecError("bench batch must be positive");
  ThreadScope scope(cfg.threads);
  const ClipGeometry& g = cfg.geometry;
  const ClipTensor x = ClipTensor::uniform(
      Shape5(static_cast<std::int64_t>(cfg.batch), net.spec().in_channels, g.frames, g.height, g.width),
      -1.0, 1.0, cfg.seed);
  net.set_bn_mode(BnMode::kInference);

  std::vector<LayerTime> laps;
  const LayerTimer timer = [&](const std::string& name, double s) { laps.push_back({name, s}); };
  net.forward(x, false);

  BenchResult r;
  r.threads = omp_get_max_threads();
  r.batch = cfg.batch;
  std::vector<std::vector<LayerTime>> breakdowns;
  for (int i = 0; i < cfg.iters; ++i) {
    laps.clear();
    const auto t0 = std::chrono::steady_clock::now();
    net.forward(x, false, &timer);
    r.run_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    breakdowns.push_back(laps);
  }
  std::vector<std::size_t> order(r.run_seconds.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return r.run_seconds[a] < r.run_seconds[b]; });
  const std::size_t mid = order[(order.size() - 1) / 2];
  r.median_seconds = r.run_seconds[mid];
  r.clips_per_second = static_cast<double>(cfg.batch) / r.median_seconds;
  r.layers = breakdowns[mid];
  for (const auto& l : r.layers) r.layer_sum_seconds += l.seconds;
  return r;
}

std::string format_bench(const BenchResult& r) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "threads %d  batch %zu  median %.4f s  %.3f clips/s\n", r.threads,
                r.batch, r.median_seconds, r.clips_per_second);
  out += line;
  std::size_t width = 5;
  for (const auto& l : r.layers) width = std::max(width, l.name.size());
  for (const auto& l : r.layers) {
    std::snprintf(line, sizeof line, "  %-*s %10.3f ms %6.1f%%\n", static_cast<int>(width),
                  l.name.c_str(), l.seconds * 1e3, 100.0 * l.seconds / r.median_seconds);
    out += line;
  }
  std::snprintf(line, sizeof line, "  %-*s %10.3f ms %6.1f%%\n", static_cast<int>(width), "sum",
                r.layer_sum_seconds * 1e3, 100.0 * r.layer_sum_seconds / r.median_seconds);
  out += line;
  return out;
}

std::vector<std::pair<std::string, BenchResult>> bench_block_kinds(const ArchSpec& base,
                                                                   const BenchConfig& cfg) {
  std::vector<std::pair<std::string, BenchResult>> rows;
  for (BlockPolicy p : {BlockPolicy::kAllA, BlockPolicy::kAllB, BlockPolicy::kAllC}) {
    ArchSpec spec = base;
    spec.policy = p;
    spec.input = cfg.geometry;
    Network<float> net = build_network<float>(spec, InitRule{cfg.seed});
    rows.emplace_back(std::string("P3D-") + kind_name(spec.kind_at(0)), bench(net, cfg));
  }
  return rows;
}

std::string format_comparison(const std::vector<std::pair<std::string, BenchResult>>& rows) {
  std::string out = "method     clips/s   median s\n";
  char line[96];
  for (const auto& [name, r] : rows) {
    std::snprintf(line, sizeof line, "%-8s %9.3f %10.4f\n", name.c_str(), r.clips_per_second,
                  r.median_seconds);
    out += line;
  }
  return out;
}

}  // namespace p3d
