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
#include <gtest/gtest.h>

#include <cmath>

#include "p3d/bench.hpp"

namespace p3d {
namespace {

ArchSpec small() {
  auto s = ArchSpec::reduced(50, BlockPolicy::kMixed, 10);
  s.input = {8, 48, 48};
  return s;
}

TEST(Bench, ThroughputAndLayerAccounting) {
  auto net = build_network<float>(small(), {1, false});
  BenchConfig cfg;
  cfg.geometry = {8, 48, 48};
  cfg.iters = 5;
  cfg.threads = 1;
  auto r = bench(net, cfg);
  EXPECT_EQ(r.run_seconds.size(), 5u);
  EXPECT_GT(r.clips_per_second, 0.0);
  EXPECT_NEAR(r.clips_per_second, 1.0 / r.median_seconds, 1e-9);
  ASSERT_FALSE(r.layers.empty());
  EXPECT_EQ(r.layers.front().name, "stem");
  EXPECT_EQ(r.layers.back().name, "fc");
  EXPECT_LT(std::abs(r.layer_sum_seconds - r.median_seconds), 0.10 * r.median_seconds);
  EXPECT_NE(format_bench(r).find("clips/s"), std::string::npos);
}

TEST(Bench, RepeatedRunsAreStable) {
  auto net = build_network<float>(small(), {2, false});
  BenchConfig cfg;
  cfg.geometry = {8, 48, 48};
  cfg.iters = 7;
  cfg.threads = 1;
  auto a = bench(net, cfg);
  auto b = bench(net, cfg);
  const double ratio = a.clips_per_second / b.clips_per_second;
  EXPECT_GT(ratio, 1.0 / 1.2);
  EXPECT_LT(ratio, 1.2);
}

TEST(Bench, BlockKindsSideBySide) {
  BenchConfig cfg;
  cfg.geometry = {4, 32, 32};
  cfg.iters = 1;
  auto rows = bench_block_kinds(small(), cfg);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].first, "P3D-A");
  EXPECT_EQ(rows[1].first, "P3D-B");
  EXPECT_EQ(rows[2].first, "P3D-C");
  auto table = format_comparison(rows);
  for (const char* name : {"P3D-A", "P3D-B", "P3D-C"})
    EXPECT_NE(table.find(name), std::string::npos);
}

TEST(Bench, RejectsEmptyRuns) {
  auto net = build_network<float>(small(), {3, false});
  BenchConfig cfg;
  cfg.iters = 0;
  EXPECT_THROW(bench(net, cfg), SpecError);
}

}  // namespace
}  // namespace p3d
