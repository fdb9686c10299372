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
#include <ostream>
#include <string>

#include "p3d/network.hpp"

namespace p3d::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumerical = 3;

/// "T,H,W" -> geometry; throws SpecError on malformed text.
ClipGeometry parse_geometry(const std::string& text);
/// "H,W" -> (h, w); throws SpecError on malformed text.
std::pair<std::size_t, std::size_t> parse_extent(const std::string& text);

struct BuildArgs {
  int depth = 50;
  std::string blocks = "mixed";
  int classes = 487;
  std::string out;
  std::uint64_t seed = 0;
  std::string input;  ///< empty keeps the preset geometry
  bool reduced = false;
};

struct SummaryArgs {
  std::string ckpt;
  std::string input;
  bool include_running_stats = false;
};

struct GradcheckArgs {
  std::string op;
  bool all = false;
  bool list = false;
  std::uint64_t seed = 0;
  double tolerance = 1e-5;
  bool verbose = false;
};

struct InflateArgs {
  std::string from2d;
  std::string into;
  std::string temporal = "identity";
  std::string blocks = "mixed";
  int depth = 50;
  std::uint64_t seed = 0;
};

struct TrainArgs {
  std::string data;
  double lr = 0.001;
  int lr_step = 3000;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::size_t batch = 8;
  int iters = 100;
  double dropout = 0.0;
  std::uint64_t seed = 0;
  std::string ckpt;
  std::string init;
  std::string blocks = "a";
  int depth = 50;
  bool freeze_bn = false;
  std::string log;
  int print_every = 10;
  double stop_at = 2.0;
};

struct ExtractArgs {
  std::string ckpt;
  std::string video;
  std::size_t clips = 20;
  std::string out;
  std::string mode = "random";
  std::string resize;
  std::uint64_t seed = 0;
};

struct BenchArgs {
  std::string ckpt;
  std::string input = "16,160,160";
  int iters = 3;
  int threads = 0;
  std::size_t batch = 1;
  bool compare = false;
};

struct SynthArgs {
  std::string out;
  std::size_t per_class = 8;
  std::string input = "16,32,32";
  std::uint64_t seed = 0;
};

struct SelftestArgs {
  std::uint64_t seed = 0;
  bool quick = false;
};

int run_build(const BuildArgs& a, std::ostream& out);
int run_summary(const SummaryArgs& a, std::ostream& out);
int run_gradcheck(const GradcheckArgs& a, std::ostream& out);
int run_inflate(const InflateArgs& a, std::ostream& out);
int run_train(const TrainArgs& a, std::ostream& out);
int run_extract(const ExtractArgs& a, std::ostream& out);
int run_bench(const BenchArgs& a, std::ostream& out);
int run_synth(const SynthArgs& a, std::ostream& out);
int run_selftest(const SelftestArgs& a, std::ostream& out);

}  // namespace p3d::cli
