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
#include <filesystem>
#include <span>
#include <vector>

#include "p3d/tensor.hpp"

namespace p3d {

struct MotionGeometry {
  std::size_t channels = 3;
  std::size_t frames = 16;
  std::size_t height = 32;
  std::size_t width = 32;
};

/// Labeled clips, each (1, C, T, H, W).
struct LabeledClips {
  std::vector<ClipTensor> clips;
  std::vector<int> labels;

  std::size_t size() const { return clips.size(); }
  int num_classes() const;
  /// Stacks the selected clips into one batch.
  ClipTensor batch(std::span<const std::size_t> indices) const;
  std::vector<int> batch_labels(std::span<const std::size_t> indices) const;
};

/// Two-class direction task. Sample 2i (class 0) is a bright square moving
/// left to right over a noisy background; sample 2i + 1 (class 1) is exactly
/// the same clip with its frames in reverse order. Start row, speed, start
/// column, colour and noise are drawn per pair, so a model that ignores frame
/// order cannot separate the classes. Throws SpecError for n_per_class < 1 or a
/// geometry too small to hold the motion.
LabeledClips make_motion_dataset(std::size_t n_per_class, const MotionGeometry& geometry,
                                 std::uint64_t seed);

/// Directory layout: labels.txt with one "<file> <label>" line per clip, plus
/// the clips as .clp files.
void save_dataset(const std::filesystem::path& dir, const LabeledClips& data);
LabeledClips load_dataset(const std::filesystem::path& dir);

}  // namespace p3d
