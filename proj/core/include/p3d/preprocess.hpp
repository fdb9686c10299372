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
#include <vector>

#include "p3d/clip_io.hpp"
#include "p3d/tensor.hpp"

namespace p3d {

enum class SampleMode { kNonOverlap, kUniformRandom };

struct SampleSpec {
  std::size_t clip_len = 16;
  /// Non-overlapping mode: cap on the number of tiles (0 = all of them).
  std::size_t num_clips = 0;
  SampleMode mode = SampleMode::kNonOverlap;
  std::uint64_t seed = 0;
};

/// First frame of each clip. Non-overlapping clips tile the video from frame 0;
/// random starts are uniform over [0, F - clip_len]. Throws DataError when the
/// video is shorter than one clip.
std::vector<std::size_t> clip_starts(std::size_t frames, const SampleSpec& spec);

/// Each clip is a (1, 3, clip_len, H, W) copy.
std::vector<ClipTensor> sample_clips(const ClipSource& video, const SampleSpec& spec);

enum class CropMode { kNone, kCenter, kRandom };
enum class FlipMode { kNone, kAlways, kRandom };

struct Extent2 {
  std::size_t h = 0;
  std::size_t w = 0;
};

struct PreprocessSpec {
  std::optional<Extent2> resize;  ///< bilinear, corner-aligned
  CropMode crop = CropMode::kNone;
  Extent2 crop_size{};
  FlipMode flip = FlipMode::kNone;
  std::uint64_t seed = 0;         ///< drives random crop offsets and random flips
  std::vector<float> mean;        ///< per channel; empty means zeros
};

/// Corner-aligned bilinear resize of every frame: output pixel i samples the
/// source at i * (in - 1) / (out - 1), so the corner pixels map onto each other.
ClipTensor resize_bilinear(const ClipTensor& x, Extent2 size);

/// Offsets (top, left) of a centered crop.
Extent2 center_crop_offset(Extent2 frame, Extent2 crop);

/// resize -> crop -> horizontal flip -> per-channel mean subtraction. Random
/// choices are drawn once per call and shared by every clip and frame in the
/// batch. Throws ShapeError if the crop is larger than the (resized) frame.
ClipTensor preprocess(const ClipTensor& clip, const PreprocessSpec& spec);

}  // namespace p3d
