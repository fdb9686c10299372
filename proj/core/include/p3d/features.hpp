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
#include <optional>
#include <span>
#include <vector>

#include "p3d/clip_io.hpp"
#include "p3d/network.hpp"
#include "p3d/preprocess.hpp"

namespace p3d {

struct ExtractConfig {
  std::size_t num_clips = 20;
  SampleMode mode = SampleMode::kUniformRandom;
  std::uint64_t seed = 0;
  std::optional<Extent2> resize;  ///< applied before the crop
  std::vector<float> mean;
};

/// Brings a clip to the network's input extent: optional resize, then a
/// center crop when the frame is larger, or a plain resize when it is smaller
/// in either dimension.
ClipTensor fit_clip(const ClipTensor& clip, const ClipGeometry& input, const ExtractConfig& cfg);

/// Pool5 vector of each sampled clip, BN in inference mode.
std::vector<std::vector<float>> extract_clip_features(Network<float>& net, const ClipSource& video,
                                                      const ExtractConfig& cfg);

/// Element-wise mean (accumulated in double). Throws DataError for an empty
/// list and ShapeError for ragged input.
std::vector<float> average_features(std::span<const std::vector<float>> features);

/// Video descriptor: the mean of the per-clip pool5 vectors.
std::vector<float> extract_features(Network<float>& net, const ClipSource& video,
                                    const ExtractConfig& cfg = {});

/// u32 dimension, then little-endian float32 values.
void write_features(const std::filesystem::path& path, std::span<const float> feature);
std::vector<float> read_features(const std::filesystem::path& path);

}  // namespace p3d
