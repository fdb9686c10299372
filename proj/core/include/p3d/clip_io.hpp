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

#include <filesystem>
#include <optional>

#include "p3d/tensor.hpp"

namespace p3d {

/// Decoded video: frames stacked as one (1, 3, F, H, W) tensor with values in [0, 1].
struct ClipSource {
  ClipTensor frames;
  std::optional<double> fps;

  std::size_t frame_count() const { return frames.shape().t; }
  std::size_t height() const { return frames.shape().h; }
  std::size_t width() const { return frames.shape().w; }
};

/// Binary PPM (P6). Samples are divided by maxval; both 8- and 16-bit
/// (big-endian) payloads are accepted. Returns a (1, 3, 1, H, W) tensor.
ClipTensor read_ppm(const std::filesystem::path& path);
/// Writes an (1, 3, 1, H, W) frame at 8 bits, clamping to [0, 1].
void write_ppm(const std::filesystem::path& path, const ClipTensor& frame);

/// Raw tensor file: ASCII header "N C T H W\n" then little-endian float32 data.
ClipTensor read_clp(const std::filesystem::path& path);
void write_clp(const std::filesystem::path& path, const ClipTensor& tensor);

/// Every *.ppm in `dir`, ordered by filename. An optional file named "fps"
/// holds the frame rate as text.
ClipSource read_frame_dir(const std::filesystem::path& dir);
void write_frame_dir(const std::filesystem::path& dir, const ClipSource& video);

/// A frame directory, or a .clp file whose batch dimension is 1.
ClipSource load_video(const std::filesystem::path& path);

}  // namespace p3d
