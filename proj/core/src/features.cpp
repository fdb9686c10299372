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
#include "p3d/features.hpp"

#include <bit>
#include <fstream>
#include <iterator>

#include "p3d/error.hpp"

namespace p3d {

ClipTensor fit_clip(const ClipTensor& clip, const ClipGeometry& input, const ExtractConfig& cfg) {
  PreprocessSpec pre;
  pre.resize = cfg.resize;
  pre.mean = cfg.mean;
  Extent2 frame{clip.shape().h, clip.shape().w};
  if (cfg.resize) frame = *cfg.resize;
  const Extent2 target{static_cast<std::size_t>(input.height), static_cast<std::size_t>(input.width)};
  if (frame.h < target.h || frame.w < target.w) {
    pre.resize = target;
  } else if (frame.h != target.h || frame.w != target.w) {
    pre.crop = CropMode::kCenter;
    pre.crop_size = target;
  }
  return preprocess(clip, pre);
}

std::vector<std::vector<float>> extract_clip_features(Network<float>& net, const ClipSource& video,
                                                      const ExtractConfig& cfg) {
  const ClipGeometry& input = net.spec().input;
  SampleSpec sampling;
  sampling.clip_len = static_cast<std::size_t>(input.frames);
  sampling.num_clips = cfg.num_clips;
  sampling.mode = cfg.mode;
  sampling.seed = cfg.seed;
  const std::vector<std::size_t> starts = clip_starts(video.frame_count(), sampling);

  net.set_bn_mode(BnMode::kInference);
  std::vector<std::vector<float>> out;
  out.reserve(starts.size());
  for (std::size_t s : starts) {
    const ClipTensor clip = fit_clip(slice_frames(video.frames, s, sampling.clip_len), input, cfg);
    const Tensor<float> f = net.pool5(clip);
    out.emplace_back(f.storage());
  }
  return out;
}

std::vector<float> average_features(std::span<const std::vector<float>> features) {
  if (features.empty()) throw DataError("no clip features to average");
  std::vector<double> acc(features[0].size(), 0.0);
  for (const auto& f : features) {
    if (f.size() != acc.size()) throw ShapeError("clip features differ in length");
    for (std::size_t i = 0; i < f.size(); ++i) acc[i] += f[i];
  }
  std::vector<float> mean(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i)
    mean[i] = static_cast<float>(acc[i] / static_cast<double>(features.size()));
  return mean;
}

std::vector<float> extract_features(Network<float>& net, const ClipSource& video,
                                    const ExtractConfig& cfg) {
  return average_features(extract_clip_features(net, video, cfg));
}

void write_features(const std::filesystem::path& path, std::span<const float> feature) {
  std::vector<unsigned char> bytes;
  bytes.reserve(4 + feature.size() * 4);
  auto put = [&](std::uint32_t u) {
    for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<unsigned char>(u >> (8 * b)));
  };
  put(static_cast<std::uint32_t>(feature.size()));
  for (float v : feature) put(std::bit_cast<std::uint32_t>(v));
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("cannot write '" + path.string() + "'");
}

std::vector<float> read_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  const std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in),
                                         std::istreambuf_iterator<char>()};
  auto get = [&](std::size_t at) {
    std::uint32_t u = 0;
    for (int b = 3; b >= 0; --b) u = (u << 8) | bytes[at + b];
    return u;
  };
  if (bytes.size() < 4) throw FormatError(path.string() + ": missing dimension field");
  const std::uint32_t dim = get(0);
  if (bytes.size() != 4 + std::size_t{dim} * 4)
    throw FormatError(path.string() + ": size does not match dimension " + std::to_string(dim));
  std::vector<float> out(dim);
  for (std::uint32_t i = 0; i < dim; ++i) out[i] = std::bit_cast<float>(get(4 + i * 4));
  return out;
}

}  // namespace p3d
