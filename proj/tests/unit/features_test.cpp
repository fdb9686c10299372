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

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "p3d/features.hpp"

namespace p3d {
namespace {

ArchSpec tiny() {
  auto s = ArchSpec::reduced(50, BlockPolicy::kMixed, 4);
  s.stem_channels = 4;
  s.mid_channels = {2, 4, 4, 8};
  s.input = {8, 16, 16};
  return s;
}

ClipSource repeat_clip(const ClipTensor& clip, std::size_t times) {
  std::vector<ClipTensor> parts(times, clip);
  const Shape5& s = clip.shape();
  ClipSource v;
  v.frames = ClipTensor(Shape5(1, s.c, s.t * times, s.h, s.w));
  for (std::size_t k = 0; k < times; ++k)
    for (std::size_t c = 0; c < s.c; ++c)
      std::copy_n(&clip(0, c, 0, 0, 0), s.t * s.frame_size(), &v.frames(0, c, k * s.t, 0, 0));
  return v;
}

TEST(FitClip, CropsLargerAndResizesSmallerFrames) {
  ClipGeometry g{4, 8, 8};
  ExtractConfig cfg;
  auto big = testing::random_tensor_f(Shape5(1, 3, 4, 12, 10), 1);
  auto cropped = fit_clip(big, g, cfg);
  ASSERT_EQ(cropped.shape(), Shape5(1, 3, 4, 8, 8));
  EXPECT_EQ(cropped(0, 1, 2, 0, 0), big(0, 1, 2, 2, 1));
  auto small = testing::random_tensor_f(Shape5(1, 3, 4, 5, 9), 2);
  EXPECT_EQ(fit_clip(small, g, cfg).shape(), Shape5(1, 3, 4, 8, 8));
  auto exact = testing::random_tensor_f(Shape5(1, 3, 4, 8, 8), 3);
  EXPECT_EQ(fit_clip(exact, g, cfg).storage(), exact.storage());
}

TEST(AverageFeatures, OrderFreeAndValidated) {
  std::mt19937 gen(4);
  std::uniform_real_distribution<float> u(-3.0f, 3.0f);
  std::vector<std::vector<float>> f(20, std::vector<float>(64));
  for (auto& row : f)
    for (auto& v : row) v = u(gen);
  auto mean = average_features(f);
  for (int trial = 0; trial < 5; ++trial) {
    auto g = f;
    std::shuffle(g.begin(), g.end(), gen);
    auto m = average_features(g);
    for (std::size_t i = 0; i < m.size(); ++i) EXPECT_NEAR(m[i], mean[i], 1e-6);
  }
  for (std::size_t i = 0; i < 64; ++i) {
    double s = 0.0;
    for (auto& row : f) s += row[i];
    EXPECT_NEAR(mean[i], s / 20.0, 1e-6);
  }
  EXPECT_THROW(average_features({}), DataError);
  f[3].pop_back();
  EXPECT_THROW(average_features(f), ShapeError);
}

TEST(ExtractFeatures, IdenticalClipsGiveTheSingleClipFeature) {
  auto net = build_network<float>(tiny(), {1, false});
  auto clip = testing::random_tensor_f(Shape5(1, 3, 8, 16, 16), 5, 0.0, 1.0);
  auto video = repeat_clip(clip, 4);
  ExtractConfig cfg;
  cfg.num_clips = 6;
  cfg.mode = SampleMode::kNonOverlap;
  auto per_clip = extract_clip_features(net, video, cfg);
  ASSERT_EQ(per_clip.size(), 4u);
  net.set_bn_mode(BnMode::kInference);
  auto single = net.pool5(clip);
  auto feature = extract_features(net, video, cfg);
  ASSERT_EQ(feature.size(), 32u);
  for (std::size_t i = 0; i < feature.size(); ++i) EXPECT_NEAR(feature[i], single[i], 1e-6);
}

TEST(ExtractFeatures, RandomModeDrawsRequestedClips) {
  auto net = build_network<float>(tiny(), {2, false});
  ClipSource video;
  video.frames = testing::random_tensor_f(Shape5(1, 3, 20, 16, 16), 6, 0.0, 1.0);
  ExtractConfig cfg;
  cfg.num_clips = 5;
  cfg.seed = 3;
  EXPECT_EQ(extract_clip_features(net, video, cfg).size(), 5u);
  auto a = extract_features(net, video, cfg);
  auto b = extract_features(net, video, cfg);
  EXPECT_EQ(a, b);
  ClipSource short_video;
  short_video.frames = testing::random_tensor_f(Shape5(1, 3, 7, 16, 16), 7);
  EXPECT_THROW(extract_features(net, short_video, cfg), DataError);
}

TEST(FeatureFile, RoundTripAndLayout) {
  auto path = std::filesystem::temp_directory_path() / "p3d_features_test.bin";
  std::vector<float> f{1.5f, -2.25f, 0.0f, 3.0e-8f};
  write_features(path, f);
  EXPECT_EQ(read_features(path), f);
  EXPECT_EQ(std::filesystem::file_size(path), 4u + 4u * f.size());
  std::ifstream in(path, std::ios::binary);
  unsigned char header[8];
  in.read(reinterpret_cast<char*>(header), 8);
  EXPECT_EQ(header[0] | header[1] << 8 | header[2] << 16 | header[3] << 24, 4);
  float first;
  std::memcpy(&first, header + 4, 4);
  EXPECT_EQ(first, 1.5f);
  {
    std::ofstream bad(path, std::ios::binary);
    bad.write("\x09\x00\x00\x00", 4);
  }
  EXPECT_THROW(read_features(path), FormatError);
}

}  // namespace
}  // namespace p3d
