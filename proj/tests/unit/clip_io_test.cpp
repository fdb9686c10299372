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
#include <filesystem>
#include <fstream>
#include <string>

#include "oracles.hpp"
#include "p3d/clip_io.hpp"

namespace p3d {
namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / "p3d_clip_io_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

ClipTensor quantized_frame(std::uint64_t seed, std::size_t h, std::size_t w) {
  auto f = testing::random_tensor_f(Shape5(1, 3, 1, h, w), seed, 0.0, 1.0);
  for (auto& v : f.storage()) v = static_cast<float>(std::lround(v * 255.0f)) / 255.0f;
  return f;
}

TEST(Ppm, EightBitRoundTrip) {
  auto dir = fresh_dir("ppm8");
  auto frame = quantized_frame(1, 5, 7);
  write_ppm(dir / "f.ppm", frame);
  auto back = read_ppm(dir / "f.ppm");
  EXPECT_EQ(back.shape(), Shape5(1, 3, 1, 5, 7));
  EXPECT_LT(max_abs_diff(back, frame), 1e-7);
}

TEST(Ppm, SixteenBitAndComments) {
  auto dir = fresh_dir("ppm16");
  std::string header = "P6\n# comment\n2 1\n65535\n";
  std::string px;
  for (unsigned v : {0u, 65535u, 32768u, 1u, 256u, 65535u}) {
    px.push_back(static_cast<char>(v >> 8));
    px.push_back(static_cast<char>(v & 0xff));
  }
  write_bytes(dir / "a.ppm", header + px);
  auto f = read_ppm(dir / "a.ppm");
  ASSERT_EQ(f.shape(), Shape5(1, 3, 1, 1, 2));
  EXPECT_FLOAT_EQ(f(0, 0, 0, 0, 0), 0.0f);
  EXPECT_FLOAT_EQ(f(0, 1, 0, 0, 0), 1.0f);
  EXPECT_FLOAT_EQ(f(0, 2, 0, 0, 0), 32768.0f / 65535.0f);
  EXPECT_FLOAT_EQ(f(0, 0, 0, 0, 1), 1.0f / 65535.0f);
}

TEST(Ppm, MalformedInputIsFormatError) {
  auto dir = fresh_dir("ppmbad");
  write_bytes(dir / "magic.ppm", "P5\n1 1\n255\nx");
  EXPECT_THROW(read_ppm(dir / "magic.ppm"), FormatError);
  write_bytes(dir / "short.ppm", "P6\n2 2\n255\nabc");
  EXPECT_THROW(read_ppm(dir / "short.ppm"), FormatError);
  write_bytes(dir / "maxval.ppm", "P6\n1 1\n0\nabc");
  EXPECT_THROW(read_ppm(dir / "maxval.ppm"), FormatError);
}

TEST(Clp, RoundTripIsBitwise) {
  auto dir = fresh_dir("clp");
  auto t = testing::random_tensor_f(Shape5(2, 3, 4, 5, 6), 2);
  write_clp(dir / "t.clp", t);
  auto back = read_clp(dir / "t.clp");
  EXPECT_EQ(back.shape(), t.shape());
  EXPECT_EQ(back.storage(), t.storage());
  std::ifstream in(dir / "t.clp", std::ios::binary);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "2 3 4 5 6");
  EXPECT_EQ(fs::file_size(dir / "t.clp"), header.size() + 1 + t.size() * 4);
}

TEST(Clp, TruncatedPayloadIsFormatError) {
  auto dir = fresh_dir("clpbad");
  write_bytes(dir / "t.clp", std::string("1 1 1 1 2\n") + std::string(5, '\0'));
  EXPECT_THROW(read_clp(dir / "t.clp"), FormatError);
}

TEST(FrameDir, OrderedByFilenameWithFps) {
  auto dir = fresh_dir("frames");
  std::vector<ClipTensor> frames;
  for (int i = 0; i < 3; ++i) frames.push_back(quantized_frame(10 + i, 4, 6));
  // Written out of order on purpose; reading must sort by name.
  write_ppm(dir / "b.ppm", frames[1]);
  write_ppm(dir / "c.ppm", frames[2]);
  write_ppm(dir / "a.ppm", frames[0]);
  write_bytes(dir / "fps", "25\n");
  write_bytes(dir / "notes.txt", "ignored");
  auto video = read_frame_dir(dir);
  EXPECT_EQ(video.frame_count(), 3u);
  ASSERT_TRUE(video.fps.has_value());
  EXPECT_EQ(*video.fps, 25.0);
  for (std::size_t t = 0; t < 3; ++t)
    EXPECT_LT(max_abs_diff(testing::frame_at(video.frames, t), frames[t]), 1e-7);
}

TEST(FrameDir, WriteThenLoad) {
  auto dir = fresh_dir("video");
  ClipSource src;
  src.frames = ClipTensor(Shape5(1, 3, 2, 6, 4));
  for (std::size_t t = 0; t < 2; ++t) {
    auto f = quantized_frame(20 + t, 6, 4);
    for (std::size_t c = 0; c < 3; ++c)
      std::copy_n(&f(0, c, 0, 0, 0), 24, &src.frames(0, c, t, 0, 0));
  }
  write_frame_dir(dir, src);
  EXPECT_TRUE(fs::exists(dir / "frame_000000.ppm"));
  EXPECT_TRUE(fs::exists(dir / "frame_000001.ppm"));
  auto back = load_video(dir);
  EXPECT_LT(max_abs_diff(back.frames, src.frames), 1e-7);
  EXPECT_FALSE(back.fps.has_value());
}

TEST(FrameDir, MismatchedSizesAndEmptyDirs) {
  auto dir = fresh_dir("ragged");
  write_ppm(dir / "a.ppm", quantized_frame(1, 4, 4));
  write_ppm(dir / "b.ppm", quantized_frame(2, 4, 5));
  EXPECT_THROW(read_frame_dir(dir), DataError);
  EXPECT_THROW(read_frame_dir(fresh_dir("empty")), DataError);
  EXPECT_THROW(load_video(dir / "missing"), DataError);
}

TEST(LoadVideo, ClpFile) {
  auto dir = fresh_dir("clpvideo");
  auto t = testing::random_tensor_f(Shape5(1, 3, 5, 4, 4), 3, 0.0, 1.0);
  write_clp(dir / "v.clp", t);
  auto v = load_video(dir / "v.clp");
  EXPECT_EQ(v.frames.storage(), t.storage());
  write_clp(dir / "two.clp", testing::random_tensor_f(Shape5(2, 3, 5, 4, 4), 4));
  EXPECT_THROW(load_video(dir / "two.clp"), DataError);
}

}  // namespace
}  // namespace p3d
