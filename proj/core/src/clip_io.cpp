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
#include "p3d/clip_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <vector>

#include "p3d/error.hpp"

namespace p3d {

namespace fs = std::filesystem;

namespace {

std::vector<unsigned char> slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spill(const fs::path& path, const std::string& header, const void* data, std::size_t bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
  if (!out) throw DataError("short write to '" + path.string() + "'");
}

// Reads the whitespace/comment separated integer fields of a PPM header.
class HeaderScanner {
 public:
  HeaderScanner(const std::vector<unsigned char>& bytes, const fs::path& path)
      : bytes_(bytes), path_(path) {}

  long next_int() {
    skip_space_and_comments();
    long v = 0;
    std::size_t digits = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_++] - '0');
      if (v > 1'000'000) fail("header value too large");
      ++digits;
    }
    if (digits == 0) fail("malformed header");
    return v;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_start() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) fail("malformed header");
    return pos_ + 1;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError(path_.string() + ": " + what);
  }

  std::size_t pos_ = 0;

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<unsigned char>& bytes_;
  const fs::path& path_;
};

}  // namespace

ClipTensor read_ppm(const fs::path& path) {
  const std::vector<unsigned char> bytes = slurp(path);
  HeaderScanner scan(bytes, path);
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') scan.fail("not a binary PPM (P6)");
  scan.pos_ = 2;
  const long w = scan.next_int();
  const long h = scan.next_int();
  const long maxval = scan.next_int();
  if (w < 1 || h < 1) scan.fail("empty image");
  if (maxval < 1 || maxval > 65535) scan.fail("maxval out of range");
  const std::size_t start = scan.raster_start();
  const std::size_t sample_bytes = maxval > 255 ? 2 : 1;
  const std::size_t pixels = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (bytes.size() - start < pixels * 3 * sample_bytes) scan.fail("truncated raster");

  ClipTensor frame(Shape5(1, 3, 1, h, w));
  const float inv = 1.0f / static_cast<float>(maxval);
  for (std::size_t p = 0; p < pixels; ++p) {
    for (std::size_t c = 0; c < 3; ++c) {
      const std::size_t at = start + (p * 3 + c) * sample_bytes;
      const unsigned v = sample_bytes == 2 ? (bytes[at] << 8) | bytes[at + 1] : bytes[at];
      if (v > static_cast<unsigned>(maxval)) scan.fail("sample exceeds maxval");
      frame[c * pixels + p] = static_cast<float>(v) * inv;
    }
  }
  return frame;
}

void write_ppm(const fs::path& path, const ClipTensor& frame) {
  const Shape5& s = frame.shape();
  if (s.n != 1 || s.c != 3 || s.t != 1) throw ShapeError("write_ppm expects (1,3,1,H,W), got " + s.str());
  const std::size_t pixels = s.h * s.w;
  std::vector<unsigned char> raster(pixels * 3);
  for (std::size_t p = 0; p < pixels; ++p)
    for (std::size_t c = 0; c < 3; ++c) {
      const float v = std::clamp(frame[c * pixels + p], 0.0f, 1.0f);
      raster[p * 3 + c] = static_cast<unsigned char>(std::lround(v * 255.0f));
    }
  spill(path, "P6\n" + std::to_string(s.w) + " " + std::to_string(s.h) + "\n255\n", raster.data(),
        raster.size());
}

ClipTensor read_clp(const fs::path& path) {
  const std::vector<unsigned char> bytes = slurp(path);
  const auto nl = std::find(bytes.begin(), bytes.end(), '\n');
  if (nl == bytes.end()) throw FormatError(path.string() + ": missing header line");
  std::istringstream header(std::string(bytes.begin(), nl));
  std::int64_t d[5];
  for (auto& v : d)
    if (!(header >> v)) throw FormatError(path.string() + ": header must be 'N C T H W'");
  std::string extra;
  if (header >> extra) throw FormatError(path.string() + ": trailing header fields");
  Shape5 shape;
  try {
    shape = Shape5(d[0], d[1], d[2], d[3], d[4]);
  } catch (const ShapeError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  const std::size_t start = static_cast<std::size_t>(nl - bytes.begin()) + 1;
  if (bytes.size() - start != shape.count() * 4)
    throw FormatError(path.string() + ": payload size does not match header " + shape.str());
  std::vector<float> data(shape.count());
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::uint32_t u = 0;
    for (int b = 3; b >= 0; --b) u = (u << 8) | bytes[start + i * 4 + b];
    data[i] = std::bit_cast<float>(u);
  }
  return ClipTensor(shape, std::move(data));
}

void write_clp(const fs::path& path, const ClipTensor& tensor) {
  const Shape5& s = tensor.shape();
  std::vector<unsigned char> payload(tensor.size() * 4);
  for (std::size_t i = 0; i < tensor.size(); ++i) {
    const std::uint32_t u = std::bit_cast<std::uint32_t>(tensor[i]);
    for (int b = 0; b < 4; ++b) payload[i * 4 + b] = static_cast<unsigned char>(u >> (8 * b));
  }
  std::ostringstream header;
  header << s.n << ' ' << s.c << ' ' << s.t << ' ' << s.h << ' ' << s.w << '\n';
  spill(path, header.str(), payload.data(), payload.size());
}

ClipSource read_frame_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("'" + dir.string() + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".ppm") files.push_back(entry.path());
  if (files.empty()) throw DataError("no .ppm frames in '" + dir.string() + "'");
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });

  std::vector<ClipTensor> frames;
  frames.reserve(files.size());
  for (const auto& f : files) {
    frames.push_back(read_ppm(f));
    if (!(frames.back().shape() == frames.front().shape()))
      throw DataError(f.string() + ": frame size " + frames.back().shape().str() +
                      " differs from " + frames.front().shape().str());
  }
  const std::size_t h = frames[0].shape().h, w = frames[0].shape().w, plane = h * w;
  ClipSource video;
  video.frames = ClipTensor(Shape5(1, 3, static_cast<std::int64_t>(frames.size()), h, w));
  for (std::size_t t = 0; t < frames.size(); ++t)
    for (std::size_t c = 0; c < 3; ++c)
      std::copy_n(frames[t].data() + c * plane, plane, video.frames.data() + (c * frames.size() + t) * plane);

  const fs::path fps_file = dir / "fps";
  if (fs::exists(fps_file)) {
    std::ifstream in(fps_file);
    double fps = 0;
    if (!(in >> fps) || !(fps > 0)) throw FormatError(fps_file.string() + ": expected a positive number");
    video.fps = fps;
  }
  return video;
}

void write_frame_dir(const fs::path& dir, const ClipSource& video) {
  fs::create_directories(dir);
  const Shape5& s = video.frames.shape();
  if (s.n != 1 || s.c != 3) throw ShapeError("video frames must be (1,3,F,H,W), got " + s.str());
  for (std::size_t t = 0; t < s.t; ++t) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%06zu.ppm", t);
    write_ppm(dir / name, slice_frames(video.frames, t, 1));
  }
  if (video.fps) {
    std::ofstream out(dir / "fps");
    out << *video.fps << '\n';
  }
}

ClipSource load_video(const fs::path& path) {
  if (fs::is_directory(path)) return read_frame_dir(path);
  ClipSource video;
  video.frames = read_clp(path);
  if (video.frames.shape().n != 1 || video.frames.shape().c != 3)
    throw DataError(path.string() + ": a video tensor must be (1,3,F,H,W), got " +
                    video.frames.shape().str());
  return video;
}

}  // namespace p3d
