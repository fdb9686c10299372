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
#include "p3d/motion_dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "p3d/clip_io.hpp"
#include "p3d/error.hpp"
#include "p3d/rng.hpp"

namespace p3d {

int LabeledClips::num_classes() const {
  return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
}

ClipTensor LabeledClips::batch(std::span<const std::size_t> indices) const {
  std::vector<ClipTensor> parts;
  parts.reserve(indices.size());
  for (std::size_t i : indices) parts.push_back(clips.at(i));
  return concat_batch<float>(parts);
}

std::vector<int> LabeledClips::batch_labels(std::span<const std::size_t> indices) const {
  std::vector<int> out;
  for (std::size_t i : indices) out.push_back(labels.at(i));
  return out;
}

namespace {

// Length of [a, b) intersected with [j, j + 1).
double overlap(double a, double b, double j) {
  return std::max(0.0, std::min(b, j + 1.0) - std::max(a, j));
}

}  // namespace

LabeledClips make_motion_dataset(std::size_t n_per_class, const MotionGeometry& g,
                                 std::uint64_t seed) {
  if (n_per_class < 1) throw SpecError("motion dataset needs at least one clip per class");
  const std::size_t side = std::max<std::size_t>(2, g.height / 8);
  if (g.frames < 2 || g.channels < 1 || g.height < side || g.width < side + g.frames)
    throw SpecError("motion geometry too small");

  // Widest speed that keeps the square inside the frame for every frame.
  const double max_speed = static_cast<double>(g.width - side) / (g.frames - 1);
  const double min_speed = std::min(0.5, max_speed);

  LabeledClips out;
  Rng rng(seed);
  const Shape5 shape(1, g.channels, g.frames, g.height, g.width);
  for (std::size_t i = 0; i < n_per_class; ++i) {
    const std::size_t row = rng.below(g.height - side + 1);
    const double speed = rng.uniform(min_speed, max_speed);
    const double x0 = rng.uniform(0.0, (g.width - side) - speed * (g.frames - 1));
    const double noise = rng.uniform(0.02, 0.08);
    std::vector<double> colour(g.channels);
    for (auto& c : colour) c = rng.uniform(0.6, 1.0);

    ClipTensor clip(shape);
    for (std::size_t t = 0; t < g.frames; ++t) {
      const double left = x0 + speed * t;
      for (std::size_t c = 0; c < g.channels; ++c)
        for (std::size_t h = 0; h < g.height; ++h)
          for (std::size_t w = 0; w < g.width; ++w) {
            double v = 0.1 + noise * rng.normal();
            if (h >= row && h < row + side)
              v += colour[c] * overlap(left, left + side, static_cast<double>(w));
            clip(0, c, t, h, w) = static_cast<float>(v);
          }
    }
    ClipTensor reversed = reverse_frames(clip);
    out.clips.push_back(std::move(clip));
    out.labels.push_back(0);
    out.clips.push_back(std::move(reversed));
    out.labels.push_back(1);
  }
  return out;
}

void save_dataset(const std::filesystem::path& dir, const LabeledClips& data) {
  std::filesystem::create_directories(dir);
  std::ofstream labels(dir / "labels.txt");
  if (!labels) throw DataError("cannot write '" + (dir / "labels.txt").string() + "'");
  for (std::size_t i = 0; i < data.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "clip_%05zu.clp", i);
    write_clp(dir / name, data.clips[i]);
    labels << name << ' ' << data.labels[i] << '\n';
  }
}

LabeledClips load_dataset(const std::filesystem::path& dir) {
  const auto list = dir / "labels.txt";
  std::ifstream in(list);
  if (!in) throw DataError("cannot open '" + list.string() + "'");
  LabeledClips data;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string file;
    int label = -1;
    if (!(fields >> file >> label) || label < 0)
      throw FormatError(list.string() + ":" + std::to_string(lineno) + ": expected '<file> <label>'");
    data.clips.push_back(read_clp(dir / file));
    if (!(data.clips.back().shape() == data.clips.front().shape()))
      throw DataError(file + ": clip shape " + data.clips.back().shape().str() + " differs from " +
                      data.clips.front().shape().str());
    data.labels.push_back(label);
  }
  if (data.clips.empty()) throw DataError("dataset '" + dir.string() + "' is empty");
  return data;
}

}  // namespace p3d
