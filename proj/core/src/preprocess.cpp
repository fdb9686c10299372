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
#include "p3d/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "p3d/error.hpp"
#include "p3d/rng.hpp"

namespace p3d {

std::vector<std::size_t> clip_starts(std::size_t frames, const SampleSpec& spec) {
  if (spec.clip_len == 0) throw SpecError("clip length must be positive");
  if (frames < spec.clip_len)
    throw DataError("video has " + std::to_string(frames) + " frames, fewer than one clip of " +
                    std::to_string(spec.clip_len));
  std::vector<std::size_t> starts;
  if (spec.mode == SampleMode::kNonOverlap) {
    const std::size_t tiles = frames / spec.clip_len;
    const std::size_t n = spec.num_clips == 0 ? tiles : std::min(tiles, spec.num_clips);
    for (std::size_t i = 0; i < n; ++i) starts.push_back(i * spec.clip_len);
  } else {
    if (spec.num_clips == 0) throw SpecError("random sampling needs num_clips >= 1");
    Rng rng(spec.seed);
    const std::uint64_t choices = frames - spec.clip_len + 1;
    for (std::size_t i = 0; i < spec.num_clips; ++i) starts.push_back(rng.below(choices));
  }
  return starts;
}

std::vector<ClipTensor> sample_clips(const ClipSource& video, const SampleSpec& spec) {
  std::vector<ClipTensor> clips;
  for (std::size_t s : clip_starts(video.frame_count(), spec))
    clips.push_back(slice_frames(video.frames, s, spec.clip_len));
  return clips;
}

ClipTensor resize_bilinear(const ClipTensor& x, Extent2 size) {
  const Shape5& s = x.shape();
  if (size.h == 0 || size.w == 0) throw ShapeError("resize target must be positive");
  if (size.h == s.h && size.w == s.w) return x;

  struct Tap {
    std::size_t i0, i1;
    float f;
  };
  auto taps = [](std::size_t in, std::size_t out) {
    std::vector<Tap> t(out);
    for (std::size_t o = 0; o < out; ++o) {
      const double src = out == 1 ? 0.0 : static_cast<double>(o) * (in - 1) / (out - 1);
      const std::size_t i0 = std::min(static_cast<std::size_t>(src), in - 1);
      t[o] = {i0, std::min(i0 + 1, in - 1), static_cast<float>(src - i0)};
    }
    return t;
  };
  const std::vector<Tap> ty = taps(s.h, size.h), tx = taps(s.w, size.w);

  ClipTensor y(Shape5(s.n, s.c, s.t, size.h, size.w));
  const std::size_t planes = s.n * s.c * s.t;
  for (std::size_t p = 0; p < planes; ++p) {
    const float* src = x.data() + p * s.h * s.w;
    float* dst = y.data() + p * size.h * size.w;
    for (std::size_t oy = 0; oy < size.h; ++oy) {
      const Tap& a = ty[oy];
      const float* r0 = src + a.i0 * s.w;
      const float* r1 = src + a.i1 * s.w;
      for (std::size_t ox = 0; ox < size.w; ++ox) {
        const Tap& b = tx[ox];
        const float top = r0[b.i0] + (r0[b.i1] - r0[b.i0]) * b.f;
        const float bot = r1[b.i0] + (r1[b.i1] - r1[b.i0]) * b.f;
        dst[oy * size.w + ox] = top + (bot - top) * a.f;
      }
    }
  }
  return y;
}

Extent2 center_crop_offset(Extent2 frame, Extent2 crop) {
  if (crop.h > frame.h || crop.w > frame.w)
    throw ShapeError("crop " + std::to_string(crop.h) + "x" + std::to_string(crop.w) +
                     " exceeds frame " + std::to_string(frame.h) + "x" + std::to_string(frame.w));
  return {(frame.h - crop.h) / 2, (frame.w - crop.w) / 2};
}

ClipTensor preprocess(const ClipTensor& clip, const PreprocessSpec& spec) {
  ClipTensor x = spec.resize ? resize_bilinear(clip, *spec.resize) : clip;
  const Shape5 s = x.shape();
  Rng rng(spec.seed);

  if (spec.crop != CropMode::kNone) {
    const Extent2 frame{s.h, s.w};
    Extent2 off = center_crop_offset(frame, spec.crop_size);
    if (spec.crop == CropMode::kRandom) {
      off.h = rng.below(frame.h - spec.crop_size.h + 1);
      off.w = rng.below(frame.w - spec.crop_size.w + 1);
    }
    ClipTensor c(Shape5(s.n, s.c, s.t, spec.crop_size.h, spec.crop_size.w));
    const std::size_t planes = s.n * s.c * s.t;
    for (std::size_t p = 0; p < planes; ++p)
      for (std::size_t r = 0; r < spec.crop_size.h; ++r)
        std::copy_n(x.data() + p * s.h * s.w + (off.h + r) * s.w + off.w, spec.crop_size.w,
                    c.data() + (p * spec.crop_size.h + r) * spec.crop_size.w);
    x = std::move(c);
  }

  const bool flip = spec.flip == FlipMode::kAlways ||
                    (spec.flip == FlipMode::kRandom && rng.next_unit() < 0.5);
  const Shape5 o = x.shape();
  if (flip) {
    for (std::size_t row = 0; row < o.n * o.c * o.t * o.h; ++row) {
      float* line = x.data() + row * o.w;
      std::reverse(line, line + o.w);
    }
  }

  if (!spec.mean.empty()) {
    if (spec.mean.size() != o.c)
      throw SpecError("mean has " + std::to_string(spec.mean.size()) + " entries for " +
                      std::to_string(o.c) + " channels");
    const std::size_t vol = o.t * o.h * o.w;
    for (std::size_t n = 0; n < o.n; ++n)
      for (std::size_t c = 0; c < o.c; ++c) {
        float* p = x.data() + (n * o.c + c) * vol;
        for (std::size_t i = 0; i < vol; ++i) p[i] -= spec.mean[c];
      }
  }
  return x;
}

}  // namespace p3d
