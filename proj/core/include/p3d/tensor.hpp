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

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "p3d/error.hpp"

namespace p3d {

/// Extents of a clip tensor in NCTHW order. All extents are at least one.
struct Shape5 {
  std::size_t n = 1, c = 1, t = 1, h = 1, w = 1;

  constexpr Shape5() = default;
  /// Throws ShapeError when any extent is zero or negative.
  Shape5(std::int64_t n, std::int64_t c, std::int64_t t, std::int64_t h, std::int64_t w);

  std::size_t count() const { return n * c * t * h * w; }
  std::size_t frame_size() const { return h * w; }
  std::array<std::size_t, 5> dims() const { return {n, c, t, h, w}; }
  std::string str() const;

  friend bool operator==(const Shape5&, const Shape5&) = default;
};

/// How tensor_new populates a fresh tensor.
struct FillRule {
  enum class Kind { kZeros, kConstant, kUniform };
  Kind kind = Kind::kZeros;
  double value = 0.0;
  double lo = 0.0, hi = 1.0;
  std::uint64_t seed = 0;

  static FillRule zeros() { return {}; }
  static FillRule constant(double v) { return {Kind::kConstant, v, 0.0, 0.0, 0}; }
  static FillRule uniform(double lo, double hi, std::uint64_t seed) {
    return {Kind::kUniform, 0.0, lo, hi, seed};
  }
};

// Dense 5-D array, row-major with W fastest. Value semantics: copies are deep.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(const Shape5& shape, T fill = T(0));
  Tensor(const Shape5& shape, std::vector<T> data);

  static Tensor make(const Shape5& shape, const FillRule& rule);
  static Tensor zeros(const Shape5& shape) { return Tensor(shape); }
  static Tensor constant(const Shape5& shape, T v) { return Tensor(shape, v); }
  static Tensor uniform(const Shape5& shape, double lo, double hi, std::uint64_t seed) {
    return make(shape, FillRule::uniform(lo, hi, seed));
  }

  const Shape5& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  std::size_t offset(std::size_t n, std::size_t c, std::size_t t, std::size_t h,
                     std::size_t w) const {
    return (((n * shape_.c + c) * shape_.t + t) * shape_.h + h) * shape_.w + w;
  }
  T& operator()(std::size_t n, std::size_t c, std::size_t t, std::size_t h, std::size_t w) {
    return data_[offset(n, c, t, h, w)];
  }
  const T& operator()(std::size_t n, std::size_t c, std::size_t t, std::size_t h,
                      std::size_t w) const {
    return data_[offset(n, c, t, h, w)];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  /// Same data viewed with another shape of equal element count.
  Tensor reshaped(const Shape5& shape) const;

  void fill(T v);

  template <typename U>
  Tensor<U> cast() const {
    return Tensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

 private:
  Shape5 shape_{};
  std::vector<T> data_;
};

using ClipTensor = Tensor<float>;

/// Throws ShapeError naming `what` when the shapes differ.
void require_same_shape(const Shape5& a, const Shape5& b, const char* what);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

/// a += b in place.
template <typename T>
void add_inplace(Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);

/// Passes `upstream` where x > 0. Passing the forward output as `x` is
/// equivalent since relu(x) > 0 exactly when x > 0.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& upstream);

template <typename T>
struct Closeness {
  bool equal = false;
  double max_abs_diff = 0.0;
};

template <typename T>
Closeness<T> almost_equal(const Tensor<T>& a, const Tensor<T>& b, double tol);

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  return almost_equal(a, b, 0.0).max_abs_diff;
}

/// Copies frame range [t0, t0 + len) of every (n, c) into a new tensor.
template <typename T>
Tensor<T> slice_frames(const Tensor<T>& x, std::size_t t0, std::size_t len);

/// Reverses the temporal axis.
template <typename T>
Tensor<T> reverse_frames(const Tensor<T>& x);

/// Stacks tensors of equal (C, T, H, W) along the batch axis.
template <typename T>
Tensor<T> concat_batch(std::span<const Tensor<T>> parts);

/// Copies batch element `n` out as an N = 1 tensor.
template <typename T>
Tensor<T> batch_item(const Tensor<T>& x, std::size_t n);

}  // namespace p3d
