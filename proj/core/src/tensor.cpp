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
#include "p3d/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "p3d/rng.hpp"

namespace p3d {

Shape5::Shape5(std::int64_t n_, std::int64_t c_, std::int64_t t_, std::int64_t h_,
               std::int64_t w_) {
  if (n_ < 1 || c_ < 1 || t_ < 1 || h_ < 1 || w_ < 1) {
    std::ostringstream os;
    os << "non-positive extent in shape (" << n_ << "," << c_ << "," << t_ << "," << h_ << ","
       << w_ << ")";
    throw ShapeError(os.str());
  }
  n = static_cast<std::size_t>(n_);
  c = static_cast<std::size_t>(c_);
  t = static_cast<std::size_t>(t_);
  h = static_cast<std::size_t>(h_);
  w = static_cast<std::size_t>(w_);
}

std::string Shape5::str() const {
  std::ostringstream os;
  os << "(" << n << "," << c << "," << t << "," << h << "," << w << ")";
  return os.str();
}

void require_same_shape(const Shape5& a, const Shape5& b, const char* what) {
  if (!(a == b)) {
    throw ShapeError(std::string(what) + ": shape mismatch " + a.str() + " vs " + b.str());
  }
}

template <typename T>
Tensor<T>::Tensor(const Shape5& shape, T fill) : shape_(shape), data_(shape.count(), fill) {}

template <typename T>
Tensor<T>::Tensor(const Shape5& shape, std::vector<T> data)
    : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.count()) {
    throw ShapeError("data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_.str());
  }
}

template <typename T>
Tensor<T> Tensor<T>::make(const Shape5& shape, const FillRule& rule) {
  switch (rule.kind) {
    case FillRule::Kind::kZeros:
      return Tensor(shape);
    case FillRule::Kind::kConstant:
      return Tensor(shape, static_cast<T>(rule.value));
    case FillRule::Kind::kUniform: {
      Tensor out(shape);
      Rng rng(rule.seed);
      for (auto& v : out.data_) v = static_cast<T>(rng.uniform(rule.lo, rule.hi));
      return out;
    }
  }
  return Tensor(shape);
}

template <typename T>
Tensor<T> Tensor<T>::reshaped(const Shape5& shape) const {
  if (shape.count() != shape_.count()) {
    throw ShapeError("cannot reshape " + shape_.str() + " to " + shape.str());
  }
  return Tensor(shape, data_);
}

template <typename T>
void Tensor<T>::fill(T v) {
  std::fill(data_.begin(), data_.end(), v);
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  Tensor<T> out = a;
  add_inplace(out, b);
  return out;
}

template <typename T>
void add_inplace(Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  T* pa = a.data();
  const T* pb = b.data();
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) pa[i] += pb[i];
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  Tensor<T> out = a;
  for (auto& v : out.storage()) v *= factor;
  return out;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> out = x;
  for (auto& v : out.storage()) v = v > T(0) ? v : T(0);
  return out;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& upstream) {
  require_same_shape(x.shape(), upstream.shape(), "relu_backward");
  Tensor<T> out(x.shape());
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > T(0) ? upstream[i] : T(0);
  return out;
}

template <typename T>
Closeness<T> almost_equal(const Tensor<T>& a, const Tensor<T>& b, double tol) {
  require_same_shape(a.shape(), b.shape(), "almost_equal");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
    if (!(d <= worst)) worst = d;  // propagates NaN
  }
  return {worst <= tol, worst};
}

template <typename T>
Tensor<T> slice_frames(const Tensor<T>& x, std::size_t t0, std::size_t len) {
  const Shape5& s = x.shape();
  if (len == 0 || t0 + len > s.t) {
    throw ShapeError("frame slice [" + std::to_string(t0) + ", " + std::to_string(t0 + len) +
                     ") outside " + s.str());
  }
  Shape5 os = s;
  os.t = len;
  Tensor<T> out(os);
  const std::size_t plane = s.frame_size();
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      std::copy_n(&x(n, c, t0, 0, 0), len * plane, &out(n, c, 0, 0, 0));
  return out;
}

template <typename T>
Tensor<T> reverse_frames(const Tensor<T>& x) {
  const Shape5& s = x.shape();
  Tensor<T> out(s);
  const std::size_t plane = s.frame_size();
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t t = 0; t < s.t; ++t)
        std::copy_n(&x(n, c, t, 0, 0), plane, &out(n, c, s.t - 1 - t, 0, 0));
  return out;
}

template <typename T>
Tensor<T> concat_batch(std::span<const Tensor<T>> parts) {
  if (parts.empty()) throw ShapeError("concat_batch: no tensors");
  Shape5 s = parts[0].shape();
  std::size_t total = 0;
  for (const auto& p : parts) {
    Shape5 ps = p.shape();
    if (ps.c != s.c || ps.t != s.t || ps.h != s.h || ps.w != s.w) {
      throw ShapeError("concat_batch: " + ps.str() + " vs " + s.str());
    }
    total += ps.n;
  }
  s.n = total;
  std::vector<T> data;
  data.reserve(s.count());
  for (const auto& p : parts) data.insert(data.end(), p.storage().begin(), p.storage().end());
  return Tensor<T>(s, std::move(data));
}

template <typename T>
Tensor<T> batch_item(const Tensor<T>& x, std::size_t n) {
  Shape5 s = x.shape();
  if (n >= s.n) throw ShapeError("batch index out of range");
  const std::size_t per = s.count() / s.n;
  s.n = 1;
  return Tensor<T>(s, std::vector<T>(x.data() + n * per, x.data() + (n + 1) * per));
}

#define P3D_INSTANTIATE_TENSOR(T)                                                     \
  template class Tensor<T>;                                                           \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                         \
  template void add_inplace(Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T> scale(const Tensor<T>&, T);                                      \
  template Tensor<T> relu(const Tensor<T>&);                                          \
  template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);               \
  template Closeness<T> almost_equal(const Tensor<T>&, const Tensor<T>&, double);     \
  template Tensor<T> slice_frames(const Tensor<T>&, std::size_t, std::size_t);        \
  template Tensor<T> reverse_frames(const Tensor<T>&);                                \
  template Tensor<T> concat_batch(std::span<const Tensor<T>>);                        \
  template Tensor<T> batch_item(const Tensor<T>&, std::size_t);

P3D_INSTANTIATE_TENSOR(float)
P3D_INSTANTIATE_TENSOR(double)

}  // namespace p3d
