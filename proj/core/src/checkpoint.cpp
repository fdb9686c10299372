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
#include "p3d/checkpoint.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>
#include <sstream>

namespace p3d {

namespace {

constexpr char kMagic[4] = {'P', '3', 'D', 'C'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename U>
  void le(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    le(u);
  }
  std::vector<std::uint8_t>& buffer() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  void need(std::size_t n, const char* what) const {
    if (in_.size() - pos_ < n) throw FormatError(std::string("checkpoint truncated in ") + what);
  }
  template <typename U>
  U le(const char* what) {
    need(sizeof(U), what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(in_[pos_ + i]) << (8 * i);
    pos_ += sizeof(U);
    return v;
  }
  float f32() {
    const auto u = le<std::uint32_t>("tensor data");
    float v;
    std::memcpy(&v, &u, 4);
    return v;
  }
  std::string str(std::size_t n) {
    need(n, "tensor name");
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::string dims_str(const std::vector<std::uint64_t>& d) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < d.size(); ++i) os << (i ? "," : "") << d[i];
  os << "]";
  return os.str();
}

}  // namespace

const NamedTensor* Checkpoint::find(std::string_view name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t hash) {
  for (std::uint8_t b : bytes) {
    hash ^= b;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes(kMagic, 4);
  w.le<std::uint32_t>(kCheckpointVersion);
  w.le<std::uint32_t>(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    std::uint64_t count = 1;
    for (auto d : t.dims) count *= d;
    if (count != t.data.size()) {
      throw ShapeError("tensor '" + t.name + "' dims " + dims_str(t.dims) + " hold " +
                       std::to_string(count) + " values, data has " +
                       std::to_string(t.data.size()));
    }
    if (t.dims.size() > 255) throw FormatError("tensor '" + t.name + "' rank above 255");
    w.le<std::uint32_t>(static_cast<std::uint32_t>(t.name.size()));
    w.bytes(t.name.data(), t.name.size());
    w.le<std::uint8_t>(static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) w.le<std::uint64_t>(d);
    for (float v : t.data) w.f32(v);
  }
  const std::uint64_t sum = fnv1a64(w.buffer());
  w.le<std::uint64_t>(sum);
  return std::move(w.buffer());
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("not a checkpoint: bad magic bytes");
  }
  Reader r(bytes);
  r.str(4);
  const auto version = r.le<std::uint32_t>("header");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = r.le<std::uint32_t>("header");
  Checkpoint ckpt;
  std::set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    const auto name_len = r.le<std::uint32_t>("tensor header");
    t.name = r.str(name_len);
    if (!seen.insert(t.name).second) throw FormatError("duplicate tensor name '" + t.name + "'");
    const auto rank = r.le<std::uint8_t>("tensor header");
    std::uint64_t n = 1;
    for (std::uint8_t k = 0; k < rank; ++k) {
      const auto d = r.le<std::uint64_t>("tensor dims");
      if (d != 0 && n > std::numeric_limits<std::uint64_t>::max() / d) {
        throw FormatError("tensor '" + t.name + "' dims overflow");
      }
      t.dims.push_back(d);
      n *= d;
    }
    if (n > r.remaining() / 4) throw FormatError("checkpoint truncated in tensor '" + t.name + "'");
    t.data.resize(n);
    for (auto& v : t.data) v = r.f32();
    ckpt.tensors.push_back(std::move(t));
  }
  const std::size_t payload_end = r.pos();
  const auto stored = r.le<std::uint64_t>("checksum");
  if (r.remaining() != 0) throw FormatError("trailing bytes after checkpoint checksum");
  if (stored != fnv1a64(bytes.first(payload_end))) throw FormatError("checkpoint checksum mismatch");
  return ckpt;
}

std::uint64_t payload_hash(const Checkpoint& ckpt) {
  const auto bytes = encode_checkpoint(ckpt);
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[bytes.size() - 8 + i]) << (8 * i);
  return v;
}

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(ckpt);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError("failed writing " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

// meta.arch: integers and fixed-point fractions (micro units) so every field
// round-trips exactly through float32.
NamedTensor encode_arch(const ArchSpec& s) {
  auto micro = [](double v) { return static_cast<float>(std::llround(v * 1e6)); };
  NamedTensor t;
  t.name = std::string(kArchTensorName);
  t.data = {1.0f,
            static_cast<float>(s.depth),
            static_cast<float>(static_cast<int>(s.policy)),
            static_cast<float>(s.num_classes),
            static_cast<float>(s.in_channels),
            static_cast<float>(s.stem_channels),
            static_cast<float>(s.mid_channels[0]),
            static_cast<float>(s.mid_channels[1]),
            static_cast<float>(s.mid_channels[2]),
            static_cast<float>(s.mid_channels[3]),
            micro(s.dropout_rate),
            micro(s.bn.eps * 1e3),  // nano units
            micro(s.bn.momentum),
            static_cast<float>(s.input.frames),
            static_cast<float>(s.input.height),
            static_cast<float>(s.input.width)};
  t.dims = {t.data.size()};
  return t;
}

ArchSpec decode_arch(const Checkpoint& ckpt) {
  const NamedTensor* t = ckpt.find(kArchTensorName);
  if (!t) throw FormatError("checkpoint has no meta.arch record");
  if (t->data.size() != 16 || t->data[0] != 1.0f) throw FormatError("unsupported meta.arch record");
  const auto& v = t->data;
  auto i = [&](std::size_t k) { return static_cast<int>(v[k]); };
  ArchSpec s;
  s.depth = i(1);
  const int policy = i(2);
  if (policy < 0 || policy > static_cast<int>(BlockPolicy::kMixed)) throw FormatError("bad block policy in meta.arch");
  s.policy = static_cast<BlockPolicy>(policy);
  s.num_classes = i(3);
  s.in_channels = i(4);
  s.stem_channels = i(5);
  s.mid_channels = {i(6), i(7), i(8), i(9)};
  s.dropout_rate = static_cast<double>(v[10]) / 1e6;
  s.bn.eps = static_cast<double>(v[11]) / 1e9;
  s.bn.momentum = static_cast<double>(v[12]) / 1e6;
  s.input = {i(13), i(14), i(15)};
  try {
    s.validate();
  } catch (const SpecError& e) {
    throw FormatError(std::string("invalid meta.arch: ") + e.what());
  }
  return s;
}

template <typename T>
Checkpoint to_checkpoint(Network<T>& net) {
  Checkpoint ckpt;
  ckpt.tensors.push_back(encode_arch(net.spec()));
  for (auto& p : net.params()) {
    NamedTensor t;
    t.name = p.name;
    t.dims.assign(p.dims.begin(), p.dims.end());
    t.data.assign(p.value.begin(), p.value.end());
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

template <typename T>
void load_parameters(Network<T>& net, const Checkpoint& ckpt) {
  for (auto& p : net.params()) {
    const NamedTensor* t = ckpt.find(p.name);
    if (!t) throw ShapeError("checkpoint is missing tensor '" + p.name + "'");
    const std::vector<std::uint64_t> want(p.dims.begin(), p.dims.end());
    if (t->dims != want) {
      throw ShapeError("tensor '" + p.name + "': checkpoint dims " + dims_str(t->dims) +
                       " vs graph dims " + dims_str(want));
    }
    std::copy(t->data.begin(), t->data.end(), p.value.begin());
  }
}

void save_checkpoint(Network<float>& net, const std::filesystem::path& path) {
  write_checkpoint(to_checkpoint(net), path);
}

Network<float> network_from_checkpoint(const Checkpoint& ckpt) {
  Network<float> net(decode_arch(ckpt));
  load_parameters(net, ckpt);
  return net;
}

Network<float> load_network(const std::filesystem::path& path) {
  return network_from_checkpoint(read_checkpoint(path));
}

template Checkpoint to_checkpoint(Network<float>&);
template Checkpoint to_checkpoint(Network<double>&);
template void load_parameters(Network<float>&, const Checkpoint&);
template void load_parameters(Network<double>&, const Checkpoint&);

}  // namespace p3d
