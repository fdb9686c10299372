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

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "p3d/network.hpp"

namespace p3d {

struct NamedTensor {
  std::string name;
  std::vector<std::uint64_t> dims;
  std::vector<float> data;
};

/// Ordered archive of named tensors.
///
/// On-disk layout (all integers little-endian):
///   "P3DC" | u32 version = 1 | u32 tensor count
///   per tensor: u32 name length | name bytes | u8 rank | u64 dims[rank] |
///               float32 values[prod(dims)]
///   u64 checksum = FNV-1a 64 over every preceding byte
struct Checkpoint {
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(std::string_view name) const;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::string_view kArchTensorName = "meta.arch";

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes,
                      std::uint64_t hash = 0xcbf29ce484222325ULL);

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
/// Throws FormatError on bad magic, version, checksum, truncation, trailing
/// bytes or duplicate names.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

/// Checksum of the encoded archive, i.e. the trailing u64 of the file.
std::uint64_t payload_hash(const Checkpoint& ckpt);

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
/// Throws DataError when the file cannot be read.
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Architecture record stored alongside the parameters as "meta.arch".
NamedTensor encode_arch(const ArchSpec& spec);
ArchSpec decode_arch(const Checkpoint& ckpt);

/// Every parameter and running statistic, plus meta.arch.
template <typename T>
Checkpoint to_checkpoint(Network<T>& net);

/// Strict load: every graph tensor must be present with identical dims.
/// Throws ShapeError naming the offending tensor.
template <typename T>
void load_parameters(Network<T>& net, const Checkpoint& ckpt);

void save_checkpoint(Network<float>& net, const std::filesystem::path& path);
/// Rebuilds the network described by meta.arch and loads its tensors.
Network<float> load_network(const std::filesystem::path& path);
Network<float> network_from_checkpoint(const Checkpoint& ckpt);

}  // namespace p3d
