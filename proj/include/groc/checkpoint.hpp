// Copyright 2026 The groc-lm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef GROC_CHECKPOINT_HPP
#define GROC_CHECKPOINT_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "groc/tensor.hpp"

namespace groc {

// Binary layout, all integers and floats little-endian:
//
//   "GROCCKPT"                      8-byte magic
//   u32 format_version
//   u64 header_len, header bytes    JSON: config echo and run metadata
//   u64 tensor_count
//   per tensor:
//     u32 name_len, name bytes
//     u32 ndim, u64 dims[ndim]
//     f64 values[prod(dims)]
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  nlohmann::json header;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor* find(const std::string& name) const;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace groc

#endif  // GROC_CHECKPOINT_HPP
