// Copyright 2026 The kvpf Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef KVPF_CHECKPOINT_H_
#define KVPF_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "kvpf/config.h"
#include "kvpf/model.h"

namespace kvpf {

// Binary container, all integers little-endian:
//   "KVPF1"
//   u32 config_length, config JSON (run_config_json)
//   u32 tensor_count
//   per tensor: u32 name_length, name, u32 rank, u32 dims[rank],
//               float32 values[prod(dims)]
inline constexpr std::string_view kCheckpointMagic = "KVPF1";

struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> shape;
  std::vector<float> values;
};

struct Checkpoint {
  RunConfig config;
  std::vector<NamedTensor> tensors;
};

std::string encode_checkpoint(const RunConfig& config, const std::vector<Parameter>& params);
std::string encode_checkpoint(const Checkpoint& checkpoint);
// Throws std::runtime_error on truncated or malformed input.
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& file, const RunConfig& config,
                     const std::vector<Parameter>& params);
Checkpoint load_checkpoint(const std::filesystem::path& file);

// Builds a model from the checkpoint's config and copies its tensors in.
// Throws std::runtime_error naming the tensor on a missing, extra, or
// mis-shaped tensor.
KvpModel restore_model(const Checkpoint& checkpoint);

}  // namespace kvpf

#endif  // KVPF_CHECKPOINT_H_
