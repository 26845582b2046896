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

#ifndef KVPF_CONFIG_H_
#define KVPF_CONFIG_H_

#include <filesystem>
#include <string>
#include <string_view>

#include "kvpf/model.h"
#include "kvpf/training.h"

namespace kvpf {

// Model and optimizer settings as stored in config files and checkpoints:
//   {"model": {...ModelConfig fields...}, "train": {...TrainConfig fields...}}
// Every field is optional and defaults to the reference hyperparameters.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// Throws std::invalid_argument on unknown keys, wrong types, or values that
// fail validation.
RunConfig parse_run_config(std::string_view json);
RunConfig load_run_config(const std::filesystem::path& file);
// Canonical serialization; parse_run_config(run_config_json(c)) == c.
std::string run_config_json(const RunConfig& config);

// Small configuration used for gradient checks: d_model 16, 2 heads, one
// encoder and one decoder layer, K = 3, no dropout.
RunConfig toy_config();

}  // namespace kvpf

#endif  // KVPF_CONFIG_H_
