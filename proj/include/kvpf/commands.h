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

#ifndef KVPF_COMMANDS_H_
#define KVPF_COMMANDS_H_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "kvpf/config.h"
#include "kvpf/document.h"

namespace kvpf {

// Exit codes: 0 success, 1 runtime failure (bad data, failed check),
// 2 usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

using PredictionMap = std::map<std::string, PairSet>;

// {"doc_id": [[key_id, value_id], ...], ...}
std::string predictions_json(const PredictionMap& predictions);
// Whitespace-only input parses as an empty map. Throws std::runtime_error.
PredictionMap parse_predictions_json(std::string_view json);

inline constexpr double kGradTolerance = 1e-4;

struct GradcheckOutcome {
  // Max relative error per parameter group (name prefix before the first dot).
  std::map<std::string, double> group_errors;
  double max_error = 0.0;
  std::size_t coords_checked = 0;
  std::size_t coords_skipped = 0;
  bool passed = false;
};

// Random documents with 2 to 4 entities, at least one linked key/value pair.
std::vector<Document> toy_documents(std::uint64_t seed, int count);

// Finite-difference check of the full training objective on a toy batch.
GradcheckOutcome run_gradcheck(const RunConfig& config, std::uint64_t seed);

}  // namespace kvpf

#endif  // KVPF_COMMANDS_H_
