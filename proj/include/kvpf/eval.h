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

#ifndef KVPF_EVAL_H_
#define KVPF_EVAL_H_

#include <cstddef>
#include <optional>
#include <span>
#include <string>

#include "kvpf/document.h"

namespace kvpf {

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t true_positives = 0;
  std::size_t predicted_count = 0;
  std::size_t gold_count = 0;
  // Absent when no entity labels were scored.
  std::optional<double> label_accuracy;
};

// Directed exact-match P/R/F1 for one document.
Metrics relation_prf(const PairSet& predicted, const PairSet& gold);

// Micro-averaging: counts are summed over documents and the ratios
// recomputed from the totals.
class RelationCounter {
 public:
  void add(const PairSet& predicted, const PairSet& gold);
  void add_labels(std::span<const Label> predicted, std::span<const Label> gold);
  Metrics metrics() const;

 private:
  std::size_t tp_ = 0;
  std::size_t predicted_ = 0;
  std::size_t gold_ = 0;
  std::size_t label_hits_ = 0;
  std::size_t label_total_ = 0;
};

// Fraction of equal positions. Throws std::invalid_argument on a length
// mismatch; 0 for empty input.
double label_accuracy(std::span<const Label> predicted, std::span<const Label> gold);

// {"precision","recall","f1","tp","n_pred","n_gold","label_accuracy"} with the
// three ratios printed to four decimals.
std::string metrics_json(const Metrics& m);

}  // namespace kvpf

#endif  // KVPF_EVAL_H_
