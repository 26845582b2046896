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

#include "kvpf/eval.h"

#include <cstdio>
#include <stdexcept>

namespace kvpf {
namespace {

Metrics from_counts(std::size_t tp, std::size_t predicted, std::size_t gold) {
  Metrics m;
  m.true_positives = tp;
  m.predicted_count = predicted;
  m.gold_count = gold;
  m.precision = predicted ? static_cast<double>(tp) / predicted : 0.0;
  m.recall = gold ? static_cast<double>(tp) / gold : 0.0;
  m.f1 = m.precision + m.recall > 0
             ? 2 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  return m;
}

std::size_t intersection_size(const PairSet& a, const PairSet& b) {
  std::size_t n = 0;
  for (const RelationPair& p : a) n += b.count(p);
  return n;
}

}  // namespace

Metrics relation_prf(const PairSet& predicted, const PairSet& gold) {
  return from_counts(intersection_size(predicted, gold), predicted.size(), gold.size());
}

void RelationCounter::add(const PairSet& predicted, const PairSet& gold) {
  tp_ += intersection_size(predicted, gold);
  predicted_ += predicted.size();
  gold_ += gold.size();
}

void RelationCounter::add_labels(std::span<const Label> predicted, std::span<const Label> gold) {
  if (predicted.size() != gold.size()) {
    throw std::invalid_argument("label_accuracy: " + std::to_string(predicted.size()) +
                                " predictions for " + std::to_string(gold.size()) + " labels");
  }
  for (size_t i = 0; i < gold.size(); ++i) label_hits_ += predicted[i] == gold[i];
  label_total_ += gold.size();
}

Metrics RelationCounter::metrics() const {
  Metrics m = from_counts(tp_, predicted_, gold_);
  if (label_total_) m.label_accuracy = static_cast<double>(label_hits_) / label_total_;
  return m;
}

double label_accuracy(std::span<const Label> predicted, std::span<const Label> gold) {
  RelationCounter c;
  c.add_labels(predicted, gold);
  return c.metrics().label_accuracy.value_or(0.0);
}

std::string metrics_json(const Metrics& m) {
  char buf[512];
  std::string acc = "null";
  if (m.label_accuracy) {
    char a[32];
    std::snprintf(a, sizeof a, "%.4f", *m.label_accuracy);
    acc = a;
  }
  std::snprintf(buf, sizeof buf,
                "{\"precision\": %.4f, \"recall\": %.4f, \"f1\": %.4f, \"tp\": %zu, "
                "\"n_pred\": %zu, \"n_gold\": %zu, \"label_accuracy\": %s}",
                m.precision, m.recall, m.f1, m.true_positives, m.predicted_count,
                m.gold_count, acc.c_str());
  return buf;
}

}  // namespace kvpf
