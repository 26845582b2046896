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

#include <algorithm>

#include "kvpf/training.h"

namespace kvpf {

Tensor loss_question(const Tensor& label_logits, std::span<const Label> gold) {
  std::vector<int> targets;
  targets.reserve(gold.size());
  for (Label l : gold) targets.push_back(static_cast<int>(l));
  return cross_entropy(label_logits, targets);
}

std::vector<Real> coarse_targets(const std::vector<std::vector<int>>& gold_answers,
                                 std::size_t num_entities) {
  std::vector<Real> t(gold_answers.size() * num_entities, 0.0);
  for (size_t i = 0; i < gold_answers.size(); ++i) {
    for (int j : gold_answers[i]) t[i * num_entities + j] = 1.0;
  }
  return t;
}

Tensor loss_coarse(const Tensor& coarse_logits, std::span<const Real> targets) {
  if (!coarse_logits.defined()) return Tensor::scalar(0.0);
  return bce_with_logits(coarse_logits, targets);
}

std::vector<int> fine_targets(const std::vector<std::vector<int>>& candidates,
                              const std::vector<std::vector<int>>& gold_answers) {
  std::vector<int> targets(candidates.size(), -1);
  for (size_t i = 0; i < candidates.size(); ++i) {
    for (size_t k = 0; k < candidates[i].size(); ++k) {
      const auto& gold = gold_answers[i];
      if (std::find(gold.begin(), gold.end(), candidates[i][k]) != gold.end()) {
        targets[i] = static_cast<int>(k);
        break;
      }
    }
  }
  return targets;
}

Tensor loss_fine(const Tensor& fine_logits, std::span<const int> targets) {
  if (!fine_logits.defined()) return Tensor::scalar(0.0);
  return cross_entropy(fine_logits, targets);
}

Tensor total_loss(const Tensor& question, const Tensor& coarse, const Tensor& fine) {
  return add(add(question, coarse), fine);
}

LossTerms document_loss(const KvpModel& model, const DocumentFeatures& f, const Pass& pass) {
  const QuestionRole role = model.config().question_role;
  const std::vector<int> questions = questions_from_labels(f.labels, role);
  const std::vector<std::vector<int>> gold = gold_answers(f, questions, role);

  ForwardOptions options;
  options.pass = pass;
  options.questions = questions;
  options.force_gold = &gold;
  const ForwardOutputs out = model.forward(f, options);

  LossTerms terms;
  terms.question = loss_question(out.label_logits, f.labels);
  terms.coarse = loss_coarse(out.coarse_logits, coarse_targets(gold, f.size()));
  terms.fine = loss_fine(out.fine_logits, fine_targets(out.candidates, gold));
  terms.total = total_loss(terms.question, terms.coarse, terms.fine);
  return terms;
}

}  // namespace kvpf
