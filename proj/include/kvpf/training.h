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

#ifndef KVPF_TRAINING_H_
#define KVPF_TRAINING_H_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "kvpf/document.h"
#include "kvpf/eval.h"
#include "kvpf/model.h"
#include "kvpf/tensor.h"

namespace kvpf {

struct TrainConfig {
  int batch_size = 16;
  int epochs = 50;
  double lr_backbone = 2e-5;
  double lr_new = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-2;
  std::uint64_t seed = 0;
  double init_std = 0.01;
  double backbone_init_std = 0.02;
  bool shuffle = true;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

void validate(const TrainConfig& config);

// --- losses -----------------------------------------------------------------

// Mean softmax cross-entropy of the [N,4] label logits.
Tensor loss_question(const Tensor& label_logits, std::span<const Label> gold);

// 0/1 matrix with a one where entity j is a gold partner of question i.
std::vector<Real> coarse_targets(const std::vector<std::vector<int>>& gold_answers,
                                 std::size_t num_entities);
// Mean BCE over every cell of the [M,N] coarse logits; zero when M == 0.
Tensor loss_coarse(const Tensor& coarse_logits, std::span<const Real> targets);

// Slot of the first gold partner in each candidate list, -1 if none.
std::vector<int> fine_targets(const std::vector<std::vector<int>>& candidates,
                              const std::vector<std::vector<int>>& gold_answers);
// Mean CE over the questions with a target slot; zero when there are none.
Tensor loss_fine(const Tensor& fine_logits, std::span<const int> targets);

Tensor total_loss(const Tensor& question, const Tensor& coarse, const Tensor& fine);

struct LossTerms {
  Tensor question;
  Tensor coarse;
  Tensor fine;
  Tensor total;
};

// Teacher-forced training objective for one document: gold questions drive
// the decoder and gold partners are forced into the candidate lists.
LossTerms document_loss(const KvpModel& model, const DocumentFeatures& features,
                        const Pass& pass);

// --- optimizer --------------------------------------------------------------

struct LossRecord {
  int step = 0;
  double question = 0.0;
  double coarse = 0.0;
  double fine = 0.0;
  double total = 0.0;
};

struct TrainState {
  int step = 0;
  std::vector<std::vector<Real>> first_moment;
  std::vector<std::vector<Real>> second_moment;
  std::vector<LossRecord> history;
};

// Decoupled-decay AdamW over two groups: backbone tables at lr_backbone, all
// other parameters at lr_new. Gradients are multiplied by grad_scale first.
// Throws std::runtime_error naming the parameter if a gradient is not finite;
// no parameter is touched in that case.
void adamw_step(std::vector<Parameter>& params, TrainState& state,
                const TrainConfig& config, Real grad_scale = 1.0);

// "step,L_Q,L_coarse,L_fine,L" followed by one row per optimizer step.
std::string loss_csv(const std::vector<LossRecord>& history);

struct TrainCallbacks {
  std::function<void(int epoch, const LossRecord& last)> on_epoch;
};

// One document per forward pass; gradients accumulate over batch_size
// documents per optimizer step. Deterministic given config.seed.
TrainState train(const std::vector<Document>& docs, KvpModel& model,
                 const TrainConfig& config, const TrainCallbacks& callbacks = {});

// Micro-averaged relation metrics of model predictions, with label accuracy.
Metrics evaluate(const KvpModel& model, const std::vector<Document>& docs);

}  // namespace kvpf

#endif  // KVPF_TRAINING_H_
