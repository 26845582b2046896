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

#include <numeric>
#include <random>
#include <stdexcept>

#include "kvpf/training.h"

namespace kvpf {

TrainState train(const std::vector<Document>& docs, KvpModel& model,
                 const TrainConfig& config, const TrainCallbacks& callbacks) {
  validate(config);
  if (docs.empty()) throw std::invalid_argument("train: empty dataset");
  std::vector<DocumentFeatures> features;
  features.reserve(docs.size());
  for (const Document& d : docs) features.push_back(featurize(d, model.config()));

  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  Pass pass;
  pass.train = true;
  pass.dropout_rate = model.config().dropout_rate;
  pass.rng = &rng;

  TrainState state;
  std::vector<size_t> order(docs.size());
  std::iota(order.begin(), order.end(), 0);
  auto& params = model.parameters();
  model.store().zero_grad();

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.shuffle) {
      for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    }
    LossRecord acc;
    int in_batch = 0;
    auto flush = [&] {
      adamw_step(params, state, config, 1.0 / in_batch);
      model.store().zero_grad();
      acc.step = state.step;
      acc.question /= in_batch;
      acc.coarse /= in_batch;
      acc.fine /= in_batch;
      acc.total /= in_batch;
      state.history.push_back(acc);
      acc = LossRecord{};
      in_batch = 0;
    };
    for (size_t idx : order) {
      LossTerms terms = document_loss(model, features[idx], pass);
      backward(terms.total);
      acc.question += terms.question.item();
      acc.coarse += terms.coarse.item();
      acc.fine += terms.fine.item();
      acc.total += terms.total.item();
      if (++in_batch == config.batch_size) flush();
    }
    if (in_batch > 0) flush();
    if (callbacks.on_epoch) callbacks.on_epoch(epoch, state.history.back());
  }
  return state;
}

Metrics evaluate(const KvpModel& model, const std::vector<Document>& docs) {
  RelationCounter counter;
  for (const Document& d : docs) {
    const Prediction p = predict(model, d);
    counter.add(p.pairs, d.gold_pairs);
    std::vector<Label> predicted, gold;
    for (size_t i = 0; i < d.entities.size(); ++i) {
      const auto& probs = p.entity_labels[i];
      int best = 0;
      for (int c = 1; c < kNumLabels; ++c) {
        if (probs[c] > probs[best]) best = c;
      }
      predicted.push_back(static_cast<Label>(best));
      gold.push_back(d.entities[i].label);
    }
    counter.add_labels(predicted, gold);
  }
  return counter.metrics();
}

}  // namespace kvpf
