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

#ifndef KVPF_MODEL_H_
#define KVPF_MODEL_H_

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kvpf/document.h"
#include "kvpf/layers.h"
#include "kvpf/tensor.h"

namespace kvpf {

// Which entities are fed to the decoder as questions.
enum class QuestionRole {
  // Value entities ask for their key; pairs are emitted answer -> question.
  kAnswerAsQuestion,
  // Every non-Other entity asks for its value.
  kNonOther,
};

std::string_view question_role_name(QuestionRole role);
std::optional<QuestionRole> parse_question_role(std::string_view name);

struct ModelConfig {
  int num_encoder_layers = 3;
  int num_decoder_layers = 3;
  int num_heads = 12;
  int d_model = 768;
  int d_ffn = 2048;
  int top_k = 5;
  int hash_vocab_size = 4096;
  // Hidden width of the networks reading the 18-d box features.
  int spatial_hidden = 64;
  double dropout_rate = 0.1;
  bool use_gold_labels = false;
  bool use_spatial_bias = true;
  bool use_coarse_to_fine = true;
  double coarse_accept_threshold = 0.5;
  QuestionRole question_role = QuestionRole::kAnswerAsQuestion;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Throws std::invalid_argument on inconsistent dimensions.
void validate(const ModelConfig& config);

// Lower-cases and splits on whitespace; each ASCII punctuation character is a
// token of its own.
std::vector<std::string> tokenize(std::string_view text);
// Bucket in [1, vocab); bucket 0 is the reserved empty-entity row.
int hash_token(std::string_view token, int vocab);

// Parameter-free view of a document in entity-index space.
struct DocumentFeatures {
  std::vector<int> entity_ids;
  std::vector<BBox> boxes;
  std::vector<Label> labels;
  // Hashed tokens in reading order and the entity index owning each.
  std::vector<int> token_ids;
  std::vector<int> token_entity;
  // [N, T] row-normalized token membership.
  Tensor token_average;
  // x1, y1, x2, y2 of every entity box.
  std::array<std::vector<int>, 4> coords;
  // [N*N, 18], row i*N + j holds spatial_compatibility(box_i, box_j).
  Tensor spatial;
  // Gold links as (key index, value index).
  std::vector<std::pair<int, int>> gold;

  std::size_t size() const { return entity_ids.size(); }
};

DocumentFeatures featurize(const Document& doc, const ModelConfig& config);

// Rows of `spatial` for every (query, key) combination, query-major.
std::vector<int> pair_rows(std::span<const int> queries, std::span<const int> keys,
                           std::size_t num_entities);

// Ids of the min(K, N) highest scores in descending order, ties broken by
// lower index; `exclude` is never returned.
std::vector<int> topk_candidates(std::span<const Real> scores, int k,
                                 std::optional<int> exclude = std::nullopt);

// Candidate with the highest fine score, the earliest slot on ties; -1 when
// there are no candidates.
int select_answer(std::span<const int> candidates, std::span<const Real> fine_scores);

// Entity indices acting as questions for the given labels.
std::vector<int> questions_from_labels(std::span<const Label> labels, QuestionRole role);

// Gold partners (entity indices) of every question under the role's
// direction convention.
std::vector<std::vector<int>> gold_answers(const DocumentFeatures& features,
                                           std::span<const int> questions,
                                           QuestionRole role);

struct EntityRepresentation {
  Tensor content;  // [N, d_model]
  Tensor pos;      // [N, d_model]
};

struct ForwardOptions {
  Pass pass;
  // Question entity indices; when absent they come from the classifier (or
  // the gold labels when use_gold_labels is set).
  std::optional<std::vector<int>> questions;
  // Per-question gold partners; when set, a gold partner missing from the
  // top-K replaces the lowest-ranked candidate.
  const std::vector<std::vector<int>>* force_gold = nullptr;
};

struct ForwardOutputs {
  Tensor label_logits;          // [N, 4]
  Tensor encoded;               // H, [N, d_model]
  std::vector<int> questions;   // entity indices
  Tensor decoded;               // Q, [M, d_model]; undefined when M == 0
  Tensor coarse_logits;         // [M, N]; undefined when M == 0
  std::vector<std::vector<int>> candidates;  // entity indices, coarse order
  Tensor fine_logits;           // [M, K']; undefined without candidates
};

struct Prediction {
  std::vector<std::array<Real, kNumLabels>> entity_labels;
  std::vector<int> question_ids;
  std::vector<std::vector<Real>> coarse_scores;  // M x N
  std::vector<std::vector<int>> candidates;      // entity ids
  std::vector<std::vector<Real>> fine_scores;    // M x K'
  PairSet pairs;
};

struct InitOptions {
  std::uint64_t seed = 0;
  // Newly added layers.
  Real init_std = 0.01;
  // Token and 2-D position tables.
  Real backbone_init_std = 0.02;
};

class KvpModel {
 public:
  KvpModel(const ModelConfig& config, const InitOptions& init);

  const ModelConfig& config() const { return config_; }
  ParameterStore& store() { return store_; }
  const ParameterStore& store() const { return store_; }
  std::vector<Parameter>& parameters() { return store_.params(); }
  // Token and position tables, trained at the backbone learning rate.
  static bool is_backbone(const std::string& parameter_name);

  EntityRepresentation embed(const DocumentFeatures& f) const;
  Tensor encode(const EntityRepresentation& reps, const DocumentFeatures& f,
                const Pass& pass) const;
  Tensor question_logits(const Tensor& encoded) const;
  Tensor decode(const Tensor& encoded, const EntityRepresentation& reps,
                std::span<const int> questions, const DocumentFeatures& f,
                const Pass& pass) const;
  Tensor coarse_logits(const Tensor& decoded, const Tensor& encoded,
                       std::span<const int> questions, const DocumentFeatures& f) const;
  // [M, K'] logits t for the candidate lists (each of equal length K').
  Tensor fine_logits(const Tensor& decoded, const Tensor& encoded,
                     std::span<const int> questions,
                     const std::vector<std::vector<int>>& candidates,
                     const DocumentFeatures& f) const;

  const SpatialAttention& encoder_attention(int layer) const;
  const SpatialAttention& decoder_self_attention(int layer) const;
  const SpatialAttention& decoder_cross_attention(int layer) const;

  ForwardOutputs forward(const DocumentFeatures& f, const ForwardOptions& options) const;

 private:
  struct EncoderLayer {
    SpatialAttention attention;
    LayerNorm norm1;
    FeedForward ffn;
    LayerNorm norm2;
  };
  struct DecoderLayer {
    SpatialAttention self_attention;
    LayerNorm norm1;
    SpatialAttention cross_attention;
    LayerNorm norm2;
    FeedForward ffn;
    LayerNorm norm3;
  };
  struct PairHead {
    FeedForward spatial;  // 18 -> d_model
    FeedForward mlp;      // d_model -> 1
    Tensor logits(const Tensor& q_rows, const Tensor& h_rows, const Tensor& r,
                  const Pass& pass) const;
  };

  ModelConfig config_;
  ParameterStore store_;
  Tensor token_table_;
  Tensor label_table_;
  std::array<Tensor, 4> coord_tables_;
  std::vector<EncoderLayer> encoder_;
  std::vector<DecoderLayer> decoder_;
  Linear classifier_;
  PairHead coarse_;
  PairHead fine_;
};

// Full inference: embed, encode, identify questions, decode, coarse scores,
// top-K, fine scores, pair emission.
Prediction predict(const KvpModel& model, const Document& doc);
Prediction predict(const KvpModel& model, const Document& doc,
                   const DocumentFeatures& features, AttentionTrace* trace = nullptr);

}  // namespace kvpf

#endif  // KVPF_MODEL_H_
