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

#include "kvpf/model.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace kvpf {
namespace {

constexpr int kCoordBuckets = kPageScale + 1;

int argmax(std::span<const Real> v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

Real sigmoid_value(Real x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace

std::string_view question_role_name(QuestionRole role) {
  return role == QuestionRole::kAnswerAsQuestion ? "answer_as_question" : "non_other";
}

std::optional<QuestionRole> parse_question_role(std::string_view name) {
  if (name == "answer_as_question") return QuestionRole::kAnswerAsQuestion;
  if (name == "non_other") return QuestionRole::kNonOther;
  return std::nullopt;
}

void validate(const ModelConfig& c) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("model config: " + what);
  };
  require(c.num_encoder_layers >= 0 && c.num_decoder_layers >= 0, "layer counts must be >= 0");
  require(c.num_heads >= 1, "num_heads must be >= 1");
  require(c.d_model >= 4 && c.d_model % c.num_heads == 0,
          "d_model " + std::to_string(c.d_model) + " must be divisible by num_heads " +
              std::to_string(c.num_heads));
  require(c.d_model % 4 == 0, "d_model must be divisible by 4 (x1,y1,x2,y2 position slices)");
  require(c.d_ffn >= 1, "d_ffn must be >= 1");
  require(c.top_k >= 1, "top_k must be >= 1");
  require(c.hash_vocab_size >= 2, "hash_vocab_size must be >= 2");
  require(c.spatial_hidden >= 1, "spatial_hidden must be >= 1");
  require(c.dropout_rate >= 0.0 && c.dropout_rate < 1.0, "dropout_rate must lie in [0,1)");
}

// --- features ---------------------------------------------------------------

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (char raw : text) {
    const unsigned char c = static_cast<unsigned char>(raw);
    if (c < 0x80 && std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c)) {
      flush();
      tokens.emplace_back(1, raw);
    } else {
      current += c < 0x80 ? static_cast<char>(std::tolower(c)) : raw;
    }
  }
  flush();
  return tokens;
}

int hash_token(std::string_view token, int vocab) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : token) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return 1 + static_cast<int>(h % static_cast<std::uint64_t>(vocab - 1));
}

DocumentFeatures featurize(const Document& doc, const ModelConfig& config) {
  if (doc.entities.empty()) throw std::invalid_argument("document " + doc.id + " has no entities");
  DocumentFeatures f;
  const size_t n = doc.entities.size();
  for (const Entity& e : doc.entities) {
    f.entity_ids.push_back(e.id);
    f.boxes.push_back(e.box);
    f.labels.push_back(e.label);
    f.coords[0].push_back(e.box.x1);
    f.coords[1].push_back(e.box.y1);
    f.coords[2].push_back(e.box.x2);
    f.coords[3].push_back(e.box.y2);
  }

  std::vector<int> count(n, 0);
  for (const auto& [entity_id, word] : reading_order(doc)) {
    const int idx = doc.index_of(entity_id);
    for (const std::string& tok : tokenize(doc.entities[idx].words[word].text)) {
      f.token_ids.push_back(hash_token(tok, config.hash_vocab_size));
      f.token_entity.push_back(idx);
      ++count[idx];
    }
  }
  for (size_t i = 0; i < n; ++i) {
    if (count[i] == 0) {
      f.token_ids.push_back(0);
      f.token_entity.push_back(static_cast<int>(i));
      count[i] = 1;
    }
  }
  const size_t t = f.token_ids.size();
  std::vector<Real> avg(n * t, 0.0);
  for (size_t k = 0; k < t; ++k) {
    const int i = f.token_entity[k];
    avg[i * t + k] = 1.0 / count[i];
  }
  f.token_average = Tensor::from({n, t}, std::move(avg));

  std::vector<Real> spatial(n * n * kSpatialFeatureDim);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) {
      const SpatialFeature r = spatial_compatibility(f.boxes[i], f.boxes[j]);
      std::copy(r.begin(), r.end(), &spatial[(i * n + j) * kSpatialFeatureDim]);
    }
  }
  f.spatial = Tensor::from({n * n, kSpatialFeatureDim}, std::move(spatial));

  for (const RelationPair& p : doc.gold_pairs) {
    const int k = doc.index_of(p.key_id), v = doc.index_of(p.value_id);
    if (k < 0 || v < 0) throw std::invalid_argument("document " + doc.id + ": dangling gold pair");
    f.gold.emplace_back(k, v);
  }
  return f;
}

std::vector<int> pair_rows(std::span<const int> queries, std::span<const int> keys,
                           std::size_t num_entities) {
  std::vector<int> rows;
  rows.reserve(queries.size() * keys.size());
  for (int q : queries) {
    for (int k : keys) rows.push_back(static_cast<int>(q * num_entities + k));
  }
  return rows;
}

int select_answer(std::span<const int> candidates, std::span<const Real> fine_scores) {
  if (candidates.empty()) return -1;
  if (fine_scores.size() != candidates.size()) {
    throw std::invalid_argument("select_answer: " + std::to_string(fine_scores.size()) +
                                " scores for " + std::to_string(candidates.size()) + " candidates");
  }
  return candidates[argmax(fine_scores)];
}

std::vector<int> topk_candidates(std::span<const Real> scores, int k,
                                 std::optional<int> exclude) {
  std::vector<int> ids;
  for (int j = 0; j < static_cast<int>(scores.size()); ++j) {
    if (exclude && *exclude == j) continue;
    ids.push_back(j);
  }
  const size_t keep = std::min<size_t>(std::max(k, 0), ids.size());
  std::partial_sort(ids.begin(), ids.begin() + keep, ids.end(), [&](int a, int b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  ids.resize(keep);
  return ids;
}

std::vector<int> questions_from_labels(std::span<const Label> labels, QuestionRole role) {
  std::vector<int> q;
  for (int i = 0; i < static_cast<int>(labels.size()); ++i) {
    const bool pick = role == QuestionRole::kAnswerAsQuestion ? labels[i] == Label::kAnswer
                                                              : labels[i] != Label::kOther;
    if (pick) q.push_back(i);
  }
  return q;
}

std::vector<std::vector<int>> gold_answers(const DocumentFeatures& f,
                                           std::span<const int> questions,
                                           QuestionRole role) {
  std::vector<std::vector<int>> out(questions.size());
  for (size_t i = 0; i < questions.size(); ++i) {
    for (const auto& [key, value] : f.gold) {
      if (role == QuestionRole::kAnswerAsQuestion && value == questions[i]) out[i].push_back(key);
      if (role == QuestionRole::kNonOther && key == questions[i]) out[i].push_back(value);
    }
    std::sort(out[i].begin(), out[i].end());
    out[i].erase(std::unique(out[i].begin(), out[i].end()), out[i].end());
  }
  return out;
}

// --- model ------------------------------------------------------------------

KvpModel::KvpModel(const ModelConfig& config, const InitOptions& init)
    : config_(config), store_(init.seed) {
  validate(config_);
  const size_t d = config_.d_model;
  const size_t label_dim = config_.use_gold_labels ? d / 4 : 0;
  const Real s = init.init_std;
  using Init = ParameterStore::Init;

  token_table_ = store_.add("backbone.token_embedding", {size_t(config_.hash_vocab_size), d - label_dim},
                            Init::kNormal, init.backbone_init_std);
  static const char* kCoordNames[4] = {"x1", "y1", "x2", "y2"};
  for (int c = 0; c < 4; ++c) {
    coord_tables_[c] = store_.add(std::string("backbone.position_") + kCoordNames[c],
                                  {kCoordBuckets, d / 4}, Init::kNormal, init.backbone_init_std);
  }
  if (label_dim) label_table_ = store_.add("label_embedding", {kNumLabels, label_dim}, Init::kNormal, s);

  const size_t heads = config_.num_heads, ffn = config_.d_ffn, sh = config_.spatial_hidden;
  const bool bias = config_.use_spatial_bias;
  for (int l = 0; l < config_.num_encoder_layers; ++l) {
    const std::string p = "encoder." + std::to_string(l);
    encoder_.push_back({SpatialAttention(store_, p + ".attention", d, heads, sh, bias, s),
                        LayerNorm(store_, p + ".norm1", d),
                        FeedForward(store_, p + ".ffn", d, ffn, d, s),
                        LayerNorm(store_, p + ".norm2", d)});
  }
  for (int l = 0; l < config_.num_decoder_layers; ++l) {
    const std::string p = "decoder." + std::to_string(l);
    decoder_.push_back({SpatialAttention(store_, p + ".self_attention", d, heads, sh, bias, s),
                        LayerNorm(store_, p + ".norm1", d),
                        SpatialAttention(store_, p + ".cross_attention", d, heads, sh, bias, s),
                        LayerNorm(store_, p + ".norm2", d),
                        FeedForward(store_, p + ".ffn", d, ffn, d, s),
                        LayerNorm(store_, p + ".norm3", d)});
  }
  classifier_ = Linear(store_, "question_classifier", d, kNumLabels, s);
  coarse_.spatial = FeedForward(store_, "coarse_head.spatial", kSpatialFeatureDim, sh, d, s);
  coarse_.mlp = FeedForward(store_, "coarse_head.mlp", d, d, 1, s);
  fine_.spatial = FeedForward(store_, "fine_head.spatial", kSpatialFeatureDim, sh, d, s);
  // Softmax over candidates ignores a shared output offset.
  fine_.mlp = FeedForward(store_, "fine_head.mlp", d, d, 1, s, /*output_bias=*/false);
}

bool KvpModel::is_backbone(const std::string& name) { return name.rfind("backbone.", 0) == 0; }

EntityRepresentation KvpModel::embed(const DocumentFeatures& f) const {
  EntityRepresentation reps;
  Tensor tokens = embedding_lookup(token_table_, f.token_ids);
  reps.content = matmul(f.token_average, tokens);
  if (config_.use_gold_labels) {
    std::vector<int> labels;
    for (Label l : f.labels) labels.push_back(static_cast<int>(l));
    reps.content = concat({reps.content, embedding_lookup(label_table_, labels)}, 1);
  }
  std::vector<Tensor> parts;
  for (int c = 0; c < 4; ++c) parts.push_back(embedding_lookup(coord_tables_[c], f.coords[c]));
  reps.pos = concat(parts, 1);
  return reps;
}

Tensor KvpModel::encode(const EntityRepresentation& reps, const DocumentFeatures& f,
                        const Pass& pass) const {
  Tensor x = reps.content;
  for (const EncoderLayer& layer : encoder_) {
    AttentionInputs in{x, reps.pos, x, reps.pos, f.spatial};
    x = layer.norm1(add(x, pass.drop(layer.attention(in, pass))));
    x = layer.norm2(add(x, pass.drop(layer.ffn(x, pass))));
  }
  return x;
}

Tensor KvpModel::question_logits(const Tensor& encoded) const { return classifier_(encoded); }

Tensor KvpModel::decode(const Tensor& encoded, const EntityRepresentation& reps,
                        std::span<const int> questions, const DocumentFeatures& f,
                        const Pass& pass) const {
  const size_t n = f.size();
  Tensor q = embedding_lookup(encoded, questions);
  if (decoder_.empty()) return q;
  const Tensor q_pos = embedding_lookup(reps.pos, questions);
  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);
  Tensor self_r, cross_r;
  if (config_.use_spatial_bias) {
    self_r = embedding_lookup(f.spatial, pair_rows(questions, questions, n));
    cross_r = embedding_lookup(f.spatial, pair_rows(questions, all, n));
  }
  for (const DecoderLayer& layer : decoder_) {
    q = layer.norm1(add(q, pass.drop(layer.self_attention({q, q_pos, q, q_pos, self_r}, pass))));
    q = layer.norm2(add(q, pass.drop(
                               layer.cross_attention({q, q_pos, encoded, reps.pos, cross_r}, pass))));
    q = layer.norm3(add(q, pass.drop(layer.ffn(q, pass))));
  }
  return q;
}

Tensor KvpModel::PairHead::logits(const Tensor& q_rows, const Tensor& h_rows, const Tensor& r,
                                  const Pass& pass) const {
  return mlp(add(add(q_rows, h_rows), spatial(r, pass)), pass);
}

Tensor KvpModel::coarse_logits(const Tensor& decoded, const Tensor& encoded,
                               std::span<const int> questions, const DocumentFeatures& f) const {
  const size_t m = questions.size(), n = f.size();
  std::vector<int> q_idx, h_idx;
  for (size_t i = 0; i < m; ++i) {
    for (size_t j = 0; j < n; ++j) {
      q_idx.push_back(static_cast<int>(i));
      h_idx.push_back(static_cast<int>(j));
    }
  }
  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);
  Pass eval;
  Tensor t = coarse_.logits(embedding_lookup(decoded, q_idx), embedding_lookup(encoded, h_idx),
                            embedding_lookup(f.spatial, pair_rows(questions, all, n)), eval);
  return reshape(t, {m, n});
}

Tensor KvpModel::fine_logits(const Tensor& decoded, const Tensor& encoded,
                             std::span<const int> questions,
                             const std::vector<std::vector<int>>& candidates,
                             const DocumentFeatures& f) const {
  const size_t m = questions.size(), n = f.size();
  if (candidates.size() != m || m == 0 || candidates[0].empty()) {
    throw std::invalid_argument("fine_logits: need one non-empty candidate list per question");
  }
  const size_t k = candidates[0].size();
  std::vector<int> q_idx, h_idx, r_idx;
  for (size_t i = 0; i < m; ++i) {
    if (candidates[i].size() != k) throw std::invalid_argument("fine_logits: ragged candidate lists");
    for (int c : candidates[i]) {
      q_idx.push_back(static_cast<int>(i));
      h_idx.push_back(c);
      r_idx.push_back(static_cast<int>(questions[i] * n + c));
    }
  }
  Pass eval;
  Tensor t = fine_.logits(embedding_lookup(decoded, q_idx), embedding_lookup(encoded, h_idx),
                          embedding_lookup(f.spatial, r_idx), eval);
  return reshape(t, {m, k});
}

const SpatialAttention& KvpModel::encoder_attention(int layer) const {
  return encoder_.at(layer).attention;
}
const SpatialAttention& KvpModel::decoder_self_attention(int layer) const {
  return decoder_.at(layer).self_attention;
}
const SpatialAttention& KvpModel::decoder_cross_attention(int layer) const {
  return decoder_.at(layer).cross_attention;
}

ForwardOutputs KvpModel::forward(const DocumentFeatures& f, const ForwardOptions& options) const {
  ForwardOutputs out;
  const Pass& pass = options.pass;
  const EntityRepresentation reps = embed(f);
  out.encoded = encode(reps, f, pass);
  out.label_logits = question_logits(out.encoded);

  if (options.questions) {
    out.questions = *options.questions;
  } else if (config_.use_gold_labels) {
    out.questions = questions_from_labels(f.labels, config_.question_role);
  } else {
    std::vector<Label> predicted;
    auto lv = out.label_logits.values();
    for (size_t i = 0; i < f.size(); ++i) {
      predicted.push_back(static_cast<Label>(argmax(lv.subspan(i * kNumLabels, kNumLabels))));
    }
    out.questions = questions_from_labels(predicted, config_.question_role);
  }
  if (out.questions.empty()) return out;

  const size_t n = f.size();
  out.decoded = decode(out.encoded, reps, out.questions, f, pass);
  out.coarse_logits = coarse_logits(out.decoded, out.encoded, out.questions, f);

  auto cv = out.coarse_logits.values();
  std::vector<Real> row(n);
  for (size_t i = 0; i < out.questions.size(); ++i) {
    for (size_t j = 0; j < n; ++j) row[j] = sigmoid_value(cv[i * n + j]);
    std::vector<int> cand = topk_candidates(row, config_.top_k, out.questions[i]);
    if (options.force_gold && !cand.empty()) {
      const std::vector<int>& gold = (*options.force_gold)[i];
      const bool present = std::any_of(gold.begin(), gold.end(), [&](int g) {
        return std::find(cand.begin(), cand.end(), g) != cand.end();
      });
      if (!gold.empty() && !present) {
        int best = gold[0];
        for (int g : gold) {
          if (row[g] > row[best]) best = g;
        }
        cand.back() = best;
      }
    }
    out.candidates.push_back(std::move(cand));
  }
  if (config_.use_coarse_to_fine && !out.candidates[0].empty()) {
    out.fine_logits = fine_logits(out.decoded, out.encoded, out.questions, out.candidates, f);
  }
  return out;
}

// --- inference --------------------------------------------------------------

Prediction predict(const KvpModel& model, const Document& doc) {
  return predict(model, doc, featurize(doc, model.config()));
}

Prediction predict(const KvpModel& model, const Document& doc, const DocumentFeatures& f,
                   AttentionTrace* trace) {
  (void)doc;
  const ModelConfig& cfg = model.config();
  ForwardOptions options;
  options.pass.trace = trace;
  const ForwardOutputs out = model.forward(f, options);

  Prediction pred;
  const size_t n = f.size();
  Tensor probs = softmax(out.label_logits);
  for (size_t i = 0; i < n; ++i) {
    std::array<Real, kNumLabels> p;
    for (int c = 0; c < kNumLabels; ++c) p[c] = probs.at(i, c);
    pred.entity_labels.push_back(p);
  }
  if (out.questions.empty()) return pred;

  Tensor fine_probs;
  if (out.fine_logits.defined()) fine_probs = softmax(out.fine_logits);
  auto cv = out.coarse_logits.values();
  for (size_t i = 0; i < out.questions.size(); ++i) {
    const int q = out.questions[i];
    pred.question_ids.push_back(f.entity_ids[q]);
    std::vector<Real> coarse(n);
    for (size_t j = 0; j < n; ++j) coarse[j] = sigmoid_value(cv[i * n + j]);
    std::vector<int> cand_ids;
    for (int c : out.candidates[i]) cand_ids.push_back(f.entity_ids[c]);
    std::vector<Real> fine;
    if (fine_probs.defined()) {
      auto fv = fine_probs.values();
      const size_t k = out.candidates[i].size();
      fine.assign(fv.begin() + i * k, fv.begin() + (i + 1) * k);
    }

    int answer = -1;
    if (!out.candidates[i].empty()) {
      answer = cfg.use_coarse_to_fine ? select_answer(out.candidates[i], fine)
                                      : topk_candidates(coarse, 1, q).front();
    }
    if (answer >= 0 && coarse[answer] >= cfg.coarse_accept_threshold) {
      const int qid = f.entity_ids[q], aid = f.entity_ids[answer];
      pred.pairs.insert(cfg.question_role == QuestionRole::kAnswerAsQuestion
                            ? RelationPair{aid, qid}
                            : RelationPair{qid, aid});
    }
    pred.coarse_scores.push_back(std::move(coarse));
    pred.candidates.push_back(std::move(cand_ids));
    pred.fine_scores.push_back(std::move(fine));
  }
  return pred;
}

}  // namespace kvpf
