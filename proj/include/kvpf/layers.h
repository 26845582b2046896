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

#ifndef KVPF_LAYERS_H_
#define KVPF_LAYERS_H_

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "kvpf/tensor.h"

namespace kvpf {

// Owns every trainable tensor of a model under a unique dotted name.
class ParameterStore {
 public:
  enum class Init { kNormal, kZeros, kOnes };

  explicit ParameterStore(std::uint64_t seed) : rng_(seed) {}

  // Registers a new parameter. Normal init draws N(0, std^2).
  Tensor add(const std::string& name, const Shape& shape, Init init, Real std = 0.0);

  std::vector<Parameter>& params() { return params_; }
  const std::vector<Parameter>& params() const { return params_; }
  const Parameter* find(const std::string& name) const;
  Parameter* find(const std::string& name);
  void zero_grad();

 private:
  Real normal();

  std::mt19937_64 rng_;
  std::vector<Parameter> params_;
};

// Per-forward state: train mode, the dropout generator, and an optional sink
// for attention weights.
struct AttentionTrace {
  // One [queries, keys] row-stochastic matrix per head, in call order.
  std::vector<Tensor> weights;
};

struct Pass {
  bool train = false;
  Real dropout_rate = 0.0;
  std::mt19937_64* rng = nullptr;
  AttentionTrace* trace = nullptr;

  Tensor drop(const Tensor& t) const;
};

class Linear {
 public:
  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, std::size_t in,
         std::size_t out, Real init_std, bool with_bias = true);
  Tensor operator()(const Tensor& x) const;

  const Tensor& weight() const { return weight_; }
  const Tensor& bias() const { return bias_; }

 private:
  Tensor weight_;  // [in, out]
  Tensor bias_;    // [out], undefined without bias
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParameterStore& store, const std::string& name, std::size_t dim);
  Tensor operator()(const Tensor& x) const;

 private:
  Tensor gain_;
  Tensor bias_;
};

// Linear -> ReLU -> Linear.
class FeedForward {
 public:
  FeedForward() = default;
  FeedForward(ParameterStore& store, const std::string& name, std::size_t in,
              std::size_t hidden, std::size_t out, Real init_std,
              bool output_bias = true);
  Tensor operator()(const Tensor& x, const Pass& pass) const;

  const Linear& first() const { return first_; }
  const Linear& second() const { return second_; }

 private:
  Linear first_;
  Linear second_;
};

struct AttentionInputs {
  Tensor query_content;  // [M, d]
  Tensor query_pos;      // [M, d]
  Tensor key_content;    // [N, d]
  Tensor key_pos;        // [N, d]
  // [M*N, 18] spatial compatibility features, row i*N + j for (query i, key
  // j). Ignored when the layer has no spatial bias.
  Tensor spatial;
};

// Multi-head attention whose logits split into a content term, a 2-D
// position term and a learned per-head bias from the pairwise box features:
//   a_h(i,j) = (cq_i . ck_j + pq_i . pk_j) / sqrt(d_head) + ffn(r_ij)[h]
// Values come from key content only.
class SpatialAttention {
 public:
  SpatialAttention() = default;
  SpatialAttention(ParameterStore& store, const std::string& name,
                   std::size_t d_model, std::size_t num_heads,
                   std::size_t spatial_hidden, bool use_spatial_bias,
                   Real init_std);

  // Pre-softmax logits of one head, [M, N].
  Tensor scores(const AttentionInputs& in, std::size_t head) const;
  // Per-head bias term alone, [M, N].
  Tensor bias(const AttentionInputs& in, std::size_t head) const;
  Tensor operator()(const AttentionInputs& in, const Pass& pass) const;

  std::size_t num_heads() const { return num_heads_; }
  bool use_spatial_bias() const { return use_spatial_bias_; }

 private:
  struct Projected {
    Tensor qc, kc, qp, kp, bias;
  };
  Projected project(const AttentionInputs& in) const;
  Tensor head_scores(const Projected& p, std::size_t head, std::size_t m,
                     std::size_t n) const;

  std::size_t d_model_ = 0;
  std::size_t num_heads_ = 1;
  std::size_t d_head_ = 0;
  bool use_spatial_bias_ = true;
  Linear q_content_, k_content_, q_pos_, k_pos_, value_, out_;
  FeedForward bias_ffn_;
};

}  // namespace kvpf

#endif  // KVPF_LAYERS_H_
