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

#include "kvpf/layers.h"

#include <cmath>
#include <stdexcept>

namespace kvpf {

Tensor ParameterStore::add(const std::string& name, const Shape& shape,
                           Init init, Real std) {
  if (find(name)) throw std::invalid_argument("duplicate parameter name " + name);
  std::vector<Real> values(shape_size(shape), init == Init::kOnes ? 1.0 : 0.0);
  if (init == Init::kNormal) {
    for (Real& v : values) v = std * normal();
  }
  Tensor t = Tensor::from(shape, std::move(values), /*requires_grad=*/true);
  params_.push_back({name, t});
  return t;
}

const Parameter* ParameterStore::find(const std::string& name) const {
  for (const Parameter& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

Parameter* ParameterStore::find(const std::string& name) {
  for (Parameter& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

void ParameterStore::zero_grad() {
  for (Parameter& p : params_) p.tensor.zero_grad();
}

// Box-Muller over raw 53-bit draws so initial weights do not depend on the
// standard library's distribution implementation.
Real ParameterStore::normal() {
  auto uniform = [this] { return (static_cast<Real>(rng_() >> 11) + 0.5) * 0x1.0p-53; };
  const Real u1 = uniform(), u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

Tensor Pass::drop(const Tensor& t) const {
  if (!train || dropout_rate <= 0.0 || rng == nullptr) return t;
  return dropout(t, dropout_rate, true, *rng);
}

Linear::Linear(ParameterStore& store, const std::string& name, std::size_t in,
               std::size_t out, Real init_std, bool with_bias) {
  weight_ = store.add(name + ".weight", {in, out}, ParameterStore::Init::kNormal, init_std);
  if (with_bias) bias_ = store.add(name + ".bias", {out}, ParameterStore::Init::kZeros);
}

Tensor Linear::operator()(const Tensor& x) const {
  Tensor y = matmul(x, weight_);
  return bias_.defined() ? add(y, bias_) : y;
}

LayerNorm::LayerNorm(ParameterStore& store, const std::string& name, std::size_t dim) {
  gain_ = store.add(name + ".gain", {dim}, ParameterStore::Init::kOnes);
  bias_ = store.add(name + ".bias", {dim}, ParameterStore::Init::kZeros);
}

Tensor LayerNorm::operator()(const Tensor& x) const { return layer_norm(x, gain_, bias_); }

FeedForward::FeedForward(ParameterStore& store, const std::string& name,
                         std::size_t in, std::size_t hidden, std::size_t out,
                         Real init_std, bool output_bias)
    : first_(store, name + ".0", in, hidden, init_std),
      second_(store, name + ".1", hidden, out, init_std, output_bias) {}

Tensor FeedForward::operator()(const Tensor& x, const Pass& pass) const {
  return second_(pass.drop(relu(first_(x))));
}

SpatialAttention::SpatialAttention(ParameterStore& store, const std::string& name,
                                   std::size_t d_model, std::size_t num_heads,
                                   std::size_t spatial_hidden, bool use_spatial_bias,
                                   Real init_std)
    : d_model_(d_model),
      num_heads_(num_heads),
      d_head_(d_model / num_heads),
      use_spatial_bias_(use_spatial_bias) {
  if (num_heads == 0 || d_model % num_heads != 0) {
    throw std::invalid_argument(name + ": d_model " + std::to_string(d_model) +
                                " not divisible by " + std::to_string(num_heads) + " heads");
  }
  // Key projections carry no bias: a key bias only shifts every logit of a
  // row by the same amount.
  q_content_ = Linear(store, name + ".q_content", d_model, d_model, init_std);
  k_content_ = Linear(store, name + ".k_content", d_model, d_model, init_std, false);
  q_pos_ = Linear(store, name + ".q_pos", d_model, d_model, init_std);
  k_pos_ = Linear(store, name + ".k_pos", d_model, d_model, init_std, false);
  value_ = Linear(store, name + ".value", d_model, d_model, init_std);
  out_ = Linear(store, name + ".out", d_model, d_model, init_std);
  if (use_spatial_bias_) {
    // Same row-shift argument for the output bias of the bias network.
    bias_ffn_ = FeedForward(store, name + ".spatial_bias", 18, spatial_hidden,
                            num_heads, init_std, /*output_bias=*/false);
  }
}

SpatialAttention::Projected SpatialAttention::project(const AttentionInputs& in) const {
  Projected p;
  p.qc = q_content_(in.query_content);
  p.kc = k_content_(in.key_content);
  p.qp = q_pos_(in.query_pos);
  p.kp = k_pos_(in.key_pos);
  if (use_spatial_bias_) {
    const size_t m = in.query_content.rows(), n = in.key_content.rows();
    if (!in.spatial.defined() || in.spatial.rows() != m * n) {
      throw std::invalid_argument("attention: spatial features must have " +
                                  std::to_string(m * n) + " rows");
    }
    Pass eval;
    p.bias = bias_ffn_(in.spatial, eval);
  }
  return p;
}

Tensor SpatialAttention::head_scores(const Projected& p, std::size_t head,
                                     std::size_t m, std::size_t n) const {
  const size_t b = head * d_head_, e = b + d_head_;
  Tensor content = matmul(slice_cols(p.qc, b, e), transpose(slice_cols(p.kc, b, e)));
  Tensor position = matmul(slice_cols(p.qp, b, e), transpose(slice_cols(p.kp, b, e)));
  Tensor logits = scale(add(content, position), 1.0 / std::sqrt(static_cast<Real>(d_head_)));
  if (!use_spatial_bias_) return logits;
  return add(logits, reshape(slice_cols(p.bias, head, head + 1), {m, n}));
}

Tensor SpatialAttention::scores(const AttentionInputs& in, std::size_t head) const {
  return head_scores(project(in), head, in.query_content.rows(), in.key_content.rows());
}

Tensor SpatialAttention::bias(const AttentionInputs& in, std::size_t head) const {
  const size_t m = in.query_content.rows(), n = in.key_content.rows();
  if (!use_spatial_bias_) return Tensor::zeros({m, n});
  return reshape(slice_cols(project(in).bias, head, head + 1), {m, n});
}

Tensor SpatialAttention::operator()(const AttentionInputs& in, const Pass& pass) const {
  const size_t m = in.query_content.rows(), n = in.key_content.rows();
  const Projected p = project(in);
  const Tensor values = value_(in.key_content);
  std::vector<Tensor> heads;
  heads.reserve(num_heads_);
  for (size_t h = 0; h < num_heads_; ++h) {
    Tensor weights = softmax(head_scores(p, h, m, n));
    if (pass.trace) pass.trace->weights.push_back(weights.detach());
    heads.push_back(matmul(weights, slice_cols(values, h * d_head_, (h + 1) * d_head_)));
  }
  Tensor merged = num_heads_ == 1 ? heads[0] : concat(heads, 1);
  return out_(merged);
}

}  // namespace kvpf
