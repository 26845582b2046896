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

#ifndef KVPF_TENSOR_H_
#define KVPF_TENSOR_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace kvpf {

using Real = double;
using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

namespace internal {
struct Node;
}

// Dense row-major tensor that records the operations producing it. Tensors
// are cheap handles: copies share storage and graph position. A tensor built
// by an op from any requires_grad input also requires grad, and backward()
// on a scalar result propagates into every reachable leaf.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor full(const Shape& shape, Real value, bool requires_grad = false);
  static Tensor from(const Shape& shape, std::vector<Real> values,
                     bool requires_grad = false);
  static Tensor scalar(Real value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim() const { return shape().size(); }
  std::size_t size() const;
  // Leading extent of a matrix; rows()*cols() == size() for 1-D and 2-D.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const Real> values() const;
  std::span<Real> mutable_values();
  Real item() const;
  Real at(std::size_t i, std::size_t j) const;

  bool requires_grad() const;
  // Empty until a backward pass reaches this tensor.
  std::span<const Real> grad() const;
  std::span<Real> mutable_grad();
  void zero_grad();

  // Same values, cut from the graph.
  Tensor detach() const;

  const internal::Node* node() const { return node_.get(); }

 private:
  explicit Tensor(std::shared_ptr<internal::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<internal::Node> node_;

  friend struct internal::Node;
};

// Named trainable tensor.
struct Parameter {
  std::string name;
  Tensor tensor;
};

// Runs reverse-mode differentiation from a scalar. Leaf gradients accumulate
// across calls until zero_grad(). Throws std::invalid_argument on non-scalars.
void backward(const Tensor& loss);

// --- ops ------------------------------------------------------------------
// Shape errors throw std::invalid_argument naming the op and both shapes.

// [m,k] x [k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);
// Elementwise with suffix broadcasting: b may match a's shape, a trailing
// suffix of it (e.g. a bias row), or be a single element.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, Real factor);
// 2-D only; axis 0 stacks rows, axis 1 appends columns.
Tensor concat(const std::vector<Tensor>& parts, int axis);
// 2-D transpose.
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, const Shape& shape);
// Columns [begin, end) of a 2-D tensor.
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);
// Rows of `table` picked by index; out[i] = table[indices[i]].
Tensor embedding_lookup(const Tensor& table, std::span<const int> indices);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
// Normalizes along `axis`, which must be the last axis (-1 accepted).
Tensor softmax(const Tensor& a, int axis = -1);
Tensor log_softmax(const Tensor& a, int axis = -1);
// Normalizes along the last axis, then applies per-feature gain and bias.
Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias,
                  Real eps = 1e-5, int axis = -1);
// Inverted dropout; identity when !train or rate == 0.
Tensor dropout(const Tensor& a, Real rate, bool train, std::mt19937_64& rng);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// Mean over rows of -log softmax(logits)[row, target[row]]. Rows with a
// negative target are skipped; returns 0 when none remain.
Tensor cross_entropy(const Tensor& logits, std::span<const int> targets);
// Mean over all elements of BCE(sigmoid(logits), targets), computed in the
// numerically stable logit form.
Tensor bce_with_logits(const Tensor& logits, std::span<const Real> targets);

// Names of the differentiable ops; used by the op-by-op gradient tests and
// by fault injection.
std::vector<std::string> registered_ops();

namespace testing {
// Multiplies the gradient emitted by the named op's backward rule. Used to
// verify that the gradient checker catches a broken rule. Factor 1 restores.
void set_backward_fault(const std::string& op, Real factor);

// Running hash of the sign pattern of every relu input since the last reset.
// Two evaluations with equal signatures lie on the same linear piece of each
// relu.
void reset_kink_signature();
std::uint64_t kink_signature();
}  // namespace testing

}  // namespace kvpf

#endif  // KVPF_TENSOR_H_
