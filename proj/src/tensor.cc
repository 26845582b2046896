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

#include "kvpf/tensor.h"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace kvpf {
namespace internal {

struct Node {
  const char* op = "leaf";
  Shape shape;
  std::vector<Real> value;
  std::vector<Real> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  std::vector<Real>& ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }

  static Tensor wrap(std::shared_ptr<Node> n) { return Tensor(std::move(n)); }
  static const std::shared_ptr<Node>& unwrap(const Tensor& t) { return t.node_; }
};

}  // namespace internal

using internal::Node;

namespace {

std::string g_fault_op;
Real g_fault_factor = 1.0;
std::uint64_t g_kink_signature = 0;

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  std::ostringstream msg;
  msg << op << ": incompatible shapes " << shape_string(a) << " and "
      << shape_string(b);
  throw std::invalid_argument(msg.str());
}

[[noreturn]] void shape_error(const char* op, const Shape& a,
                              const std::string& what) {
  std::ostringstream msg;
  msg << op << ": shape " << shape_string(a) << " " << what;
  throw std::invalid_argument(msg.str());
}

const Node& N(const Tensor& t) {
  if (!t.defined()) throw std::invalid_argument("operation on undefined tensor");
  return *Node::unwrap(t);
}

// Builds an op result. The backward rule is only kept when some input needs
// gradients.
Tensor make(const char* op, Shape shape, std::vector<Real> value,
            std::vector<Tensor> inputs, std::function<void(Node&)> rule) {
  auto node = std::make_shared<Node>();
  node->op = op;
  node->shape = std::move(shape);
  node->value = std::move(value);
  for (const Tensor& t : inputs) {
    if (N(t).requires_grad) node->requires_grad = true;
  }
  if (node->requires_grad) {
    for (const Tensor& t : inputs) node->inputs.push_back(Node::unwrap(t));
    node->backward_fn = std::move(rule);
  }
  return Node::wrap(std::move(node));
}

// Gradient buffer of input i, or nullptr if that input does not need one.
std::vector<Real>* in_grad(Node& self, size_t i) {
  Node& in = *self.inputs[i];
  if (!in.requires_grad) return nullptr;
  return &in.ensure_grad();
}

size_t last_axis(const char* op, const Tensor& a, int axis) {
  const int d = static_cast<int>(a.dim());
  if (d == 0) shape_error(op, a.shape(), "has no axes");
  if (axis != -1 && axis != d - 1) {
    shape_error(op, a.shape(), "supports only the last axis, got axis " +
                                   std::to_string(axis));
  }
  return a.shape().back();
}

void check_2d(const char* op, const Tensor& a) {
  if (a.dim() != 2) shape_error(op, a.shape(), "is not 2-D");
}

// b broadcasts into a when it matches a or a trailing suffix of a's shape, or
// is a single element.
void check_broadcast(const char* op, const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (b.size() == 1) return;
  if (sb.size() > sa.size()) shape_error(op, sa, sb);
  if (!std::equal(sb.begin(), sb.end(), sa.end() - sb.size())) shape_error(op, sa, sb);
}

}  // namespace

std::string shape_string(const Shape& shape) {
  std::ostringstream s;
  s << "[";
  for (size_t i = 0; i < shape.size(); ++i) s << (i ? "," : "") << shape[i];
  s << "]";
  return s.str();
}

std::size_t shape_size(const Shape& shape) {
  size_t n = 1;
  for (size_t d : shape) n *= d;
  return n;
}

// --- Tensor ---------------------------------------------------------------

Tensor Tensor::from(const Shape& shape, std::vector<Real> values,
                    bool requires_grad) {
  for (size_t d : shape) {
    if (d == 0) throw std::invalid_argument("tensor: zero extent in " + shape_string(shape));
  }
  if (values.size() != shape_size(shape)) {
    throw std::invalid_argument("tensor: " + std::to_string(values.size()) +
                                " values for shape " + shape_string(shape));
  }
  auto node = std::make_shared<Node>();
  node->shape = shape;
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
  return from(shape, std::vector<Real>(shape_size(shape), 0.0), requires_grad);
}

Tensor Tensor::full(const Shape& shape, Real value, bool requires_grad) {
  return from(shape, std::vector<Real>(shape_size(shape), value), requires_grad);
}

Tensor Tensor::scalar(Real value) { return from({1}, {value}); }

const Shape& Tensor::shape() const { return N(*this).shape; }
std::size_t Tensor::size() const { return N(*this).value.size(); }

std::size_t Tensor::rows() const {
  const Shape& s = shape();
  return s.size() >= 2 ? s[0] : 1;
}

std::size_t Tensor::cols() const {
  const Shape& s = shape();
  if (s.empty()) return 1;
  return s.size() >= 2 ? size() / s[0] : s[0];
}

std::span<const Real> Tensor::values() const { return N(*this).value; }
std::span<Real> Tensor::mutable_values() { return Node::unwrap(*this)->value; }

Real Tensor::item() const {
  if (size() != 1) shape_error("item", shape(), "is not a scalar");
  return values()[0];
}

Real Tensor::at(std::size_t i, std::size_t j) const {
  return values()[i * cols() + j];
}

bool Tensor::requires_grad() const { return N(*this).requires_grad; }
std::span<const Real> Tensor::grad() const { return N(*this).grad; }

std::span<Real> Tensor::mutable_grad() {
  return Node::unwrap(*this)->ensure_grad();
}

void Tensor::zero_grad() {
  auto& g = Node::unwrap(*this)->grad;
  std::fill(g.begin(), g.end(), 0.0);
}

Tensor Tensor::detach() const { return from(shape(), N(*this).value, false); }

// --- backward ---------------------------------------------------------------

void backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw std::invalid_argument("backward: loss must be a scalar, got shape " +
                                shape_string(loss.shape()));
  }
  Node* root = Node::unwrap(loss).get();
  if (!root->requires_grad) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack{{root, 0}};
  seen.insert(root);
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->inputs.size()) {
      Node* child = n->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  // Interior gradients are per pass; leaves accumulate.
  for (Node* n : order) {
    if (n->backward_fn) n->grad.assign(n->value.size(), 0.0);
  }
  root->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (!n->backward_fn) continue;
    if (g_fault_factor != 1.0 && g_fault_op == n->op) {
      for (Real& g : n->grad) g *= g_fault_factor;
    }
    n->backward_fn(*n);
  }
}

// --- ops --------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_2d("matmul", a);
  check_2d("matmul", b);
  const size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) shape_error("matmul", a.shape(), b.shape());
  std::vector<Real> out(m * n, 0.0);
  auto av = a.values(), bv = b.values();
  for (size_t i = 0; i < m; ++i) {
    Real* row = &out[i * n];
    for (size_t p = 0; p < k; ++p) {
      const Real s = av[i * k + p];
      if (s == 0.0) continue;
      const Real* brow = &bv[p * n];
      for (size_t j = 0; j < n; ++j) row[j] += s * brow[j];
    }
  }
  return make("matmul", {m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    const auto& g = self.grad;
    const auto& av = self.inputs[0]->value;
    const auto& bv = self.inputs[1]->value;
    if (auto* ga = in_grad(self, 0)) {
      for (size_t i = 0; i < m; ++i) {
        for (size_t p = 0; p < k; ++p) {
          Real s = 0.0;
          for (size_t j = 0; j < n; ++j) s += g[i * n + j] * bv[p * n + j];
          (*ga)[i * k + p] += s;
        }
      }
    }
    if (auto* gb = in_grad(self, 1)) {
      for (size_t i = 0; i < m; ++i) {
        for (size_t p = 0; p < k; ++p) {
          const Real s = av[i * k + p];
          if (s == 0.0) continue;
          for (size_t j = 0; j < n; ++j) (*gb)[p * n + j] += s * g[i * n + j];
        }
      }
    }
  });
}

namespace {

Tensor add_like(const char* op, const Tensor& a, const Tensor& b, Real sign) {
  check_broadcast(op, a, b);
  const size_t nb = b.size();
  auto av = a.values(), bv = b.values();
  std::vector<Real> out(av.begin(), av.end());
  for (size_t i = 0; i < out.size(); ++i) out[i] += sign * bv[i % nb];
  return make(op, a.shape(), std::move(out), {a, b}, [nb, sign](Node& self) {
    const auto& g = self.grad;
    if (auto* ga = in_grad(self, 0)) {
      for (size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
    }
    if (auto* gb = in_grad(self, 1)) {
      for (size_t i = 0; i < g.size(); ++i) (*gb)[i % nb] += sign * g[i];
    }
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return add_like("add", a, b, 1.0); }
Tensor sub(const Tensor& a, const Tensor& b) { return add_like("sub", a, b, -1.0); }

Tensor mul(const Tensor& a, const Tensor& b) {
  check_broadcast("mul", a, b);
  const size_t nb = b.size();
  auto av = a.values(), bv = b.values();
  std::vector<Real> out(av.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i % nb];
  return make("mul", a.shape(), std::move(out), {a, b}, [nb](Node& self) {
    const auto& g = self.grad;
    const auto& av = self.inputs[0]->value;
    const auto& bv = self.inputs[1]->value;
    if (auto* ga = in_grad(self, 0)) {
      for (size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * bv[i % nb];
    }
    if (auto* gb = in_grad(self, 1)) {
      for (size_t i = 0; i < g.size(); ++i) (*gb)[i % nb] += g[i] * av[i];
    }
  });
}

Tensor scale(const Tensor& a, Real factor) {
  auto av = a.values();
  std::vector<Real> out(av.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] * factor;
  return make("scale", a.shape(), std::move(out), {a}, [factor](Node& self) {
    auto* ga = in_grad(self, 0);
    for (size_t i = 0; i < self.grad.size(); ++i) (*ga)[i] += self.grad[i] * factor;
  });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  if (axis != 0 && axis != 1) {
    throw std::invalid_argument("concat: axis must be 0 or 1, got " + std::to_string(axis));
  }
  for (const Tensor& t : parts) check_2d("concat", t);
  const Shape& s0 = parts[0].shape();
  size_t total = 0;
  for (const Tensor& t : parts) {
    const size_t other = axis == 0 ? 1 : 0;
    if (t.shape()[other] != s0[other]) shape_error("concat", s0, t.shape());
    total += t.shape()[axis];
  }
  const size_t rows = axis == 0 ? total : s0[0];
  const size_t cols = axis == 0 ? s0[1] : total;
  std::vector<Real> out(rows * cols);
  std::vector<size_t> offsets;
  size_t off = 0;
  for (const Tensor& t : parts) {
    offsets.push_back(off);
    auto v = t.values();
    const size_t r = t.shape()[0], c = t.shape()[1];
    for (size_t i = 0; i < r; ++i) {
      for (size_t j = 0; j < c; ++j) {
        if (axis == 0) out[(off + i) * cols + j] = v[i * c + j];
        else out[i * cols + off + j] = v[i * c + j];
      }
    }
    off += t.shape()[axis];
  }
  return make("concat", {rows, cols}, std::move(out), parts,
              [axis, cols, offsets](Node& self) {
                for (size_t p = 0; p < self.inputs.size(); ++p) {
                  auto* gp = in_grad(self, p);
                  if (!gp) continue;
                  const size_t r = self.inputs[p]->shape[0];
                  const size_t c = self.inputs[p]->shape[1];
                  for (size_t i = 0; i < r; ++i) {
                    for (size_t j = 0; j < c; ++j) {
                      (*gp)[i * c + j] += axis == 0
                                              ? self.grad[(offsets[p] + i) * cols + j]
                                              : self.grad[i * cols + offsets[p] + j];
                    }
                  }
                }
              });
}

Tensor transpose(const Tensor& a) {
  check_2d("transpose", a);
  const size_t r = a.shape()[0], c = a.shape()[1];
  auto av = a.values();
  std::vector<Real> out(r * c);
  for (size_t i = 0; i < r; ++i) {
    for (size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
  }
  return make("transpose", {c, r}, std::move(out), {a}, [r, c](Node& self) {
    auto* ga = in_grad(self, 0);
    for (size_t i = 0; i < r; ++i) {
      for (size_t j = 0; j < c; ++j) (*ga)[i * c + j] += self.grad[j * r + i];
    }
  });
}

Tensor reshape(const Tensor& a, const Shape& shape) {
  if (shape_size(shape) != a.size()) shape_error("reshape", a.shape(), shape);
  auto av = a.values();
  return make("reshape", shape, std::vector<Real>(av.begin(), av.end()), {a},
              [](Node& self) {
                auto* ga = in_grad(self, 0);
                for (size_t i = 0; i < self.grad.size(); ++i) (*ga)[i] += self.grad[i];
              });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  check_2d("slice_cols", a);
  const size_t r = a.shape()[0], c = a.shape()[1];
  if (begin >= end || end > c) {
    shape_error("slice_cols", a.shape(),
                "cannot slice columns [" + std::to_string(begin) + "," +
                    std::to_string(end) + ")");
  }
  const size_t w = end - begin;
  auto av = a.values();
  std::vector<Real> out(r * w);
  for (size_t i = 0; i < r; ++i) {
    for (size_t j = 0; j < w; ++j) out[i * w + j] = av[i * c + begin + j];
  }
  return make("slice_cols", {r, w}, std::move(out), {a}, [r, c, w, begin](Node& self) {
    auto* ga = in_grad(self, 0);
    for (size_t i = 0; i < r; ++i) {
      for (size_t j = 0; j < w; ++j) (*ga)[i * c + begin + j] += self.grad[i * w + j];
    }
  });
}

Tensor embedding_lookup(const Tensor& table, std::span<const int> indices) {
  check_2d("embedding_lookup", table);
  if (indices.empty()) shape_error("embedding_lookup", table.shape(), "looked up with no indices");
  const size_t v = table.shape()[0], d = table.shape()[1];
  std::vector<int> idx(indices.begin(), indices.end());
  for (int i : idx) {
    if (i < 0 || static_cast<size_t>(i) >= v) {
      shape_error("embedding_lookup", table.shape(), "indexed out of range by " + std::to_string(i));
    }
  }
  auto tv = table.values();
  std::vector<Real> out(idx.size() * d);
  for (size_t r = 0; r < idx.size(); ++r) {
    std::copy_n(&tv[idx[r] * d], d, &out[r * d]);
  }
  const size_t rows = idx.size();
  return make("embedding_lookup", {rows, d}, std::move(out), {table},
              [idx = std::move(idx), d](Node& self) {
                auto* gt = in_grad(self, 0);
                for (size_t r = 0; r < idx.size(); ++r) {
                  for (size_t j = 0; j < d; ++j) (*gt)[idx[r] * d + j] += self.grad[r * d + j];
                }
              });
}

Tensor relu(const Tensor& a) {
  auto av = a.values();
  std::vector<Real> out(av.size());
  std::uint64_t h = g_kink_signature;
  for (size_t i = 0; i < out.size(); ++i) {
    out[i] = av[i] > 0 ? av[i] : 0.0;
    h = (h ^ (av[i] > 0 ? 0x9e37u : 0x7f4au)) * 0x100000001b3ull;
  }
  g_kink_signature = h;
  return make("relu", a.shape(), std::move(out), {a}, [](Node& self) {
    auto* ga = in_grad(self, 0);
    const auto& x = self.inputs[0]->value;
    for (size_t i = 0; i < x.size(); ++i) {
      if (x[i] > 0) (*ga)[i] += self.grad[i];
    }
  });
}

Tensor sigmoid(const Tensor& a) {
  auto av = a.values();
  std::vector<Real> out(av.size());
  for (size_t i = 0; i < out.size(); ++i) {
    const Real x = av[i];
    out[i] = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  }
  return make("sigmoid", a.shape(), std::move(out), {a}, [](Node& self) {
    auto* ga = in_grad(self, 0);
    for (size_t i = 0; i < self.value.size(); ++i) {
      const Real y = self.value[i];
      (*ga)[i] += self.grad[i] * y * (1.0 - y);
    }
  });
}

Tensor softmax(const Tensor& a, int axis) {
  const size_t d = last_axis("softmax", a, axis);
  const size_t rows = a.size() / d;
  auto av = a.values();
  std::vector<Real> out(av.size());
  for (size_t r = 0; r < rows; ++r) {
    const Real* x = &av[r * d];
    Real* y = &out[r * d];
    const Real mx = *std::max_element(x, x + d);
    Real z = 0.0;
    for (size_t j = 0; j < d; ++j) z += (y[j] = std::exp(x[j] - mx));
    for (size_t j = 0; j < d; ++j) y[j] /= z;
  }
  return make("softmax", a.shape(), std::move(out), {a}, [rows, d](Node& self) {
    auto* ga = in_grad(self, 0);
    for (size_t r = 0; r < rows; ++r) {
      const Real* y = &self.value[r * d];
      const Real* g = &self.grad[r * d];
      Real dot = 0.0;
      for (size_t j = 0; j < d; ++j) dot += g[j] * y[j];
      for (size_t j = 0; j < d; ++j) (*ga)[r * d + j] += y[j] * (g[j] - dot);
    }
  });
}

Tensor log_softmax(const Tensor& a, int axis) {
  const size_t d = last_axis("log_softmax", a, axis);
  const size_t rows = a.size() / d;
  auto av = a.values();
  std::vector<Real> out(av.size());
  for (size_t r = 0; r < rows; ++r) {
    const Real* x = &av[r * d];
    const Real mx = *std::max_element(x, x + d);
    Real z = 0.0;
    for (size_t j = 0; j < d; ++j) z += std::exp(x[j] - mx);
    const Real lse = mx + std::log(z);
    for (size_t j = 0; j < d; ++j) out[r * d + j] = x[j] - lse;
  }
  return make("log_softmax", a.shape(), std::move(out), {a}, [rows, d](Node& self) {
    auto* ga = in_grad(self, 0);
    for (size_t r = 0; r < rows; ++r) {
      const Real* g = &self.grad[r * d];
      Real total = 0.0;
      for (size_t j = 0; j < d; ++j) total += g[j];
      for (size_t j = 0; j < d; ++j) {
        (*ga)[r * d + j] += g[j] - std::exp(self.value[r * d + j]) * total;
      }
    }
  });
}

Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias,
                  Real eps, int axis) {
  const size_t d = last_axis("layer_norm", a, axis);
  if (gain.size() != d) shape_error("layer_norm", a.shape(), gain.shape());
  if (bias.size() != d) shape_error("layer_norm", a.shape(), bias.shape());
  const size_t rows = a.size() / d;
  auto av = a.values(), gv = gain.values(), bv = bias.values();
  std::vector<Real> out(av.size()), xhat(av.size()), inv_std(rows);
  for (size_t r = 0; r < rows; ++r) {
    const Real* x = &av[r * d];
    Real mu = 0.0;
    for (size_t j = 0; j < d; ++j) mu += x[j];
    mu /= d;
    Real var = 0.0;
    for (size_t j = 0; j < d; ++j) var += (x[j] - mu) * (x[j] - mu);
    var /= d;
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (size_t j = 0; j < d; ++j) {
      xhat[r * d + j] = (x[j] - mu) * inv_std[r];
      out[r * d + j] = xhat[r * d + j] * gv[j] + bv[j];
    }
  }
  return make("layer_norm", a.shape(), std::move(out), {a, gain, bias},
              [rows, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
                const auto& g = self.grad;
                const auto& gv = self.inputs[1]->value;
                if (auto* gg = in_grad(self, 1)) {
                  for (size_t i = 0; i < g.size(); ++i) (*gg)[i % d] += g[i] * xhat[i];
                }
                if (auto* gb = in_grad(self, 2)) {
                  for (size_t i = 0; i < g.size(); ++i) (*gb)[i % d] += g[i];
                }
                if (auto* ga = in_grad(self, 0)) {
                  for (size_t r = 0; r < rows; ++r) {
                    Real m1 = 0.0, m2 = 0.0;
                    for (size_t j = 0; j < d; ++j) {
                      const Real dx = g[r * d + j] * gv[j];
                      m1 += dx;
                      m2 += dx * xhat[r * d + j];
                    }
                    m1 /= d;
                    m2 /= d;
                    for (size_t j = 0; j < d; ++j) {
                      const Real dx = g[r * d + j] * gv[j];
                      (*ga)[r * d + j] += inv_std[r] * (dx - m1 - xhat[r * d + j] * m2);
                    }
                  }
                }
              });
}

Tensor dropout(const Tensor& a, Real rate, bool train, std::mt19937_64& rng) {
  if (!train || rate <= 0.0) return a;
  if (rate >= 1.0) throw std::invalid_argument("dropout: rate must be below 1");
  const Real keep = 1.0 - rate;
  auto av = a.values();
  std::vector<Real> mask(av.size()), out(av.size());
  for (size_t i = 0; i < av.size(); ++i) {
    // 53-bit uniform in [0,1), independent of the standard library.
    const Real u = static_cast<Real>(rng() >> 11) * 0x1.0p-53;
    mask[i] = u < keep ? 1.0 / keep : 0.0;
    out[i] = av[i] * mask[i];
  }
  return make("dropout", a.shape(), std::move(out), {a}, [mask = std::move(mask)](Node& self) {
    auto* ga = in_grad(self, 0);
    for (size_t i = 0; i < mask.size(); ++i) (*ga)[i] += self.grad[i] * mask[i];
  });
}

Tensor sum(const Tensor& a) {
  Real s = 0.0;
  for (Real v : a.values()) s += v;
  return make("sum", {1}, {s}, {a}, [](Node& self) {
    auto* ga = in_grad(self, 0);
    for (Real& g : *ga) g += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  const Real n = static_cast<Real>(a.size());
  Real s = 0.0;
  for (Real v : a.values()) s += v;
  return make("mean", {1}, {s / n}, {a}, [n](Node& self) {
    auto* ga = in_grad(self, 0);
    for (Real& g : *ga) g += self.grad[0] / n;
  });
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> targets) {
  check_2d("cross_entropy", logits);
  const size_t rows = logits.shape()[0], d = logits.shape()[1];
  if (targets.size() != rows) {
    shape_error("cross_entropy", logits.shape(),
                "does not match " + std::to_string(targets.size()) + " targets");
  }
  std::vector<int> tgt(targets.begin(), targets.end());
  auto lv = logits.values();
  std::vector<Real> probs(lv.size());
  Real total = 0.0;
  size_t count = 0;
  for (size_t r = 0; r < rows; ++r) {
    const Real* x = &lv[r * d];
    const Real mx = *std::max_element(x, x + d);
    Real z = 0.0;
    for (size_t j = 0; j < d; ++j) z += (probs[r * d + j] = std::exp(x[j] - mx));
    for (size_t j = 0; j < d; ++j) probs[r * d + j] /= z;
    if (tgt[r] < 0) continue;
    if (static_cast<size_t>(tgt[r]) >= d) {
      shape_error("cross_entropy", logits.shape(), "has no class " + std::to_string(tgt[r]));
    }
    total += mx + std::log(z) - x[tgt[r]];
    ++count;
  }
  const Real value = count ? total / count : 0.0;
  return make("cross_entropy", {1}, {value}, {logits},
              [tgt = std::move(tgt), probs = std::move(probs), d, count](Node& self) {
                if (!count) return;
                auto* gl = in_grad(self, 0);
                const Real g = self.grad[0] / count;
                for (size_t r = 0; r < tgt.size(); ++r) {
                  if (tgt[r] < 0) continue;
                  for (size_t j = 0; j < d; ++j) {
                    const Real onehot = static_cast<int>(j) == tgt[r] ? 1.0 : 0.0;
                    (*gl)[r * d + j] += g * (probs[r * d + j] - onehot);
                  }
                }
              });
}

Tensor bce_with_logits(const Tensor& logits, std::span<const Real> targets) {
  if (targets.size() != logits.size()) {
    shape_error("bce_with_logits", logits.shape(),
                "does not match " + std::to_string(targets.size()) + " targets");
  }
  std::vector<Real> tgt(targets.begin(), targets.end());
  auto lv = logits.values();
  Real total = 0.0;
  for (size_t i = 0; i < lv.size(); ++i) {
    const Real x = lv[i];
    total += std::max(x, 0.0) - x * tgt[i] + std::log1p(std::exp(-std::abs(x)));
  }
  const Real n = static_cast<Real>(lv.size());
  return make("bce_with_logits", {1}, {total / n}, {logits},
              [tgt = std::move(tgt), n](Node& self) {
                auto* gl = in_grad(self, 0);
                const auto& x = self.inputs[0]->value;
                for (size_t i = 0; i < x.size(); ++i) {
                  const Real s = x[i] >= 0 ? 1.0 / (1.0 + std::exp(-x[i]))
                                           : std::exp(x[i]) / (1.0 + std::exp(x[i]));
                  (*gl)[i] += self.grad[0] * (s - tgt[i]) / n;
                }
              });
}

std::vector<std::string> registered_ops() {
  return {"matmul",      "add",        "sub",       "mul",
          "scale",       "concat",     "transpose", "reshape",
          "slice_cols",  "embedding_lookup",        "relu",
          "sigmoid",     "softmax",    "log_softmax", "layer_norm",
          "dropout",     "sum",        "mean",      "cross_entropy",
          "bce_with_logits"};
}

namespace testing {

void set_backward_fault(const std::string& op, Real factor) {
  g_fault_op = op;
  g_fault_factor = factor;
}

void reset_kink_signature() { g_kink_signature = 0xcbf29ce484222325ull; }
std::uint64_t kink_signature() { return g_kink_signature; }

}  // namespace testing
}  // namespace kvpf
