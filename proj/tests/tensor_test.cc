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

#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "kvpf/gradcheck.h"
#include "kvpf/tensor.h"
#include "test_util.h"

namespace kvpf {
namespace {

using test::random_tensor;

TEST_CASE("tensor construction checks shapes") {
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1, 2, 3}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor::from({0, 2}, {}), std::invalid_argument);
  const Tensor t = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(t.at(1, 2) == 6);
}

TEST_CASE("shape errors name the op and both shapes") {
  const Tensor a = Tensor::zeros({2, 3}), b = Tensor::zeros({2, 3});
  try {
    matmul(a, b);
    FAIL("no error");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("matmul") != std::string::npos);
    CHECK(msg.find("[2,3]") != std::string::npos);
  }
  CHECK_THROWS_AS(add(a, Tensor::zeros({3, 2})), std::invalid_argument);
}

TEST_CASE("softmax and sigmoid closed forms") {
  const Tensor s = softmax(Tensor::from({2}, {0.0, 0.0}));
  CHECK(s.values()[0] == doctest::Approx(0.5));
  const Tensor t = softmax(Tensor::from({2}, {std::log(2.0), 0.0}));
  CHECK(t.values()[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(t.values()[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(sigmoid(Tensor::scalar(0.0)).item() == 0.5);
  // Large logits do not overflow.
  const Tensor big = softmax(Tensor::from({3}, {1000.0, 999.0, -1000.0}));
  for (Real v : big.values()) CHECK(std::isfinite(v));
}

TEST_CASE("softmax rows are distributions") {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 50; ++t) {
    const size_t r = test::uniform_int(rng, 1, 6), c = test::uniform_int(rng, 1, 9);
    const Tensor s = softmax(random_tensor(rng, {r, c}, 20.0));
    for (size_t i = 0; i < r; ++i) {
      Real total = 0;
      for (size_t j = 0; j < c; ++j) {
        CHECK(s.at(i, j) > 0.0);
        CHECK(s.at(i, j) <= 1.0);
        total += s.at(i, j);
      }
      CHECK(std::abs(total - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("backward basics") {
  Tensor x = Tensor::from({3}, {1, 2, 3}, true);
  backward(sum(mul(x, x)));
  CHECK(std::vector<Real>(x.grad().begin(), x.grad().end()) == std::vector<Real>{2, 4, 6});

  Tensor p = Tensor::from({1}, {4.0}, true);
  backward(p);
  CHECK(p.grad()[0] == 1.0);

  // A tensor used twice collects both contributions.
  Tensor z = Tensor::from({2}, {1.0, -2.0}, true);
  backward(sum(add(z, z)));
  CHECK(z.grad()[0] == 2.0);
  CHECK(z.grad()[1] == 2.0);

  // Leaf gradients accumulate across passes until zeroed.
  backward(sum(z));
  CHECK(z.grad()[0] == 3.0);
  z.zero_grad();
  CHECK(z.grad()[0] == 0.0);

  // An unused parameter keeps a zero gradient.
  Tensor unused = Tensor::zeros({2}, true);
  unused.mutable_grad();
  Tensor w = Tensor::from({1}, {3.0}, true);
  backward(scale(w, 2.0));
  CHECK(unused.grad()[0] == 0.0);
  CHECK(unused.grad()[1] == 0.0);

  CHECK_THROWS_AS(backward(Tensor::zeros({2}, true)), std::invalid_argument);
}

TEST_CASE("finite_diff_check on closed forms") {
  std::vector<Parameter> params{{"x", Tensor::from({1}, {3.0}, true)}};
  auto square = [&] { return mul(params[0].tensor, params[0].tensor); };
  GradCheckOptions opts;
  opts.epsilon = 1e-4;
  const GradCheckReport r = finite_diff_check(square, params, opts);
  CHECK(r.max_rel_error < 1e-6);
  CHECK(params[0].tensor.grad()[0] == doctest::Approx(6.0));

  auto linear = [&] { return scale(params[0].tensor, -2.5); };
  for (Real eps : {1e-6, 1e-4, 1e-2}) {
    opts.epsilon = eps;
    CHECK(finite_diff_check(linear, params, opts).max_rel_error < 1e-8);
  }

  opts.epsilon = 1e-7;
  CHECK_THROWS_AS(finite_diff_check(square, params, opts), std::invalid_argument);
  opts.epsilon = 1e-4;
  auto bad = [&] { return log_softmax(scale(params[0].tensor, NAN)); };
  CHECK_THROWS_AS(finite_diff_check(bad, params, opts), std::runtime_error);
}

TEST_CASE("finite_diff_check catches a wrong backward rule") {
  std::mt19937_64 rng(2);
  std::vector<Parameter> params{{"a", random_tensor(rng, {3, 4}, 1.0, true)}};
  auto f = [&] { return sum(sigmoid(params[0].tensor)); };
  CHECK(finite_diff_check(f, params).max_rel_error < 1e-6);
  testing::set_backward_fault("sigmoid", 1.1);
  CHECK(finite_diff_check(f, params).max_rel_error > 1e-2);
  testing::set_backward_fault("", 1.0);
}

// One scalar objective per op over random small inputs. Outputs are mixed
// with fixed random weights so every output coordinate matters.
Tensor weighted_sum(const Tensor& t, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sum(mul(t, random_tensor(rng, t.shape(), 1.0)));
}

TEST_CASE("every registered op matches finite differences") {
  std::set<std::string> covered;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(100 + seed);
    std::vector<Parameter> p{{"a", random_tensor(rng, {3, 4}, 1.0, true)},
                             {"b", random_tensor(rng, {4, 2}, 1.0, true)},
                             {"c", random_tensor(rng, {3, 4}, 1.0, true)},
                             {"v", random_tensor(rng, {4}, 1.0, true)}};
    const Tensor &a = p[0].tensor, &b = p[1].tensor, &c = p[2].tensor, &v = p[3].tensor;
    const std::vector<int> targets{1, -1, 3};
    std::vector<Real> bce_targets(12);
    for (Real& t : bce_targets) t = test::uniform_real(rng, 0, 1);
    const std::vector<int> rows{2, 0, 2, 1};

    const std::map<std::string, std::function<Tensor()>> objectives{
        {"matmul", [&] { return weighted_sum(matmul(a, b), seed); }},
        {"add", [&] { return weighted_sum(add(add(a, c), v), seed); }},
        {"sub", [&] { return weighted_sum(sub(sub(a, c), v), seed); }},
        {"mul", [&] { return weighted_sum(mul(mul(a, c), v), seed); }},
        {"scale", [&] { return weighted_sum(scale(a, -1.7), seed); }},
        {"concat", [&] { return weighted_sum(concat({concat({a, c}, 0), concat({c, a}, 0)}, 1), seed); }},
        {"transpose", [&] { return weighted_sum(transpose(a), seed); }},
        {"reshape", [&] { return weighted_sum(reshape(a, {2, 6}), seed); }},
        {"slice_cols", [&] { return weighted_sum(slice_cols(a, 1, 3), seed); }},
        {"embedding_lookup", [&] { return weighted_sum(embedding_lookup(a, rows), seed); }},
        {"relu", [&] { return weighted_sum(relu(a), seed); }},
        {"sigmoid", [&] { return weighted_sum(sigmoid(a), seed); }},
        {"softmax", [&] { return weighted_sum(softmax(a), seed); }},
        {"log_softmax", [&] { return weighted_sum(log_softmax(a), seed); }},
        {"layer_norm", [&] { return weighted_sum(layer_norm(a, v, mul(v, v)), seed); }},
        {"dropout",
         [&] {
           std::mt19937_64 mask_rng(seed);
           return weighted_sum(dropout(a, 0.3, true, mask_rng), seed);
         }},
        {"sum", [&] { return scale(sum(mul(a, c)), 0.5); }},
        {"mean", [&] { return mean(mul(a, a)); }},
        {"cross_entropy", [&] { return cross_entropy(a, targets); }},
        {"bce_with_logits", [&] { return bce_with_logits(a, bce_targets); }},
    };
    for (const std::string& op : registered_ops()) {
      INFO("op ", op, " seed ", seed);
      auto it = objectives.find(op);
      REQUIRE(it != objectives.end());
      const GradCheckReport r = finite_diff_check(it->second, p);
      CHECK(r.max_rel_error < 1e-4);
      CHECK(r.coords_checked > 0);
      covered.insert(op);
    }
  }
  CHECK(covered.size() == registered_ops().size());
}

TEST_CASE("dropout is seeded and inactive outside training") {
  const Tensor a = Tensor::full({4, 8}, 1.0);
  std::mt19937_64 r1(7), r2(7);
  const Tensor x = dropout(a, 0.5, true, r1), y = dropout(a, 0.5, true, r2);
  CHECK(std::equal(x.values().begin(), x.values().end(), y.values().begin()));
  for (Real v : x.values()) CHECK((v == 0.0 || v == 2.0));
  std::mt19937_64 r3(7);
  const Tensor z = dropout(a, 0.5, false, r3);
  for (Real v : z.values()) CHECK(v == 1.0);
}

TEST_CASE("cross_entropy and bce closed forms") {
  const Tensor uniform = Tensor::zeros({3, 4});
  const std::vector<int> t{0, 1, 3};
  CHECK(cross_entropy(uniform, t).item() == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  const std::vector<int> none{-1, -1, -1};
  CHECK(cross_entropy(uniform, none).item() == 0.0);
  const std::vector<Real> half(12, 1.0);
  CHECK(bce_with_logits(uniform.detach(), half).item() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  // Saturated logits stay finite.
  const std::vector<Real> zero_one{0.0, 1.0};
  CHECK(std::isfinite(bce_with_logits(Tensor::from({2}, {800.0, -800.0}), zero_one).item()));
}

}  // namespace
}  // namespace kvpf
