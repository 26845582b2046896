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
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "doctest.h"
#include "kvpf/config.h"
#include "kvpf/model.h"
#include "test_util.h"

namespace kvpf {
namespace {

ModelConfig toy_model() { return toy_config().model; }

KvpModel make_model(const ModelConfig& c, std::uint64_t seed = 1) {
  return KvpModel(c, {seed, 0.1, 0.1});
}

std::span<Real> param(KvpModel& m, const std::string& name) {
  Parameter* p = m.store().find(name);
  REQUIRE_MESSAGE(p != nullptr, name);
  return p->tensor.mutable_values();
}

const Tensor& param_tensor(const KvpModel& m, const std::string& name) {
  const Parameter* p = m.store().find(name);
  REQUIRE_MESSAGE(p != nullptr, name);
  return p->tensor;
}

// y = x W + b with W stored [in, out]; b may be undefined.
std::vector<Real> dense(const std::vector<Real>& x, const Tensor& w, const Tensor* b) {
  const size_t in = w.shape()[0], out = w.shape()[1];
  std::vector<Real> y(out, 0.0);
  for (size_t o = 0; o < out; ++o) {
    for (size_t i = 0; i < in; ++i) y[o] += x[i] * w.at(i, o);
    if (b && b->defined()) y[o] += b->values()[o];
  }
  return y;
}

std::vector<Real> relu_vec(std::vector<Real> v) {
  for (Real& x : v) x = std::max<Real>(x, 0.0);
  return v;
}

std::vector<Real> feed_forward(const KvpModel& m, const std::string& name, const std::vector<Real>& x) {
  const Tensor& b1 = param_tensor(m, name + ".0.bias");
  std::vector<Real> h = relu_vec(dense(x, param_tensor(m, name + ".0.weight"), &b1));
  const Parameter* b2 = m.store().find(name + ".1.bias");
  return dense(h, param_tensor(m, name + ".1.weight"), b2 ? &b2->tensor : nullptr);
}

std::vector<Real> row(const Tensor& t, size_t i) {
  auto v = t.values();
  return std::vector<Real>(v.begin() + i * t.cols(), v.begin() + (i + 1) * t.cols());
}

Document doc_with_texts(const std::vector<std::string>& texts) {
  Document d;
  d.id = "texts";
  int x = 10;
  for (size_t i = 0; i < texts.size(); ++i) {
    Entity e;
    e.id = static_cast<int>(i);
    e.box = BBox::make(x, 20, x + 60, 40);
    e.label = i % 2 ? Label::kAnswer : Label::kQuestion;
    std::string word;
    std::string t = texts[i];
    size_t pos = 0;
    while (pos < t.size()) {
      size_t end = t.find(' ', pos);
      if (end == std::string::npos) end = t.size();
      if (end > pos) e.words.push_back({t.substr(pos, end - pos), e.box});
      pos = end + 1;
    }
    e.text = t;
    d.entities.push_back(std::move(e));
    x += 80;
  }
  return d;
}

TEST_CASE("tokenizer and hashing") {
  CHECK(tokenize("Date: 12/03") == std::vector<std::string>{"date", ":", "12", "/", "03"});
  CHECK(tokenize("  ") == std::vector<std::string>{});
  CHECK(tokenize("ACME Corp") == std::vector<std::string>{"acme", "corp"});
  for (const char* t : {"a", "date", ":", "zzzz", ""}) {
    const int h = hash_token(t, 32);
    CHECK(h >= 1);
    CHECK(h < 32);
    CHECK(h == hash_token(t, 32));
  }
}

TEST_CASE("config validation") {
  ModelConfig c = toy_model();
  CHECK_NOTHROW(validate(c));
  c.d_model = 18;
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
  c = toy_model();
  c.num_heads = 3;
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
  c = toy_model();
  c.top_k = 0;
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
}

TEST_CASE("entity content is the mean of its token rows") {
  const ModelConfig c = toy_model();
  const KvpModel m = make_model(c);
  const Document d = doc_with_texts({"name", "john smith", "", "name"});
  const DocumentFeatures f = featurize(d, c);
  const EntityRepresentation reps = m.embed(f);
  const Tensor& table = param_tensor(m, "backbone.token_embedding");
  const size_t dm = c.d_model;
  CHECK(reps.content.shape() == Shape{4, dm});
  const int name = hash_token("name", c.hash_vocab_size);
  const int john = hash_token("john", c.hash_vocab_size);
  const int smith = hash_token("smith", c.hash_vocab_size);
  for (size_t k = 0; k < dm; ++k) {
    CHECK(reps.content.at(0, k) == table.at(name, k));
    CHECK(reps.content.at(1, k) == doctest::Approx((table.at(john, k) + table.at(smith, k)) / 2).epsilon(1e-14));
    // Reserved row for an entity without tokens.
    CHECK(reps.content.at(2, k) == table.at(0, k));
  }
  // Same text, different box: same content, different position.
  CHECK(row(reps.content, 0) == row(reps.content, 3));
  CHECK(row(reps.pos, 0) != row(reps.pos, 3));
}

TEST_CASE("position embedding concatenates the four coordinate tables") {
  const ModelConfig c = toy_model();
  const KvpModel m = make_model(c);
  const Document d = doc_with_texts({"a"});
  const EntityRepresentation reps = m.embed(featurize(d, c));
  const BBox b = d.entities[0].box;
  const int coords[4] = {b.x1, b.y1, b.x2, b.y2};
  const char* names[4] = {"x1", "y1", "x2", "y2"};
  const size_t q = c.d_model / 4;
  for (int s = 0; s < 4; ++s) {
    const Tensor& t = param_tensor(m, std::string("backbone.position_") + names[s]);
    for (size_t k = 0; k < q; ++k) CHECK(reps.pos.at(0, s * q + k) == t.at(coords[s], k));
  }
}

TEST_CASE("gold labels extend the content vector") {
  ModelConfig c = toy_model();
  c.use_gold_labels = true;
  const KvpModel m = make_model(c);
  const Document d = doc_with_texts({"a", "b"});
  const EntityRepresentation reps = m.embed(featurize(d, c));
  const Tensor& labels = param_tensor(m, "label_embedding");
  const size_t q = c.d_model / 4, base = c.d_model - q;
  for (size_t k = 0; k < q; ++k) {
    CHECK(reps.content.at(0, base + k) == labels.at(static_cast<int>(Label::kQuestion), k));
    CHECK(reps.content.at(1, base + k) == labels.at(static_cast<int>(Label::kAnswer), k));
  }
}

struct AttentionFixture {
  ParameterStore store{3};
  SpatialAttention attention{store, "att", 16, 2, 8, true, 0.3};
  SpatialAttention plain{store, "plain", 16, 2, 8, false, 0.3};
};

AttentionInputs random_inputs(std::mt19937_64& rng, size_t m, size_t n, bool same_boxes) {
  AttentionInputs in;
  in.query_content = test::random_tensor(rng, {m, 16});
  in.query_pos = test::random_tensor(rng, {m, 16});
  in.key_content = test::random_tensor(rng, {n, 16});
  in.key_pos = test::random_tensor(rng, {n, 16});
  std::vector<BBox> qb, kb;
  const BBox shared = test::random_box(rng);
  for (size_t i = 0; i < m; ++i) qb.push_back(same_boxes ? shared : test::random_box(rng));
  for (size_t j = 0; j < n; ++j) kb.push_back(same_boxes ? shared : test::random_box(rng));
  std::vector<Real> r;
  for (size_t i = 0; i < m; ++i) {
    for (size_t j = 0; j < n; ++j) {
      const SpatialFeature f = spatial_compatibility(qb[i], kb[j]);
      r.insert(r.end(), f.begin(), f.end());
    }
  }
  in.spatial = Tensor::from({m * n, kSpatialFeatureDim}, std::move(r));
  return in;
}

TEST_CASE("attention logits decompose into content, position and bias") {
  AttentionFixture fx;
  std::mt19937_64 rng(4);
  AttentionInputs in = random_inputs(rng, 3, 5, false);
  in.query_content = Tensor::zeros({3, 16});
  in.query_pos = Tensor::zeros({3, 16});
  // With zero queries the query biases are the only projection output; set
  // them to zero so both dot products vanish.
  for (Parameter& p : fx.store.params()) {
    if (p.name == "att.q_content.bias" || p.name == "att.q_pos.bias") {
      for (Real& v : p.tensor.mutable_values()) v = 0.0;
    }
  }
  for (size_t h = 0; h < 2; ++h) {
    const Tensor s = fx.attention.scores(in, h), b = fx.attention.bias(in, h);
    for (size_t k = 0; k < s.size(); ++k) CHECK(s.values()[k] == b.values()[k]);
  }
}

TEST_CASE("identical boxes give a constant bias that softmax ignores") {
  AttentionFixture fx;
  std::mt19937_64 rng(6);
  const AttentionInputs in = random_inputs(rng, 3, 4, true);
  for (size_t h = 0; h < 2; ++h) {
    const Tensor b = fx.attention.bias(in, h);
    for (Real v : b.values()) CHECK(v == b.values()[0]);
    const Tensor with = softmax(fx.attention.scores(in, h));
    const Tensor without = softmax(sub(fx.attention.scores(in, h), b));
    for (size_t k = 0; k < with.size(); ++k) CHECK(std::abs(with.values()[k] - without.values()[k]) < 1e-12);
  }
}

TEST_CASE("attention rows sum to one; a single key gets weight one") {
  AttentionFixture fx;
  std::mt19937_64 rng(9);
  for (const SpatialAttention* att : {&fx.attention, &fx.plain}) {
    AttentionTrace trace;
    Pass pass;
    pass.trace = &trace;
    (*att)(random_inputs(rng, 4, 6, false), pass);
    (*att)(random_inputs(rng, 2, 1, false), pass);
    REQUIRE(trace.weights.size() == 4);
    for (const Tensor& w : trace.weights) {
      for (size_t i = 0; i < w.rows(); ++i) {
        Real total = 0;
        for (size_t j = 0; j < w.cols(); ++j) total += w.at(i, j);
        CHECK(std::abs(total - 1.0) < 1e-12);
      }
    }
    for (Real v : trace.weights[3].values()) CHECK(v == 1.0);
  }
}

TEST_CASE("adding a constant to a logit row leaves attention weights unchanged") {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 20; ++t) {
    const Tensor logits = test::random_tensor(rng, {3, 5}, 4.0);
    std::vector<Real> shift;
    for (int i = 0; i < 3; ++i) {
      const Real c = test::uniform_real(rng, -50, 50);
      for (int j = 0; j < 5; ++j) shift.push_back(c);
    }
    const Tensor a = softmax(logits), b = softmax(add(logits, Tensor::from({3, 5}, shift)));
    for (size_t k = 0; k < a.size(); ++k) CHECK(std::abs(a.values()[k] - b.values()[k]) < 1e-6);
  }
}

TEST_CASE("encoder with silenced attention and feed-forward reduces to layer norm") {
  const ModelConfig c = toy_model();
  KvpModel m = make_model(c);
  for (const char* name : {"encoder.0.attention.value.weight", "encoder.0.attention.value.bias",
                           "encoder.0.attention.out.weight", "encoder.0.attention.out.bias",
                           "encoder.0.ffn.1.weight", "encoder.0.ffn.1.bias"}) {
    for (Real& v : param(m, name)) v = 0.0;
  }
  std::mt19937_64 rng(2);
  const Document d = test::random_document(rng, 5);
  const DocumentFeatures f = featurize(d, c);
  const EntityRepresentation reps = m.embed(f);
  const Tensor h = m.encode(reps, f, Pass{});
  CHECK(h.shape() == Shape{5, static_cast<size_t>(c.d_model)});
  auto norm = [](std::vector<Real> x) {
    Real mu = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
    Real var = 0;
    for (Real v : x) var += (v - mu) * (v - mu);
    var /= x.size();
    for (Real& v : x) v = (v - mu) / std::sqrt(var + 1e-5);
    return x;
  };
  for (size_t i = 0; i < 5; ++i) {
    const std::vector<Real> expected = norm(norm(row(reps.content, i)));
    const std::vector<Real> got = row(h, i);
    for (size_t k = 0; k < got.size(); ++k) CHECK(std::abs(got[k] - expected[k]) < 1e-9);
  }
}

TEST_CASE("encoder output shape for any N") {
  const ModelConfig c = toy_model();
  const KvpModel m = make_model(c);
  std::mt19937_64 rng(13);
  for (int n : {1, 2, 7, 20}) {
    const DocumentFeatures f = featurize(test::random_document(rng, n), c);
    CHECK(m.encode(m.embed(f), f, Pass{}).shape() == Shape{static_cast<size_t>(n), 16});
  }
}

TEST_CASE("question sets by role") {
  const std::vector<Label> labels{Label::kQuestion, Label::kOther, Label::kAnswer};
  CHECK(questions_from_labels(labels, QuestionRole::kNonOther) == std::vector<int>{0, 2});
  CHECK(questions_from_labels(labels, QuestionRole::kAnswerAsQuestion) == std::vector<int>{2});
  const std::vector<Label> others(4, Label::kOther);
  CHECK(questions_from_labels(others, QuestionRole::kNonOther).empty());
  CHECK(parse_question_role("non_other") == QuestionRole::kNonOther);
  CHECK_FALSE(parse_question_role("values").has_value());
}

TEST_CASE("gold partners follow the role's direction") {
  Document d = doc_with_texts({"k", "v1", "v2"});
  d.gold_pairs = {{0, 1}, {0, 2}};
  const DocumentFeatures f = featurize(d, toy_model());
  const std::vector<int> answers{1, 2};
  CHECK(gold_answers(f, answers, QuestionRole::kAnswerAsQuestion) ==
        std::vector<std::vector<int>>{{0}, {0}});
  const std::vector<int> keys{0};
  CHECK(gold_answers(f, keys, QuestionRole::kNonOther) == std::vector<std::vector<int>>{{1, 2}});
}

TEST_CASE("decoder is permutation equivariant") {
  const ModelConfig c = toy_model();
  const KvpModel m = make_model(c, 5);
  std::mt19937_64 rng(14);
  for (int t = 0; t < 20; ++t) {
    const int n = test::uniform_int(rng, 2, 8);
    const DocumentFeatures f = featurize(test::random_document(rng, n), c);
    const EntityRepresentation reps = m.embed(f);
    const Tensor h = m.encode(reps, f, Pass{});
    std::vector<int> q(n);
    std::iota(q.begin(), q.end(), 0);
    std::shuffle(q.begin(), q.end(), rng);
    q.resize(test::uniform_int(rng, 1, n));
    std::vector<int> perm(q.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> permuted;
    for (int p : perm) permuted.push_back(q[p]);
    const Tensor a = m.decode(h, reps, q, f, Pass{});
    const Tensor b = m.decode(h, reps, permuted, f, Pass{});
    for (size_t i = 0; i < perm.size(); ++i) {
      const auto expected = row(a, perm[i]), got = row(b, i);
      for (size_t k = 0; k < got.size(); ++k) CHECK(std::abs(got[k] - expected[k]) < 1e-9);
    }
  }
}

TEST_CASE("identical questions decode to identical rows") {
  const ModelConfig c = toy_model();
  const KvpModel m = make_model(c, 6);
  Document d = doc_with_texts({"same", "other", "same"});
  d.entities[2].box = d.entities[0].box;
  for (Word& w : d.entities[2].words) w.box = d.entities[0].box;
  const DocumentFeatures f = featurize(d, c);
  const EntityRepresentation reps = m.embed(f);
  const Tensor h = m.encode(reps, f, Pass{});
  const std::vector<int> q{0, 2};
  const Tensor out = m.decode(h, reps, q, f, Pass{});
  CHECK(row(out, 0) == row(out, 1));
}

TEST_CASE("single question self-attention is the identity mixture") {
  const ModelConfig c = toy_model();
  const KvpModel m = make_model(c, 6);
  std::mt19937_64 rng(15);
  const DocumentFeatures f = featurize(test::random_document(rng, 4), c);
  ForwardOptions opts;
  AttentionTrace trace;
  opts.pass.trace = &trace;
  opts.questions = std::vector<int>{2};
  m.forward(f, opts);
  // Encoder (2 heads), decoder self-attention (2 heads), cross-attention (2 heads).
  REQUIRE(trace.weights.size() == 6);
  CHECK(trace.weights[2].shape() == Shape{1, 1});
  CHECK(trace.weights[2].item() == 1.0);
  CHECK(trace.weights[3].item() == 1.0);
}

TEST_CASE("coarse scores match a standalone evaluation") {
  const ModelConfig c = toy_model();
  const KvpModel m = make_model(c, 8);
  std::mt19937_64 rng(16);
  for (int t = 0; t < 5; ++t) {
    const int n = test::uniform_int(rng, 2, 6);
    const DocumentFeatures f = featurize(test::random_document(rng, n), c);
    ForwardOptions opts;
    std::vector<int> q(n);
    std::iota(q.begin(), q.end(), 0);
    opts.questions = q;
    const ForwardOutputs out = m.forward(f, opts);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        std::vector<Real> z = feed_forward(m, "coarse_head.spatial", row(f.spatial, i * n + j));
        const auto qi = row(out.decoded, i), hj = row(out.encoded, j);
        for (size_t k = 0; k < z.size(); ++k) z[k] += qi[k] + hj[k];
        const Real logit = feed_forward(m, "coarse_head.mlp", z)[0];
        CHECK(std::abs(out.coarse_logits.at(i, j) - logit) < 1e-5);
        const Real s = 1 / (1 + std::exp(-out.coarse_logits.at(i, j)));
        CHECK(s > 0.0);
        CHECK(s < 1.0);
      }
    }
    // Fine logits for the chosen candidates, through the separate head.
    for (size_t i = 0; i < out.candidates.size(); ++i) {
      for (size_t k = 0; k < out.candidates[i].size(); ++k) {
        const int j = out.candidates[i][k];
        std::vector<Real> z = feed_forward(m, "fine_head.spatial", row(f.spatial, q[i] * n + j));
        const auto qi = row(out.decoded, i), hj = row(out.encoded, j);
        for (size_t d = 0; d < z.size(); ++d) z[d] += qi[d] + hj[d];
        CHECK(std::abs(out.fine_logits.at(i, k) - feed_forward(m, "fine_head.mlp", z)[0]) < 1e-5);
      }
    }
  }
}

TEST_CASE("zero final coarse layer gives one half everywhere") {
  const ModelConfig c = toy_model();
  KvpModel m = make_model(c, 8);
  for (Real& v : param(m, "coarse_head.mlp.1.weight")) v = 0.0;
  for (Real& v : param(m, "coarse_head.mlp.1.bias")) v = 0.0;
  std::mt19937_64 rng(17);
  Document d = test::random_document(rng, 5);
  for (Entity& e : d.entities) e.label = Label::kAnswer;
  ModelConfig gold = c;
  const Prediction p = predict(m, d);
  for (const auto& r : p.coarse_scores) {
    for (Real s : r) CHECK(s == 0.5);
  }
  (void)gold;
}

TEST_CASE("top-K selection") {
  const std::vector<Real> s{0.9, 0.1, 0.8, 0.7, 0.2, 0.95};
  CHECK(topk_candidates(s, 5) == std::vector<int>{5, 0, 2, 3, 4});
  const std::vector<Real> three{0.3, 0.2, 0.1};
  CHECK(topk_candidates(three, 5) == std::vector<int>{0, 1, 2});
  const std::vector<Real> flat(6, 0.5);
  CHECK(topk_candidates(flat, 4) == std::vector<int>{0, 1, 2, 3});
  CHECK(topk_candidates(flat, 4, 1) == std::vector<int>{0, 2, 3, 4});
  CHECK(topk_candidates(s, 2, 5) == std::vector<int>{0, 2});
}

TEST_CASE("fine distribution") {
  const ModelConfig c = toy_model();
  KvpModel m = make_model(c, 9);
  std::mt19937_64 rng(18);
  const DocumentFeatures f = featurize(test::random_document(rng, 6), c);
  ForwardOptions opts;
  opts.questions = std::vector<int>{0, 3};
  {
    const ForwardOutputs out = m.forward(f, opts);
    const Tensor s = softmax(out.fine_logits);
    for (size_t i = 0; i < s.rows(); ++i) {
      Real total = 0;
      size_t best = 0, best_logit = 0;
      for (size_t k = 0; k < s.cols(); ++k) {
        total += s.at(i, k);
        if (s.at(i, k) > s.at(i, best)) best = k;
        if (out.fine_logits.at(i, k) > out.fine_logits.at(i, best_logit)) best_logit = k;
      }
      CHECK(std::abs(total - 1.0) < 1e-12);
      CHECK(best == best_logit);
    }
  }
  for (Real& v : param(m, "fine_head.mlp.1.weight")) v = 0.0;
  const ForwardOutputs out = m.forward(f, opts);
  const Tensor s = softmax(out.fine_logits);
  CHECK(s.cols() == 3);
  for (Real v : s.values()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("threshold above one suppresses every pair") {
  ModelConfig c = toy_model();
  c.coarse_accept_threshold = 1.0 + 1e-9;
  c.use_gold_labels = true;
  const KvpModel m = make_model(c, 10);
  for (const Document& d : synth_forms(0, 3)) CHECK(predict(m, d).pairs.empty());
}

TEST_CASE("no questions means no pairs") {
  ModelConfig c = toy_model();
  c.use_gold_labels = true;
  const KvpModel m = make_model(c, 10);
  Document d = doc_with_texts({"a", "b", "c"});
  for (Entity& e : d.entities) e.label = Label::kOther;
  const Prediction p = predict(m, d);
  CHECK(p.question_ids.empty());
  CHECK(p.pairs.empty());
}

TEST_CASE("single question with one partner takes it when the score passes") {
  ModelConfig c = toy_model();
  c.use_gold_labels = true;
  c.coarse_accept_threshold = 0.0;
  const KvpModel m = make_model(c, 11);
  Document d = doc_with_texts({"key", "value"});
  d.entities[0].id = 7;
  d.entities[1].id = 3;
  const Prediction p = predict(m, d);
  CHECK(p.question_ids == std::vector<int>{3});
  CHECK(p.pairs == PairSet{{7, 3}});
  c.question_role = QuestionRole::kNonOther;
  const KvpModel m2 = make_model(c, 11);
  const Prediction p2 = predict(m2, d);
  CHECK(p2.pairs == PairSet{{7, 3}, {3, 7}});
}

TEST_CASE("fine head copying the coarse head reproduces coarse-only answers") {
  ModelConfig c = toy_model();
  c.use_gold_labels = true;
  c.coarse_accept_threshold = 0.0;
  c.question_role = QuestionRole::kNonOther;
  KvpModel with = make_model(c, 12);
  for (Parameter& p : with.parameters()) {
    if (p.name.rfind("fine_head.", 0) != 0) continue;
    const std::string source = "coarse_head." + p.name.substr(10);
    const auto src = param_tensor(with, source).values();
    std::copy(src.begin(), src.end(), p.tensor.mutable_values().begin());
  }
  ModelConfig off = c;
  off.use_coarse_to_fine = false;
  KvpModel without = make_model(off, 12);
  for (Parameter& p : without.parameters()) {
    const auto src = param_tensor(with, p.name).values();
    std::copy(src.begin(), src.end(), p.tensor.mutable_values().begin());
  }
  std::mt19937_64 rng(19);
  for (int t = 0; t < 20; ++t) {
    const Document d = test::random_document(rng, test::uniform_int(rng, 2, 9));
    CHECK(predict(with, d).pairs == predict(without, d).pairs);
  }
}

TEST_CASE("without spatial bias, uniform translation of identical boxes changes nothing") {
  ModelConfig c = toy_model();
  c.use_spatial_bias = false;
  c.use_gold_labels = true;
  c.coarse_accept_threshold = 0.0;
  const KvpModel m = make_model(c, 13);
  std::mt19937_64 rng(20);
  for (int t = 0; t < 10; ++t) {
    Document d = test::random_document(rng, 5);
    const BBox shared = BBox::make(100, 100, 180, 130);
    for (Entity& e : d.entities) {
      e.box = shared;
      for (Word& w : e.words) w.box = shared;
    }
    Document moved = d;
    const int dx = test::uniform_int(rng, -100, 500), dy = test::uniform_int(rng, -100, 500);
    for (Entity& e : moved.entities) {
      e.box = BBox::make(shared.x1 + dx, shared.y1 + dy, shared.x2 + dx, shared.y2 + dy);
      for (Word& w : e.words) w.box = e.box;
    }
    const Prediction a = predict(m, d), b = predict(m, moved);
    CHECK(a.pairs == b.pairs);
    REQUIRE(a.coarse_scores.size() == b.coarse_scores.size());
    for (size_t i = 0; i < a.coarse_scores.size(); ++i) {
      for (size_t j = 0; j < a.coarse_scores[i].size(); ++j) {
        CHECK(std::abs(a.coarse_scores[i][j] - b.coarse_scores[i][j]) < 1e-9);
      }
    }
  }
}

TEST_CASE("prediction invariants on random documents") {
  for (bool c2f : {true, false}) {
    ModelConfig c = toy_model();
    c.use_coarse_to_fine = c2f;
    c.question_role = QuestionRole::kNonOther;
    const KvpModel m = make_model(c, 14);
    std::mt19937_64 rng(21);
    for (int t = 0; t < 15; ++t) {
      const int n = test::uniform_int(rng, 1, 40);
      const Document d = test::random_document(rng, n);
      const Prediction p = predict(m, d);
      REQUIRE(p.entity_labels.size() == static_cast<size_t>(n));
      for (const auto& probs : p.entity_labels) {
        CHECK(std::abs(std::accumulate(probs.begin(), probs.end(), 0.0) - 1.0) < 1e-9);
      }
      const size_t mq = p.question_ids.size();
      CHECK(p.coarse_scores.size() == mq);
      CHECK(p.candidates.size() == mq);
      CHECK(p.fine_scores.size() == mq);
      std::set<int> ids;
      for (const Entity& e : d.entities) ids.insert(e.id);
      for (size_t i = 0; i < mq; ++i) {
        CHECK(p.coarse_scores[i].size() == static_cast<size_t>(n));
        for (Real s : p.coarse_scores[i]) CHECK((s > 0.0 && s < 1.0));
        const size_t k = std::min<size_t>(c.top_k, n - 1);
        CHECK(p.candidates[i].size() == k);
        CHECK(std::set<int>(p.candidates[i].begin(), p.candidates[i].end()).size() == k);
        for (int id : p.candidates[i]) CHECK(id != p.question_ids[i]);
        if (c2f && k > 0) {
          CHECK(p.fine_scores[i].size() == k);
          CHECK(std::abs(std::accumulate(p.fine_scores[i].begin(), p.fine_scores[i].end(), 0.0) - 1.0) < 1e-9);
        } else {
          CHECK(p.fine_scores[i].empty());
        }
      }
      for (const RelationPair& pr : p.pairs) {
        CHECK(pr.key_id != pr.value_id);
        CHECK(ids.count(pr.key_id));
        CHECK(ids.count(pr.value_id));
      }
    }
  }
}

TEST_CASE("parameter groups") {
  const KvpModel m = make_model(toy_model());
  std::set<std::string> names;
  for (const Parameter& p : const_cast<KvpModel&>(m).parameters()) {
    CHECK(names.insert(p.name).second);
    const bool backbone = KvpModel::is_backbone(p.name);
    CHECK(backbone == (p.name.rfind("backbone.", 0) == 0));
  }
  CHECK(names.count("backbone.token_embedding"));
  CHECK(names.count("coarse_head.mlp.1.bias"));
  CHECK_FALSE(names.count("fine_head.mlp.1.bias"));
  CHECK(names.count("encoder.0.attention.spatial_bias.0.weight"));
}

}  // namespace
}  // namespace kvpf
