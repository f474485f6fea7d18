// Copyright 2026 The poirec Authors.
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

#include "poirec/model.hpp"

#include <cmath>
#include <sstream>

#include "doctest.h"
#include "poirec/error.hpp"
#include "poirec/train.hpp"

namespace poirec {
namespace {

ModelConfig toy_config(int vocab = 12) {
  ModelConfig c;
  c.vocab_size = vocab;
  c.d_model = 8;
  c.n_layers = 1;
  c.n_heads = 2;
  c.d_ff = 16;
  c.max_tokens = 16;
  c.max_items = 4;
  c.dropout = 0.0;
  c.seed = 17;
  return c;
}

ModelInput make_input(const std::vector<TokenId>& tokens, std::vector<TokenId> items = {}) {
  ModelInput in;
  in.token_ids = tokens;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    in.field_type_ids.push_back(i == 0 ? 0 : static_cast<TokenId>(i % 3 != 1));
    in.item_position_ids.push_back(items.empty() ? (i == 0 ? 0 : 1) : items[i]);
    in.position_ids.push_back(static_cast<TokenId>(i));
  }
  return in;
}

TEST_CASE("forward shapes, determinism and normalization") {
  const auto p = ModelParams<float>::init(toy_config());
  const ModelInput in = make_input({special::kCls, 5, 6});
  const auto a = forward(p, in);
  CHECK(a.hidden.rows() == 3);
  CHECK(a.hidden.cols() == 8);
  CHECK(std::abs(a.pooled.norm() - 1.0f) < 1e-6f);

  const auto b = forward(p, in);
  CHECK(a.hidden == b.hidden);
  CHECK(a.pooled == b.pooled);

  const auto long_in = make_input({1, 4, 5, 6, 7, 8, 9, 10, 11, 4, 5}, {0, 3, 3, 3, 2, 2, 2, 1, 1, 1, 1});
  const auto c = forward(p, long_in);
  for (const auto& layer : c.layers) {
    for (const auto& P : layer.probs) {
      for (Eigen::Index r = 0; r < P.rows(); ++r) {
        CHECK(std::abs(P.row(r).cast<double>().sum() - 1.0) < 1e-6);
      }
    }
  }
}

TEST_CASE("forward rejects malformed input") {
  const auto p = ModelParams<float>::init(toy_config());
  CHECK_THROWS_AS(forward(p, make_input({1, 12})), InputError);
  CHECK_THROWS_AS(forward(p, make_input(std::vector<TokenId>(17, 4))), InputError);
  CHECK_THROWS_AS(forward(p, ModelInput{}), InputError);
  ModelConfig c = toy_config();
  c.dropout = 0.5;
  CHECK_THROWS_AS(forward(ModelParams<float>::init(c), make_input({1, 4}), true), InputError);
  c.n_heads = 3;
  CHECK_THROWS_AS(ModelParams<float>::init(c), ConfigError);
}

TEST_CASE("item positions beyond the table share the last row") {
  const auto p = ModelParams<float>::init(toy_config());
  const auto a = forward(p, make_input({1, 4, 5}, {0, 3, 3}));
  const auto b = forward(p, make_input({1, 4, 5}, {0, 40, 40}));
  CHECK(a.hidden == b.hidden);
}

TEST_CASE("mlm logits") {
  ModelConfig c = toy_config();
  const auto p = ModelParams<float>::init(c);
  const auto a = forward(p, make_input({1, 4, 5, 6}));
  const auto logits = mlm_logits(p, a.hidden);
  CHECK(logits.rows() == 4);
  CHECK(logits.cols() == 12);
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const Eigen::RowVectorXd row = logits.row(r).cast<double>();
    const double lse = std::log((row.array() - row.maxCoeff()).exp().sum()) + row.maxCoeff();
    CHECK(std::abs((row.array() - lse).exp().sum() - 1.0) < 1e-6);
  }
  CHECK(mlm_logits(p, a.hidden, {2}).row(0).isApprox(logits.row(2), 1e-6f));

  c.tied_head = false;
  const auto untied = ModelParams<float>::init(c);
  CHECK(untied.parameter_count() - p.parameter_count() == 12u * 8u);
  // Embedding plus decoder: V*d when tied, 2*V*d when not.
  CHECK(p.token_emb.size() * 2 == untied.token_emb.size() + untied.mlm_head.size());
}

TEST_CASE("encode_item is deterministic and unit norm") {
  const auto p = ModelParams<float>::init(toy_config());
  TokenizedItem it{{4, 5, 6}, {0, 1, 1}};
  const auto a = encode_item(p, it);
  const auto b = encode_item(p, it);
  CHECK(a == b);
  CHECK(std::abs(a.cast<double>().dot(b.cast<double>()) - 1.0) < 1e-6);
}

TEST_CASE("zero upstream gradient gives zero gradients") {
  const auto p = ModelParams<double>::init(toy_config());
  const auto a = forward(p, make_input({1, 4, 5}));
  auto g = ModelParams<double>::zeros(p.config);
  backward(p, a, Matrix<double>(Matrix<double>::Zero(3, 8)),
           Matrix<double>(Matrix<double>::Zero(1, 8)), g);
  for_each_tensor(g, [](const std::string&, const Matrix<double>& t) { CHECK(t.isZero(0.0)); });
}

TEST_CASE("unused token rows get no gradient") {
  const auto p = ModelParams<double>::init(toy_config());
  const auto a = forward(p, make_input({1, 4, 5}));
  auto g = ModelParams<double>::zeros(p.config);
  Matrix<double> up = Matrix<double>::Ones(1, 8);
  backward(p, a, Matrix<double>(), up, g);
  CHECK(g.token_emb.row(9).isZero(0.0));
  CHECK_FALSE(g.token_emb.row(4).isZero(0.0));
}

TEST_CASE("relabeling the vocabulary leaves outputs unchanged") {
  const auto p = ModelParams<float>::init(toy_config());
  // Swap ids 4 <-> 7 and 5 <-> 9.
  std::vector<TokenId> perm(12);
  for (TokenId i = 0; i < 12; ++i) perm[static_cast<std::size_t>(i)] = i;
  std::swap(perm[4], perm[7]);
  std::swap(perm[5], perm[9]);
  auto q = p;
  for (TokenId i = 0; i < 12; ++i) q.token_emb.row(perm[static_cast<std::size_t>(i)]) = p.token_emb.row(i);
  const std::vector<TokenId> toks{1, 4, 5, 6, 4};
  std::vector<TokenId> relabeled;
  for (TokenId t : toks) relabeled.push_back(perm[static_cast<std::size_t>(t)]);
  const auto a = forward(p, make_input(toks));
  const auto b = forward(q, make_input(relabeled));
  CHECK(a.pooled == b.pooled);
}

// Loss of a fixed three-example batch, in double precision.
double batch_loss(const ModelParams<double>& p, const std::vector<PretrainExample>& batch,
                  const TrainConfig& tc, ModelParams<double>* g) {
  return pretrain_loss(p, batch, tc, g, false, 0).total;
}

TEST_CASE("finite differences agree with backprop on MLM plus contrastive loss") {
  const ModelConfig c = toy_config();
  auto p = ModelParams<double>::init(c);
  // Perturb layer-norm parameters away from (1, 0) so their gradients are
  // exercised in general position.
  Rng noise(5);
  for_each_tensor(p, [&](const std::string&, Matrix<double>& t) {
    if (t.rows() == 1) {
      for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] += 0.3 * (uniform_real(noise) - 0.5);
    }
  });

  TrainConfig tc;
  tc.temperature = 0.5;
  tc.lambda = 1.0;
  std::vector<PretrainExample> batch;
  const std::vector<std::vector<TokenId>> seqs{{1, 4, 5, 6, 7, 8}, {1, 9, 10, 4, 5}, {1, 11, 6, 8}};
  const std::vector<std::vector<TokenId>> items{{1, 4, 5, 6}, {1, 10, 11}, {1, 7, 9, 8}};
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    PretrainExample ex;
    ex.sequence.input = make_input(seqs[i], {0, 2, 2, 2, 1, 1});
    ex.sequence.input.item_position_ids.resize(seqs[i].size());
    ex.sequence.positions = {2, 3};
    ex.sequence.targets = {static_cast<TokenId>(5 + i), 6};
    ex.sequence.input.token_ids[2] = special::kMask;
    ex.item = make_input(items[i]);
    batch.push_back(ex);
  }

  auto g = ModelParams<double>::zeros(c);
  batch_loss(p, batch, tc, &g);

  struct Ref {
    Matrix<double>* value;
    const Matrix<double>* grad;
    std::string name;
  };
  std::vector<Ref> refs;
  std::vector<const Matrix<double>*> grads;
  for_each_tensor(g, [&](const std::string&, const Matrix<double>& t) { grads.push_back(&t); });
  std::size_t k = 0;
  for_each_tensor(p, [&](const std::string& name, Matrix<double>& t) {
    refs.push_back({&t, grads[k++], name});
  });

  const double h = 1e-4;
  Rng pick(2024);
  int checked = 0;
  double worst = 0.0;
  while (checked < 20) {
    const Ref& r = refs[uniform_index(pick, refs.size())];
    const auto j = static_cast<Eigen::Index>(uniform_index(pick, static_cast<std::uint64_t>(r.value->size())));
    const double analytic = r.grad->data()[j];
    const double saved = r.value->data()[j];
    r.value->data()[j] = saved + h;
    const double up = batch_loss(p, batch, tc, nullptr);
    r.value->data()[j] = saved - h;
    const double down = batch_loss(p, batch, tc, nullptr);
    r.value->data()[j] = saved;
    const double numeric = (up - down) / (2 * h);
    const double rel = std::abs(analytic - numeric) /
                       std::max({std::abs(analytic), std::abs(numeric), 1e-7});
    worst = std::max(worst, rel);
    CHECK_MESSAGE(rel < 1e-3, r.name << "[" << j << "] analytic " << analytic << " numeric "
                                      << numeric);
    ++checked;
  }
  MESSAGE("worst relative error " << worst);
}

TEST_CASE("checkpoint round trip") {
  ModelConfig c = toy_config();
  c.tied_head = false;
  const auto p = ModelParams<float>::init(c);
  std::stringstream io;
  save_checkpoint(p, io);
  const std::string bytes = io.str();
  std::istringstream in(bytes);
  const auto q = load_checkpoint(in);
  CHECK(q.config == p.config);
  std::vector<const Matrix<float>*> a;
  for_each_tensor(p, [&](const std::string&, const Matrix<float>& t) { a.push_back(&t); });
  std::size_t i = 0;
  for_each_tensor(q, [&](const std::string&, const Matrix<float>& t) { CHECK(t == *a[i++]); });

  std::string corrupt = bytes;
  corrupt[corrupt.size() / 2] ^= 0x10;
  std::istringstream bad(corrupt);
  CHECK_THROWS_AS(load_checkpoint(bad), IoError);
  std::istringstream truncated(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(load_checkpoint(truncated), IoError);
}

TEST_CASE("check_finite names the offending tensor") {
  auto p = ModelParams<float>::init(toy_config());
  p.layers[0].w1(0, 0) = std::nanf("");
  CHECK_THROWS_WITH_AS(check_finite(p, "gradient"), doctest::Contains("layer0.w1"),
                       TrainingError);
}

}  // namespace
}  // namespace poirec
