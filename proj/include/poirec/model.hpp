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

#ifndef POIREC_MODEL_HPP_
#define POIREC_MODEL_HPP_

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "poirec/random.hpp"
#include "poirec/textrep.hpp"

namespace poirec {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ModelConfig {
  int vocab_size = 0;
  int d_model = 64;
  int n_layers = 2;
  int n_heads = 4;
  int d_ff = 256;
  int max_tokens = 512;
  int max_items = 64;  // item-position ids at or above this share the last row
  double dropout = 0.1;
  bool tied_head = true;  // MLM decoder shares the token embedding
  std::uint64_t seed = 0;

  // Throws ConfigError.
  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Row-vector convention throughout: activations are (tokens x features) and
// a linear layer computes x * W + b.
template <typename Scalar>
struct LayerParams {
  Matrix<Scalar> ln1_g, ln1_b;
  Matrix<Scalar> wq, bq, wk, bk, wv, bv, wo, bo;
  Matrix<Scalar> ln2_g, ln2_b;
  Matrix<Scalar> w1, b1, w2, b2;
};

template <typename Scalar>
struct ModelParams {
  ModelConfig config;
  Matrix<Scalar> token_emb;     // vocab x d
  Matrix<Scalar> position_emb;  // max_tokens x d
  Matrix<Scalar> field_emb;     // 2 x d
  Matrix<Scalar> item_emb;      // max_items x d
  Matrix<Scalar> emb_ln_g, emb_ln_b;
  std::vector<LayerParams<Scalar>> layers;
  Matrix<Scalar> final_ln_g, final_ln_b;
  Matrix<Scalar> mlm_head;  // vocab x d; empty when tied

  // Seeded uniform init in [-1/sqrt(d), 1/sqrt(d)]; layer norms at (1, 0).
  static ModelParams init(const ModelConfig& config);
  // Same shapes, all zeros.
  static ModelParams zeros(const ModelConfig& config);

  std::size_t parameter_count() const;
  // Weight matrix of the MLM decoder (token_emb when tied).
  const Matrix<Scalar>& decoder() const {
    return config.tied_head ? token_emb : mlm_head;
  }
};

// Calls f(name, tensor) for every tensor in declaration order.
template <typename Params, typename F>
void for_each_tensor(Params& p, F&& f) {
  f("token_emb", p.token_emb);
  f("position_emb", p.position_emb);
  f("field_emb", p.field_emb);
  f("item_emb", p.item_emb);
  f("emb_ln_g", p.emb_ln_g);
  f("emb_ln_b", p.emb_ln_b);
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    auto& l = p.layers[i];
    const std::string pre = "layer" + std::to_string(i) + ".";
    f(pre + "ln1_g", l.ln1_g);
    f(pre + "ln1_b", l.ln1_b);
    f(pre + "wq", l.wq);
    f(pre + "bq", l.bq);
    f(pre + "wk", l.wk);
    f(pre + "bk", l.bk);
    f(pre + "wv", l.wv);
    f(pre + "bv", l.bv);
    f(pre + "wo", l.wo);
    f(pre + "bo", l.bo);
    f(pre + "ln2_g", l.ln2_g);
    f(pre + "ln2_b", l.ln2_b);
    f(pre + "w1", l.w1);
    f(pre + "b1", l.b1);
    f(pre + "w2", l.w2);
    f(pre + "b2", l.b2);
  }
  f("final_ln_g", p.final_ln_g);
  f("final_ln_b", p.final_ln_b);
  if (!p.config.tied_head) f("mlm_head", p.mlm_head);
}

template <typename To, typename From>
ModelParams<To> cast_params(const ModelParams<From>& p) {
  ModelParams<To> out = ModelParams<To>::zeros(p.config);
  std::vector<const Matrix<From>*> src;
  for_each_tensor(p, [&](const std::string&, const Matrix<From>& t) { src.push_back(&t); });
  std::size_t i = 0;
  for_each_tensor(out, [&](const std::string&, Matrix<To>& t) {
    t = src[i++]->template cast<To>();
  });
  return out;
}

template <typename Scalar>
struct LayerNormCache {
  Matrix<Scalar> xhat;                         // normalized input
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> rstd;  // 1 / sqrt(var + eps) per row
};

template <typename Scalar>
struct LayerTape {
  Matrix<Scalar> x;  // layer input
  LayerNormCache<Scalar> ln1;
  Matrix<Scalar> h1, q, k, v;
  std::vector<Matrix<Scalar>> probs;  // per head, tokens x tokens
  Matrix<Scalar> ctx, attn_mask;
  Matrix<Scalar> x_mid;
  LayerNormCache<Scalar> ln2;
  Matrix<Scalar> h2, f_pre, f_act, ffn_mask;
};

// Everything forward() computes, kept for backward().
template <typename Scalar>
struct Activations {
  ModelInput input;
  std::vector<int> item_rows;  // clamped item-position ids
  LayerNormCache<Scalar> emb_ln;
  Matrix<Scalar> emb_mask;
  std::vector<LayerTape<Scalar>> layers;
  LayerNormCache<Scalar> final_ln;
  Matrix<Scalar> hidden;  // tokens x d
  Matrix<Scalar> pooled;  // 1 x d, unit norm
  Scalar pooled_norm = 0;
};

// Train mode applies dropout with masks drawn from `rng` (required then).
// Throws InputError for out-of-range ids or overlong input.
template <typename Scalar>
Activations<Scalar> forward(const ModelParams<Scalar>& params, const ModelInput& input,
                            bool train_mode = false, Rng* rng = nullptr);

// Logits over the vocabulary for the given rows of `hidden` (all rows when
// `rows` is empty).
template <typename Scalar>
Matrix<Scalar> mlm_logits(const ModelParams<Scalar>& params, const Matrix<Scalar>& hidden,
                          const std::vector<int>& rows = {});

// Accumulates into `grads` the gradient reaching the parameters from
// d(loss)/d(hidden) and d(loss)/d(pooled). Either upstream may be empty.
template <typename Scalar>
void backward(const ModelParams<Scalar>& params, const Activations<Scalar>& act,
              const Matrix<Scalar>& d_hidden, const Matrix<Scalar>& d_pooled,
              ModelParams<Scalar>& grads);

// Gradient of the MLM decoder from d(loss)/d(logits) over `rows`; returns
// d(loss)/d(hidden) for the full sequence.
template <typename Scalar>
Matrix<Scalar> mlm_backward(const ModelParams<Scalar>& params, const Matrix<Scalar>& hidden,
                            const std::vector<int>& rows, const Matrix<Scalar>& d_logits,
                            ModelParams<Scalar>& grads);

// Throws TrainingError naming the first tensor holding NaN or Inf.
template <typename Scalar>
void check_finite(const ModelParams<Scalar>& params, const char* what);

// Pooled embedding of a one-item sequence (eval mode).
template <typename Scalar>
Eigen::Matrix<Scalar, 1, Eigen::Dynamic> encode_item(const ModelParams<Scalar>& params,
                                                     const TokenizedItem& item);

// Checkpoint: "PRCK", version, config, little-endian float32 tensors in
// declaration order, FNV-1a checksum.
void save_checkpoint(const ModelParams<float>& params, std::ostream& out);
ModelParams<float> load_checkpoint(std::istream& in);

}  // namespace poirec

#endif  // POIREC_MODEL_HPP_
