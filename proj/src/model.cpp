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
#include <cstring>
#include <istream>
#include <ostream>

#include "binary_io.hpp"
#include "poirec/error.hpp"

namespace poirec {

namespace {

constexpr double kLayerNormEps = 1e-5;

template <typename S>
Matrix<S> layer_norm(const Matrix<S>& x, const Matrix<S>& g, const Matrix<S>& b,
                     LayerNormCache<S>& cache) {
  const Eigen::Index n = x.cols();
  const auto mean = x.rowwise().mean();
  cache.xhat = x.colwise() - mean;
  const auto var = cache.xhat.array().square().rowwise().sum() / S(n);
  cache.rstd = (var + S(kLayerNormEps)).rsqrt().matrix();
  cache.xhat.array().colwise() *= cache.rstd.array();
  Matrix<S> y = cache.xhat.array().rowwise() * g.row(0).array();
  y.rowwise() += b.row(0);
  return y;
}

template <typename S>
Matrix<S> layer_norm_backward(const Matrix<S>& dy, const Matrix<S>& g,
                              const LayerNormCache<S>& cache, Matrix<S>& dg,
                              Matrix<S>& db) {
  dg += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  db += dy.colwise().sum();
  const Matrix<S> dxhat = dy.array().rowwise() * g.row(0).array();
  const auto mean_d = dxhat.rowwise().mean();
  const auto mean_dx = (dxhat.array() * cache.xhat.array()).rowwise().mean();
  Matrix<S> dx = dxhat.colwise() - mean_d;
  dx.array() -= cache.xhat.array().colwise() * mean_dx;
  dx.array().colwise() *= cache.rstd.array();
  return dx;
}

template <typename S>
Matrix<S> linear(const Matrix<S>& x, const Matrix<S>& w, const Matrix<S>& b) {
  Matrix<S> y(x.rows(), w.cols());
  y.noalias() = x * w;
  y.rowwise() += b.row(0);
  return y;
}

// Accumulates dW, db and returns dx for y = x W + b.
template <typename S>
Matrix<S> linear_backward(const Matrix<S>& dy, const Matrix<S>& x, const Matrix<S>& w,
                          Matrix<S>& dw, Matrix<S>& db) {
  dw.noalias() += x.transpose() * dy;
  db += dy.colwise().sum();
  Matrix<S> dx(dy.rows(), w.rows());
  dx.noalias() = dy * w.transpose();
  return dx;
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

template <typename S>
Matrix<S> gelu(const Matrix<S>& x) {
  const auto a = x.array();
  return (S(0.5) * a * (S(1) + (S(kGeluC) * (a + S(kGeluA) * a.cube())).tanh())).matrix();
}

template <typename S>
Matrix<S> gelu_grad(const Matrix<S>& x) {
  const auto a = x.array();
  const auto t = (S(kGeluC) * (a + S(kGeluA) * a.cube())).tanh();
  return (S(0.5) * (S(1) + t) +
          S(0.5) * a * (S(1) - t.square()) * S(kGeluC) * (S(1) + S(3 * kGeluA) * a.square()))
      .matrix();
}

template <typename S>
Matrix<S> dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  Matrix<S> m(rows, cols);
  const S keep = S(1.0 / (1.0 - rate));
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = uniform_real(rng) < rate ? S(0) : keep;
  }
  return m;
}

template <typename S>
void uniform_fill(Matrix<S>& m, Eigen::Index rows, Eigen::Index cols, double a, Rng& rng) {
  m.resize(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = S((2.0 * uniform_real(rng) - 1.0) * a);
  }
}

template <typename S>
ModelParams<S> shaped(const ModelConfig& c) {
  ModelParams<S> p;
  p.config = c;
  const int d = c.d_model;
  p.token_emb = Matrix<S>::Zero(c.vocab_size, d);
  p.position_emb = Matrix<S>::Zero(c.max_tokens, d);
  p.field_emb = Matrix<S>::Zero(2, d);
  p.item_emb = Matrix<S>::Zero(c.max_items, d);
  p.emb_ln_g = Matrix<S>::Zero(1, d);
  p.emb_ln_b = Matrix<S>::Zero(1, d);
  p.layers.resize(static_cast<std::size_t>(c.n_layers));
  for (auto& l : p.layers) {
    for (auto* m : {&l.ln1_g, &l.ln1_b, &l.bq, &l.bk, &l.bv, &l.bo, &l.ln2_g, &l.ln2_b, &l.b2}) {
      *m = Matrix<S>::Zero(1, d);
    }
    for (auto* m : {&l.wq, &l.wk, &l.wv, &l.wo}) *m = Matrix<S>::Zero(d, d);
    l.w1 = Matrix<S>::Zero(d, c.d_ff);
    l.b1 = Matrix<S>::Zero(1, c.d_ff);
    l.w2 = Matrix<S>::Zero(c.d_ff, d);
  }
  p.final_ln_g = Matrix<S>::Zero(1, d);
  p.final_ln_b = Matrix<S>::Zero(1, d);
  if (!c.tied_head) p.mlm_head = Matrix<S>::Zero(c.vocab_size, d);
  return p;
}

}  // namespace

void ModelConfig::validate() const {
  if (vocab_size < special::kCount + 1) throw ConfigError("vocab_size too small");
  if (d_model < 1 || n_layers < 1 || n_heads < 1 || d_ff < 1 || max_tokens < 2 ||
      max_items < 2) {
    throw ConfigError("model dimensions must be positive");
  }
  if (d_model % n_heads != 0) throw ConfigError("d_model must be divisible by n_heads");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
}

template <typename S>
ModelParams<S> ModelParams<S>::zeros(const ModelConfig& config) {
  config.validate();
  return shaped<S>(config);
}

template <typename S>
ModelParams<S> ModelParams<S>::init(const ModelConfig& config) {
  ModelParams<S> p = zeros(config);
  Rng rng = substream(config.seed, "init");
  const double a = 1.0 / std::sqrt(static_cast<double>(config.d_model));
  for_each_tensor(p, [&](const std::string& name, Matrix<S>& t) {
    const bool gain = name.compare(name.size() - 2, 2, "_g") == 0;
    if (gain) {
      t.setOnes();
    } else if (t.rows() == 1) {  // biases and layer-norm shifts
      t.setZero();
    } else {
      uniform_fill(t, t.rows(), t.cols(), a, rng);
    }
  });
  return p;
}

template <typename S>
std::size_t ModelParams<S>::parameter_count() const {
  std::size_t n = 0;
  for_each_tensor(*this, [&](const std::string&, const Matrix<S>& t) {
    n += static_cast<std::size_t>(t.size());
  });
  return n;
}

// ---------------------------------------------------------------------------

template <typename S>
Activations<S> forward(const ModelParams<S>& params, const ModelInput& input,
                       bool train_mode, Rng* rng) {
  const ModelConfig& c = params.config;
  const auto L = static_cast<Eigen::Index>(input.size());
  if (L == 0) throw InputError("empty model input");
  if (L > c.max_tokens) {
    throw InputError("input of " + std::to_string(L) + " tokens exceeds max_tokens " +
                     std::to_string(c.max_tokens));
  }
  if (input.field_type_ids.size() != input.size() ||
      input.item_position_ids.size() != input.size() ||
      input.position_ids.size() != input.size()) {
    throw InputError("model input channels differ in length");
  }
  const bool drop = train_mode && c.dropout > 0.0;
  if (drop && rng == nullptr) throw InputError("train mode needs a random stream");

  Activations<S> act;
  act.input = input;
  act.item_rows.resize(input.size());
  const int d = c.d_model;
  Matrix<S> x(L, d);
  for (Eigen::Index i = 0; i < L; ++i) {
    const auto u = static_cast<std::size_t>(i);
    const TokenId tok = input.token_ids[u], pos = input.position_ids[u],
                  field = input.field_type_ids[u], item = input.item_position_ids[u];
    if (tok < 0 || tok >= c.vocab_size) {
      throw InputError("token id " + std::to_string(tok) + " outside vocabulary of " +
                       std::to_string(c.vocab_size));
    }
    if (pos < 0 || pos >= c.max_tokens || field < 0 || field > 1 || item < 0) {
      throw InputError("position, field or item id out of range");
    }
    act.item_rows[u] = std::min<int>(item, c.max_items - 1);
    x.row(i) = params.token_emb.row(tok) + params.position_emb.row(pos) +
               params.field_emb.row(field) + params.item_emb.row(act.item_rows[u]);
  }
  x = layer_norm(x, params.emb_ln_g, params.emb_ln_b, act.emb_ln);
  if (drop) {
    act.emb_mask = dropout_mask<S>(L, d, c.dropout, *rng);
    x.array() *= act.emb_mask.array();
  }

  const int dh = d / c.n_heads;
  const S scale = S(1.0 / std::sqrt(static_cast<double>(dh)));
  act.layers.resize(params.layers.size());
  for (std::size_t li = 0; li < params.layers.size(); ++li) {
    const LayerParams<S>& p = params.layers[li];
    LayerTape<S>& t = act.layers[li];
    t.x = x;
    t.h1 = layer_norm(x, p.ln1_g, p.ln1_b, t.ln1);
    t.q = linear(t.h1, p.wq, p.bq);
    t.k = linear(t.h1, p.wk, p.bk);
    t.v = linear(t.h1, p.wv, p.bv);
    t.ctx.resize(L, d);
    t.probs.resize(static_cast<std::size_t>(c.n_heads));
    for (int h = 0; h < c.n_heads; ++h) {
      Matrix<S>& P = t.probs[static_cast<std::size_t>(h)];
      P.noalias() = t.q.middleCols(h * dh, dh) * t.k.middleCols(h * dh, dh).transpose();
      P *= scale;
      const auto row_max = P.rowwise().maxCoeff();
      P = (P.colwise() - row_max).array().exp().matrix();
      P.array().colwise() /= P.rowwise().sum().array();
      t.ctx.middleCols(h * dh, dh).noalias() = P * t.v.middleCols(h * dh, dh);
    }
    Matrix<S> a = linear(t.ctx, p.wo, p.bo);
    if (drop) {
      t.attn_mask = dropout_mask<S>(L, d, c.dropout, *rng);
      a.array() *= t.attn_mask.array();
    }
    t.x_mid = t.x + a;
    t.h2 = layer_norm(t.x_mid, p.ln2_g, p.ln2_b, t.ln2);
    t.f_pre = linear(t.h2, p.w1, p.b1);
    t.f_act = gelu(t.f_pre);
    Matrix<S> o = linear(t.f_act, p.w2, p.b2);
    if (drop) {
      t.ffn_mask = dropout_mask<S>(L, d, c.dropout, *rng);
      o.array() *= t.ffn_mask.array();
    }
    x = t.x_mid + o;
  }
  act.hidden = layer_norm(x, params.final_ln_g, params.final_ln_b, act.final_ln);
  act.pooled_norm = act.hidden.row(0).norm();
  act.pooled = act.hidden.row(0) / act.pooled_norm;
  return act;
}

template <typename S>
Matrix<S> mlm_logits(const ModelParams<S>& params, const Matrix<S>& hidden,
                     const std::vector<int>& rows) {
  const Matrix<S>& W = params.decoder();
  if (rows.empty()) return hidden * W.transpose();
  Matrix<S> h(static_cast<Eigen::Index>(rows.size()), hidden.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) h.row(static_cast<Eigen::Index>(i)) = hidden.row(rows[i]);
  return h * W.transpose();
}

template <typename S>
Matrix<S> mlm_backward(const ModelParams<S>& params, const Matrix<S>& hidden,
                       const std::vector<int>& rows, const Matrix<S>& d_logits,
                       ModelParams<S>& grads) {
  const Matrix<S>& W = params.decoder();
  Matrix<S>& dW = params.config.tied_head ? grads.token_emb : grads.mlm_head;
  Matrix<S> d_hidden = Matrix<S>::Zero(hidden.rows(), hidden.cols());
  if (rows.empty()) {
    dW.noalias() += d_logits.transpose() * hidden;
    d_hidden.noalias() = d_logits * W;
    return d_hidden;
  }
  Matrix<S> h(static_cast<Eigen::Index>(rows.size()), hidden.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) h.row(static_cast<Eigen::Index>(i)) = hidden.row(rows[i]);
  dW.noalias() += d_logits.transpose() * h;
  const Matrix<S> dh = d_logits * W;
  for (std::size_t i = 0; i < rows.size(); ++i) d_hidden.row(rows[i]) += dh.row(static_cast<Eigen::Index>(i));
  return d_hidden;
}

template <typename S>
void backward(const ModelParams<S>& params, const Activations<S>& act,
              const Matrix<S>& d_hidden, const Matrix<S>& d_pooled, ModelParams<S>& grads) {
  const ModelConfig& c = params.config;
  const Eigen::Index L = act.hidden.rows();
  const int d = c.d_model;
  Matrix<S> dH = d_hidden.size() == 0 ? Matrix<S>::Zero(L, d) : d_hidden;
  if (d_pooled.size() != 0) {
    const S proj = act.pooled.row(0).dot(d_pooled.row(0));
    dH.row(0) += (d_pooled.row(0) - proj * act.pooled.row(0)) / act.pooled_norm;
  }
  Matrix<S> dx = layer_norm_backward(dH, params.final_ln_g, act.final_ln, grads.final_ln_g,
                                     grads.final_ln_b);

  const int dh = d / c.n_heads;
  const S scale = S(1.0 / std::sqrt(static_cast<double>(dh)));
  for (std::size_t li = params.layers.size(); li-- > 0;) {
    const LayerParams<S>& p = params.layers[li];
    LayerParams<S>& g = grads.layers[li];
    const LayerTape<S>& t = act.layers[li];

    Matrix<S> d_o = dx;
    if (t.ffn_mask.size() != 0) d_o.array() *= t.ffn_mask.array();
    Matrix<S> d_f = linear_backward(d_o, t.f_act, p.w2, g.w2, g.b2);
    d_f.array() *= gelu_grad(t.f_pre).array();
    const Matrix<S> d_h2 = linear_backward(d_f, t.h2, p.w1, g.w1, g.b1);
    Matrix<S> d_mid = dx + layer_norm_backward(d_h2, p.ln2_g, t.ln2, g.ln2_g, g.ln2_b);

    Matrix<S> d_a = d_mid;
    if (t.attn_mask.size() != 0) d_a.array() *= t.attn_mask.array();
    const Matrix<S> d_ctx = linear_backward(d_a, t.ctx, p.wo, g.wo, g.bo);
    Matrix<S> dq(L, d), dk(L, d), dv(L, d);
    for (int h = 0; h < c.n_heads; ++h) {
      const Matrix<S>& P = t.probs[static_cast<std::size_t>(h)];
      const auto dc = d_ctx.middleCols(h * dh, dh);
      Matrix<S> dP = dc * t.v.middleCols(h * dh, dh).transpose();
      dv.middleCols(h * dh, dh).noalias() = P.transpose() * dc;
      const auto row_dot = (dP.array() * P.array()).rowwise().sum();
      Matrix<S> dS = (P.array() * (dP.colwise() - row_dot.matrix()).array()).matrix() * scale;
      dq.middleCols(h * dh, dh).noalias() = dS * t.k.middleCols(h * dh, dh);
      dk.middleCols(h * dh, dh).noalias() = dS.transpose() * t.q.middleCols(h * dh, dh);
    }
    Matrix<S> d_h1 = linear_backward(dq, t.h1, p.wq, g.wq, g.bq);
    d_h1 += linear_backward(dk, t.h1, p.wk, g.wk, g.bk);
    d_h1 += linear_backward(dv, t.h1, p.wv, g.wv, g.bv);
    dx = d_mid + layer_norm_backward(d_h1, p.ln1_g, t.ln1, g.ln1_g, g.ln1_b);
  }

  if (act.emb_mask.size() != 0) dx.array() *= act.emb_mask.array();
  const Matrix<S> de = layer_norm_backward(dx, params.emb_ln_g, act.emb_ln, grads.emb_ln_g,
                                           grads.emb_ln_b);
  for (Eigen::Index i = 0; i < L; ++i) {
    const auto u = static_cast<std::size_t>(i);
    grads.token_emb.row(act.input.token_ids[u]) += de.row(i);
    grads.position_emb.row(act.input.position_ids[u]) += de.row(i);
    grads.field_emb.row(act.input.field_type_ids[u]) += de.row(i);
    grads.item_emb.row(act.item_rows[u]) += de.row(i);
  }
}

template <typename S>
void check_finite(const ModelParams<S>& params, const char* what) {
  for_each_tensor(params, [&](const std::string& name, const Matrix<S>& t) {
    if (!t.allFinite()) {
      throw TrainingError(std::string("non-finite ") + what + " in " + name);
    }
  });
}

template <typename S>
Eigen::Matrix<S, 1, Eigen::Dynamic> encode_item(const ModelParams<S>& params,
                                                const TokenizedItem& item) {
  const auto packed = pack_sequence(std::vector<const TokenizedItem*>{&item},
                                    static_cast<std::size_t>(params.config.max_tokens));
  return forward(params, packed.input).pooled;
}

#define POIREC_INSTANTIATE(S)                                                         \
  template struct ModelParams<S>;                                                     \
  template Activations<S> forward(const ModelParams<S>&, const ModelInput&, bool,     \
                                  Rng*);                                              \
  template Matrix<S> mlm_logits(const ModelParams<S>&, const Matrix<S>&,              \
                                const std::vector<int>&);                             \
  template Matrix<S> mlm_backward(const ModelParams<S>&, const Matrix<S>&,            \
                                  const std::vector<int>&, const Matrix<S>&,          \
                                  ModelParams<S>&);                                   \
  template void backward(const ModelParams<S>&, const Activations<S>&,                \
                         const Matrix<S>&, const Matrix<S>&, ModelParams<S>&);        \
  template void check_finite(const ModelParams<S>&, const char*);                     \
  template Eigen::Matrix<S, 1, Eigen::Dynamic> encode_item(const ModelParams<S>&,     \
                                                           const TokenizedItem&);

POIREC_INSTANTIATE(float)
POIREC_INSTANTIATE(double)
#undef POIREC_INSTANTIATE

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kCheckpointMagic[4] = {'P', 'R', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(const ModelParams<float>& params, std::ostream& out) {
  HashingWriter w(out);
  const ModelConfig& c = params.config;
  w.bytes(kCheckpointMagic, 4);
  w.u32(kCheckpointVersion);
  for (int v : {c.vocab_size, c.d_model, c.n_layers, c.n_heads, c.d_ff, c.max_tokens,
                c.max_items}) {
    w.u32(static_cast<std::uint32_t>(v));
  }
  w.f64(c.dropout);
  w.u32(c.tied_head ? 1 : 0);
  w.u64(c.seed);
  for_each_tensor(params, [&](const std::string&, const Matrix<float>& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) w.f32(t.data()[i]);
  });
  const std::uint64_t h = w.hash();
  HashingWriter(out).u64(h);
  if (!out) throw IoError("failed to write checkpoint");
}

ModelParams<float> load_checkpoint(std::istream& in) {
  HashingReader r(in);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0) throw IoError("not a checkpoint");
  if (r.u32() != kCheckpointVersion) throw IoError("unsupported checkpoint version");
  ModelConfig c;
  for (int* v : {&c.vocab_size, &c.d_model, &c.n_layers, &c.n_heads, &c.d_ff,
                 &c.max_tokens, &c.max_items}) {
    *v = static_cast<int>(r.u32());
  }
  c.dropout = r.f64();
  c.tied_head = r.u32() != 0;
  c.seed = r.u64();
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw IoError(std::string("corrupt checkpoint header: ") + e.what());
  }
  ModelParams<float> p = ModelParams<float>::zeros(c);
  for_each_tensor(p, [&](const std::string&, Matrix<float>& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = r.f32();
  });
  const std::uint64_t expected = r.hash();
  if (r.u64(false) != expected) throw IoError("checkpoint checksum mismatch");
  return p;
}

}  // namespace poirec
