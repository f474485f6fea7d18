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

#include "poirec/train.hpp"

#include <chrono>
#include <cmath>
#include <ostream>

#include "json.hpp"
#include "poirec/error.hpp"
#include "poirec/eval.hpp"
#include "poirec/parallel.hpp"

namespace poirec {

void TrainConfig::validate() const {
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
  if (pretrain_epochs < 0 || finetune_epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (warmup_steps < 0) throw ConfigError("warmup_steps must be >= 0");
  if (!(mask_prob > 0.0 && mask_prob < 1.0)) throw ConfigError("mask_prob must be in (0, 1)");
  if (!(temperature > 0.0)) throw ConfigError("temperature must be > 0");
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  if (patience < 0) throw ConfigError("patience must be >= 0");
  if (!(validation_fraction > 0.0 && validation_fraction <= 0.5)) {
    throw ConfigError("validation_fraction must be in (0, 0.5]");
  }
  if (pairs_per_user < 0) throw ConfigError("pairs_per_user must be >= 0");
  if (weight_decay < 0.0 || max_grad_norm < 0.0) {
    throw ConfigError("weight_decay and max_grad_norm must be >= 0");
  }
}

// ---------------------------------------------------------------------------

MaskedInput mask_tokens(const ModelInput& input, double mask_prob, int vocab_size,
                        Rng& rng) {
  MaskedInput out{input, {}, {}};
  for (std::size_t i = 0; i < input.size(); ++i) {
    const TokenId tok = input.token_ids[i];
    if (input.field_type_ids[i] != kValueField || tok == special::kPad ||
        tok == special::kCls || tok == special::kMask) {
      continue;
    }
    if (uniform_real(rng) >= mask_prob) continue;
    out.positions.push_back(static_cast<int>(i));
    out.targets.push_back(tok);
    const double u = uniform_real(rng);
    if (u < 0.8) {
      out.input.token_ids[i] = special::kMask;
    } else if (u < 0.9 && vocab_size > special::kCount) {
      out.input.token_ids[i] = special::kCount + static_cast<TokenId>(uniform_index(
                                   rng, static_cast<std::uint64_t>(vocab_size - special::kCount)));
    }
  }
  return out;
}

template <typename S>
ContrastiveResult<S> contrastive_loss(const Matrix<S>& queries, const Matrix<S>& candidates,
                                      S temperature, const std::vector<int>& targets) {
  const Eigen::Index B = queries.rows(), N = candidates.rows();
  if (targets.empty() && (B < 2 || N != B)) {
    throw ValidationError("in-batch contrastive loss needs B >= 2 matched pairs");
  }
  if (!targets.empty() && static_cast<Eigen::Index>(targets.size()) != B) {
    throw ValidationError("one target per query required");
  }
  if (queries.cols() != candidates.cols()) throw ValidationError("dimension mismatch");

  Matrix<S> logits(B, N);
  logits.noalias() = queries * candidates.transpose();
  logits /= temperature;
  ContrastiveResult<S> r;
  Matrix<S> d_logits(B, N);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < B; ++i) {
    const Eigen::Index t = targets.empty() ? i : targets[static_cast<std::size_t>(i)];
    if (t < 0 || t >= N) throw ValidationError("contrastive target out of range");
    const S mx = logits.row(i).maxCoeff();
    const auto e = (logits.row(i).array() - mx).exp();
    const S z = e.sum();
    loss += static_cast<double>(std::log(z) + mx - logits(i, t));
    d_logits.row(i) = (e / z).matrix();
    d_logits(i, t) -= S(1);
  }
  d_logits /= S(B) * temperature;
  r.loss = S(loss / static_cast<double>(B));
  r.d_queries.noalias() = d_logits * candidates;
  r.d_candidates.noalias() = d_logits.transpose() * queries;
  return r;
}

template <typename S>
LossBreakdown pretrain_loss(const ModelParams<S>& params,
                            const std::vector<PretrainExample>& batch,
                            const TrainConfig& config, ModelParams<S>* grads,
                            bool train_mode, std::uint64_t dropout_seed) {
  const std::size_t B = batch.size();
  const bool use_con = config.lambda > 0.0;
  if (use_con && B < 2) throw ValidationError("contrastive batch needs B >= 2");

  std::vector<Activations<S>> seq(B), item(use_con ? B : 0);
  parallel_for(B, config.threads, [&](std::size_t i) {
    Rng r1 = substream(dropout_seed, "seq" + std::to_string(i));
    seq[i] = forward(params, batch[i].sequence.input, train_mode, &r1);
    if (use_con) {
      Rng r2 = substream(dropout_seed, "item" + std::to_string(i));
      item[i] = forward(params, batch[i].item, train_mode, &r2);
    }
  });

  LossBreakdown out;
  for (const auto& ex : batch) out.masked_tokens += ex.sequence.positions.size();

  // MLM: softmax cross-entropy over the vocabulary at masked positions.
  std::vector<Matrix<S>> d_logits(B);
  std::vector<double> mlm_sum(B, 0.0);
  if (out.masked_tokens > 0) {
    const S inv = S(1.0 / static_cast<double>(out.masked_tokens));
    parallel_for(B, config.threads, [&](std::size_t i) {
      const auto& ex = batch[i].sequence;
      if (ex.positions.empty()) return;
      Matrix<S> logits = mlm_logits(params, seq[i].hidden, ex.positions);
      for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const TokenId t = ex.targets[static_cast<std::size_t>(r)];
        const S mx = logits.row(r).maxCoeff();
        logits.row(r) = (logits.row(r).array() - mx).exp().matrix();
        const S z = logits.row(r).sum();
        mlm_sum[i] += static_cast<double>(std::log(z) + mx) -
                      static_cast<double>(std::log(logits(r, t)) + mx);
        logits.row(r) /= z;
        logits(r, t) -= S(1);
      }
      d_logits[i] = logits * inv;
    });
    for (double s : mlm_sum) out.mlm += s;
    out.mlm /= static_cast<double>(out.masked_tokens);
  }

  ContrastiveResult<S> con;
  if (use_con) {
    const int d = params.config.d_model;
    Matrix<S> Q(static_cast<Eigen::Index>(B), d), C(static_cast<Eigen::Index>(B), d);
    for (std::size_t i = 0; i < B; ++i) {
      Q.row(static_cast<Eigen::Index>(i)) = seq[i].pooled;
      C.row(static_cast<Eigen::Index>(i)) = item[i].pooled;
    }
    con = contrastive_loss<S>(Q, C, S(config.temperature));
    out.contrastive = static_cast<double>(con.loss);
  }
  out.total = out.mlm + config.lambda * out.contrastive;
  if (grads == nullptr) return out;

  std::vector<ModelParams<S>> per(B);
  const S lambda = S(config.lambda);
  parallel_for(B, config.threads, [&](std::size_t i) {
    per[i] = ModelParams<S>::zeros(params.config);
    Matrix<S> d_hidden;
    if (d_logits[i].size() != 0) {
      d_hidden = mlm_backward(params, seq[i].hidden, batch[i].sequence.positions,
                              d_logits[i], per[i]);
    }
    Matrix<S> d_seq, d_item;
    if (use_con) {
      d_seq = con.d_queries.row(static_cast<Eigen::Index>(i)) * lambda;
      d_item = con.d_candidates.row(static_cast<Eigen::Index>(i)) * lambda;
    }
    if (d_hidden.size() != 0 || d_seq.size() != 0) {
      backward(params, seq[i], d_hidden, d_seq, per[i]);
    }
    if (use_con) backward(params, item[i], Matrix<S>(), d_item, per[i]);
  });
  for (std::size_t i = 0; i < B; ++i) {
    std::vector<Matrix<S>*> dst;
    for_each_tensor(*grads, [&](const std::string&, Matrix<S>& t) { dst.push_back(&t); });
    std::size_t k = 0;
    for_each_tensor(per[i], [&](const std::string&, const Matrix<S>& t) { *dst[k++] += t; });
  }
  return out;
}

#define POIREC_INSTANTIATE(S)                                                           \
  template ContrastiveResult<S> contrastive_loss(const Matrix<S>&, const Matrix<S>&, S, \
                                                 const std::vector<int>&);              \
  template LossBreakdown pretrain_loss(const ModelParams<S>&,                           \
                                       const std::vector<PretrainExample>&,             \
                                       const TrainConfig&, ModelParams<S>*, bool,       \
                                       std::uint64_t);
POIREC_INSTANTIATE(float)
POIREC_INSTANTIATE(double)
#undef POIREC_INSTANTIATE

// ---------------------------------------------------------------------------

Adam::Adam(const ModelParams<float>& params, const TrainConfig& config)
    : config_(config),
      m_(ModelParams<float>::zeros(params.config)),
      v_(ModelParams<float>::zeros(params.config)) {}

double Adam::current_lr() const {
  if (config_.warmup_steps <= 0) return config_.learning_rate;
  const double ramp = std::min(1.0, static_cast<double>(t_ + 1) /
                                        static_cast<double>(config_.warmup_steps));
  return config_.learning_rate * ramp;
}

void Adam::step(ModelParams<float>& params, const ModelParams<float>& grads) {
  const double lr = current_lr();
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  const float b1 = static_cast<float>(config_.beta1), b2 = static_cast<float>(config_.beta2);
  const float step = static_cast<float>(lr / c1);
  const float inv_c2 = static_cast<float>(1.0 / c2);
  const float eps = static_cast<float>(config_.adam_eps);
  const float decay = static_cast<float>(lr * config_.weight_decay);

  std::vector<Matrix<float>*> p, m, v;
  std::vector<const Matrix<float>*> g;
  for_each_tensor(params, [&](const std::string&, Matrix<float>& t) { p.push_back(&t); });
  for_each_tensor(m_, [&](const std::string&, Matrix<float>& t) { m.push_back(&t); });
  for_each_tensor(v_, [&](const std::string&, Matrix<float>& t) { v.push_back(&t); });
  for_each_tensor(grads, [&](const std::string&, const Matrix<float>& t) { g.push_back(&t); });
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i]->array() = b1 * m[i]->array() + (1.0f - b1) * g[i]->array();
    v[i]->array() = b2 * v[i]->array() + (1.0f - b2) * g[i]->array().square();
    if (decay != 0.0f) p[i]->array() -= decay * p[i]->array();
    p[i]->array() -= step * m[i]->array() / ((v[i]->array() * inv_c2).sqrt() + eps);
  }
}

// ---------------------------------------------------------------------------

void TrainReport::write_jsonl(std::ostream& out) const {
  using nlohmann::json;
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  for (const auto& e : epochs) {
    out << json{{"phase", e.phase},
                {"epoch", e.epoch},
                {"mlm", opt(e.mlm)},
                {"contrastive", opt(e.contrastive)},
                {"total", opt(e.total)},
                {"validation_ndcg10", opt(e.validation_ndcg10)},
                {"steps", e.steps},
                {"seconds", e.seconds}}
               .dump()
        << '\n';
  }
  out << json{{"summary", true},
              {"best_epoch_stage1", best_epoch_stage1},
              {"best_epoch_stage2", best_epoch_stage2},
              {"best_validation_ndcg10", best_validation_ndcg10},
              {"wall_seconds", wall_seconds}}
             .dump()
      << '\n';
}

std::vector<Pair> sample_pairs(const std::vector<UserSequence>& sequences,
                               int pairs_per_user, Rng& rng) {
  std::vector<Pair> pairs;
  for (std::size_t s = 0; s < sequences.size(); ++s) {
    const std::size_t n = sequences[s].items.size();
    if (n < kMinSequenceLength) continue;
    const std::size_t cuts = n - 1;
    const auto k = static_cast<std::size_t>(pairs_per_user);
    if (k == 0 || k >= cuts) {
      for (std::size_t c = 1; c <= cuts; ++c) pairs.push_back({s, c});
    } else {
      for (std::size_t i : sample_without_replacement(rng, cuts, k)) pairs.push_back({s, i + 1});
    }
  }
  shuffle(pairs, rng);
  return pairs;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<const TokenizedItem*> resolve(const UserSequence& seq, std::size_t begin,
                                          std::size_t end,
                                          const std::map<std::string, TokenizedItem>& items) {
  std::vector<const TokenizedItem*> out;
  for (std::size_t i = begin; i < end; ++i) {
    const auto it = items.find(seq.items[i].venue_id);
    if (it == items.end()) {
      throw ValidationError("sequence of " + seq.user_id + " references unknown venue " +
                            seq.items[i].venue_id);
    }
    out.push_back(&it->second);
  }
  return out;
}

void check_sequences(const TrainingSet& data) {
  for (const auto& s : data.sequences) resolve(s, 0, s.items.size(), data.items);
}

void clip_gradients(ModelParams<float>& grads, double max_norm) {
  if (max_norm <= 0.0) return;
  double sq = 0.0;
  for_each_tensor(grads, [&](const std::string&, const Matrix<float>& t) {
    sq += t.cast<double>().squaredNorm();
  });
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return;
  const auto s = static_cast<float>(max_norm / norm);
  for_each_tensor(grads, [&](const std::string&, Matrix<float>& t) { t *= s; });
}

void check_loss(double loss, const std::string& phase, int epoch, std::size_t step) {
  if (!std::isfinite(loss)) {
    throw TrainingError("non-finite loss in " + phase + " epoch " + std::to_string(epoch) +
                        " step " + std::to_string(step));
  }
}

}  // namespace

TrainReport pretrain(const TrainingSet& data, ModelParams<float>& params,
                     const TrainConfig& config) {
  config.validate();
  check_sequences(data);
  const auto t0 = Clock::now();
  const auto max_tokens = static_cast<std::size_t>(params.config.max_tokens);
  TrainReport report;
  Adam adam(params, config);
  for (int epoch = 1; epoch <= config.pretrain_epochs; ++epoch) {
    const auto te = Clock::now();
    Rng rng = substream(config.seed, "pretrain/" + std::to_string(epoch));
    const auto pairs = sample_pairs(data.sequences, config.pairs_per_user, rng);
    const auto B = static_cast<std::size_t>(config.batch_size);
    double mlm = 0.0, con = 0.0, total = 0.0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start + 2 <= pairs.size(); start += B) {
      const std::size_t end = std::min(pairs.size(), start + B);
      std::vector<PretrainExample> batch;
      for (std::size_t j = start; j < end; ++j) {
        const auto& seq = data.sequences[pairs[j].sequence];
        const std::size_t cut = pairs[j].cut;
        const auto prefix = resolve(seq, 0, cut, data.items);
        const auto target = resolve(seq, cut, cut + 1, data.items);
        PretrainExample ex;
        ex.sequence = mask_tokens(pack_sequence(prefix, max_tokens).input, config.mask_prob,
                                  params.config.vocab_size, rng);
        ex.item = pack_sequence(target, max_tokens).input;
        batch.push_back(std::move(ex));
      }
      auto grads = ModelParams<float>::zeros(params.config);
      const LossBreakdown loss = pretrain_loss(params, batch, config, &grads, true, rng());
      check_loss(loss.total, "pretrain", epoch, steps);
      check_finite(grads, "gradient");
      clip_gradients(grads, config.max_grad_norm);
      adam.step(params, grads);
      mlm += loss.mlm;
      con += loss.contrastive;
      total += loss.total;
      ++steps;
    }
    EpochRecord rec;
    rec.phase = "pretrain";
    rec.epoch = epoch;
    rec.steps = steps;
    const double n = steps > 0 ? static_cast<double>(steps) : 1.0;
    rec.mlm = mlm / n;
    if (config.lambda > 0.0) rec.contrastive = con / n;
    rec.total = total / n;
    rec.seconds = seconds_since(te);
    report.epochs.push_back(rec);
  }
  report.wall_seconds = seconds_since(t0);
  return report;
}

double validation_ndcg10(const std::vector<UserSequence>& sequences,
                         const std::map<std::string, TokenizedItem>& items,
                         const ItemIndex& index, const ModelParams<float>& params,
                         int threads) {
  if (sequences.empty()) return 0.0;
  std::vector<double> values(sequences.size());
  parallel_for(sequences.size(), threads, [&](std::size_t i) {
    const auto& s = sequences[i];
    const auto prefix = resolve(s, 0, s.items.size() - 1, items);
    const auto scores = cosine_scores(index, encode_prefix(prefix, params));
    const long t = index.find(s.items.back().venue_id);
    const std::size_t r = t < 0 ? index.size()
                                : target_rank(scores, index.ids(), static_cast<std::size_t>(t));
    values[i] = metrics_for_rank(r, index.size()).ndcg10;
  });
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

namespace {

// One epoch of encoder training against a fixed item index.
EpochRecord finetune_epoch(const std::vector<UserSequence>& train,
                           const std::map<std::string, TokenizedItem>& items,
                           const ItemIndex& index, ModelParams<float>& params, Adam& adam,
                           const TrainConfig& config, const std::string& phase, int epoch) {
  const auto te = Clock::now();
  const auto max_tokens = static_cast<std::size_t>(params.config.max_tokens);
  Rng rng = substream(config.seed, phase + "/" + std::to_string(epoch));
  const auto pairs = sample_pairs(train, config.pairs_per_user, rng);
  const auto B = static_cast<std::size_t>(config.batch_size);
  const Matrix<float>& C = index.vectors();
  double total = 0.0;
  std::size_t steps = 0;
  for (std::size_t start = 0; start < pairs.size(); start += B) {
    const std::size_t end = std::min(pairs.size(), start + B);
    const std::size_t n = end - start;
    std::vector<ModelInput> inputs(n);
    std::vector<int> targets(n);
    for (std::size_t j = 0; j < n; ++j) {
      const auto& seq = train[pairs[start + j].sequence];
      const std::size_t cut = pairs[start + j].cut;
      inputs[j] = pack_sequence(resolve(seq, 0, cut, items), max_tokens).input;
      const long t = index.find(seq.items[cut].venue_id);
      if (t < 0) throw ValidationError("target missing from index: " + seq.items[cut].venue_id);
      targets[j] = static_cast<int>(t);
    }
    const std::uint64_t dropout_seed = rng();
    std::vector<Activations<float>> acts(n);
    parallel_for(n, config.threads, [&](std::size_t j) {
      Rng r = substream(dropout_seed, "seq" + std::to_string(j));
      acts[j] = forward(params, inputs[j], true, &r);
    });
    Matrix<float> Q(static_cast<Eigen::Index>(n), params.config.d_model);
    for (std::size_t j = 0; j < n; ++j) Q.row(static_cast<Eigen::Index>(j)) = acts[j].pooled;
    const auto con = contrastive_loss<float>(Q, C, static_cast<float>(config.temperature), targets);
    check_loss(con.loss, phase, epoch, steps);

    std::vector<ModelParams<float>> per(n);
    parallel_for(n, config.threads, [&](std::size_t j) {
      per[j] = ModelParams<float>::zeros(params.config);
      backward(params, acts[j], Matrix<float>(),
               Matrix<float>(con.d_queries.row(static_cast<Eigen::Index>(j))), per[j]);
    });
    auto grads = ModelParams<float>::zeros(params.config);
    for (std::size_t j = 0; j < n; ++j) {
      std::vector<Matrix<float>*> dst;
      for_each_tensor(grads, [&](const std::string&, Matrix<float>& t) { dst.push_back(&t); });
      std::size_t k = 0;
      for_each_tensor(per[j], [&](const std::string&, const Matrix<float>& t) { *dst[k++] += t; });
    }
    check_finite(grads, "gradient");
    clip_gradients(grads, config.max_grad_norm);
    adam.step(params, grads);
    total += con.loss;
    ++steps;
  }
  EpochRecord rec;
  rec.phase = phase;
  rec.epoch = epoch;
  rec.steps = steps;
  rec.contrastive = total / std::max<double>(1.0, static_cast<double>(steps));
  rec.total = rec.contrastive;
  rec.seconds = seconds_since(te);
  return rec;
}

}  // namespace

FinetuneResult finetune_two_stage(const TrainingSet& data, const ModelParams<float>& pretrained,
                                  const TrainConfig& config) {
  config.validate();
  check_sequences(data);
  const auto t0 = Clock::now();
  const std::size_t n = data.sequences.size();
  const auto n_val = static_cast<std::size_t>(
      std::ceil(config.validation_fraction * static_cast<double>(n)));
  if (n_val == 0 || n_val >= n) {
    throw ConfigError("validation split leaves no validation or no training users");
  }
  const std::vector<UserSequence> train(data.sequences.begin(), data.sequences.end() - static_cast<long>(n_val));
  const std::vector<UserSequence> valid(data.sequences.end() - static_cast<long>(n_val), data.sequences.end());
  const int threads = config.threads;

  FinetuneResult result{pretrained, ItemIndex(), pretrained, {}, 0.0};
  TrainReport& report = result.report;

  // Stage 1: the index is re-encoded before every epoch.
  ModelParams<float> params = pretrained;
  ModelParams<float> best = pretrained;
  double best_score = validation_ndcg10(valid, data.items, build_index(data.items, params, threads),
                                        params, threads);
  result.pretrained_validation_ndcg10 = best_score;
  int best_epoch = 0;
  {
    EpochRecord rec;
    rec.phase = "stage1";
    rec.validation_ndcg10 = best_score;
    report.epochs.push_back(rec);
  }
  Adam adam1(params, config);
  for (int epoch = 1; epoch <= config.finetune_epochs; ++epoch) {
    const ItemIndex index = build_index(data.items, params, threads);
    EpochRecord rec = finetune_epoch(train, data.items, index, params, adam1, config, "stage1", epoch);
    const double score = validation_ndcg10(valid, data.items,
                                           build_index(data.items, params, threads), params, threads);
    rec.validation_ndcg10 = score;
    report.epochs.push_back(rec);
    if (score > best_score) {
      best_score = score;
      best = params;
      best_epoch = epoch;
    }
    if (epoch - best_epoch >= config.patience) break;
  }
  report.best_epoch_stage1 = best_epoch;

  // Stage 2: the index is frozen at the best stage-1 snapshot.
  const ItemIndex frozen = build_index(data.items, best, threads);
  result.stage1_params = best;
  params = best;
  best_score = validation_ndcg10(valid, data.items, frozen, params, threads);
  best_epoch = 0;
  {
    EpochRecord rec;
    rec.phase = "stage2";
    rec.validation_ndcg10 = best_score;
    report.epochs.push_back(rec);
  }
  Adam adam2(params, config);
  for (int epoch = 1; epoch <= config.finetune_epochs; ++epoch) {
    EpochRecord rec = finetune_epoch(train, data.items, frozen, params, adam2, config, "stage2", epoch);
    const double score = validation_ndcg10(valid, data.items, frozen, params, threads);
    rec.validation_ndcg10 = score;
    report.epochs.push_back(rec);
    if (score > best_score) {
      best_score = score;
      best = params;
      best_epoch = epoch;
    }
    if (epoch - best_epoch >= config.patience) break;
  }
  report.best_epoch_stage2 = best_epoch;
  report.best_validation_ndcg10 = best_score;
  report.wall_seconds = seconds_since(t0);
  result.params = std::move(best);
  result.index = frozen;
  return result;
}

}  // namespace poirec
