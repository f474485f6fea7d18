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

#ifndef POIREC_EVAL_HPP_
#define POIREC_EVAL_HPP_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "poirec/domain.hpp"
#include "poirec/model.hpp"
#include "poirec/rank.hpp"
#include "poirec/textrep.hpp"
#include "poirec/train.hpp"

namespace poirec {

struct SplitConfig {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

struct Split {
  std::vector<UserSequence> train;
  std::vector<UserSequence> test;
};

// Shuffles users and assigns round(train_fraction * U) of them (at least
// one on each side) to training. Each side keeps the input order.
// ValidationError with fewer than two users.
Split group_split(const std::vector<UserSequence>& sequences, const SplitConfig& config);

struct RankMetrics {
  double ndcg10 = 0.0, ndcg50 = 0.0, recall10 = 0.0, recall50 = 0.0;
  double mrr = 0.0, auc = 0.0;
};

// Metrics of a single relevant item at 1-based rank r among n candidates:
// Recall@K = [r <= K], nDCG@K = 1/log2(r + 1) for r <= K, MRR = 1/r,
// AUC = (n - r)/(n - 1).
RankMetrics metrics_for_rank(std::size_t r, std::size_t n);

// 1 + #{score > target} + #{score == target, id < target id}.
std::size_t target_rank(const std::vector<double>& scores,
                        const std::vector<std::string>& ids, std::size_t target);

struct MetricsReport {
  double ndcg10 = 0.0, ndcg50 = 0.0, recall10 = 0.0, recall50 = 0.0;
  double mrr = 0.0, auc = 0.0;
  std::size_t n_sequences = 0;
  std::size_t n_candidates = 0;
  std::size_t missing_targets = 0;

  // Averages per-sequence metrics in the given order.
  static MetricsReport from_ranks(const std::vector<std::size_t>& ranks, std::size_t n);

  std::string to_json() const;
  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

struct EvalOptions {
  bool exclude_seen = false;
  bool missing_target_is_error = false;
  int threads = 1;
};

// Leave-last-out evaluation: the last item of each sequence is the target
// and the rest the prefix. A target absent from the index counts as rank |P|
// (or raises LookupMiss when configured).
MetricsReport evaluate(const std::vector<UserSequence>& test,
                       const std::map<std::string, TokenizedItem>& items,
                       const ItemIndex& index, const ModelParams<float>& params,
                       const EvalOptions& options = {});

// Ranks drawn uniformly from 1..n_candidates.
MetricsReport random_baseline(std::size_t n_sequences, std::size_t n_candidates,
                              std::uint64_t seed);

// Plain-text table with columns nDCG@10, nDCG@50, Recall@10, Recall@50,
// MRR, AUC; one row per (label, report).
std::string format_metrics_table(
    const std::vector<std::pair<std::string, MetricsReport>>& rows);

// ---------------------------------------------------------------------------
// Ablation

struct AblationConfig {
  ModelConfig model;  // vocab_size is filled in per arm
  TrainConfig train;
  TextBudgets budgets;
  SplitConfig split;
  std::size_t max_vocab = 30000;
  std::size_t min_freq = kDefaultMinFreq;
  EvalOptions eval;
  // Debug switch: drop venue_desc from both arms.
  bool no_desc_both = false;
};

struct AblationArm {
  std::string label;
  MetricsReport metrics;
  TrainReport pretrain_report;
  TrainReport finetune_report;
  std::size_t vocab_size = 0;
};

struct AblationReport {
  AblationArm with_desc;
  AblationArm without_desc;
  std::size_t train_users = 0;
  std::size_t test_users = 0;

  std::string to_json() const;
  // Both rows plus a with/without ratio row.
  std::string to_table() const;
};

// Corpus venues as one ablation arm sees them: without venue_desc unless
// `with_desc`.
std::map<std::string, PoiMeta> arm_pois(const Corpus& corpus, bool with_desc);

// Vocabulary over the item texts of `pois`.
Vocab arm_vocab(const std::map<std::string, PoiMeta>& pois, const AblationConfig& config);

// Model configuration of an arm with the given vocabulary size.
ModelConfig arm_model_config(const AblationConfig& config, std::size_t vocab_size);

// Settings sized for one CPU core and the default synthetic corpus; every
// stage seed is `seed`.
AblationConfig desk_scale_ablation(std::uint64_t seed);

// Trains and evaluates two models on the same split that differ only in
// whether venue_desc is part of the item text.
AblationReport run_ablation(const Corpus& corpus, const AblationConfig& config);

}  // namespace poirec

#endif  // POIREC_EVAL_HPP_
